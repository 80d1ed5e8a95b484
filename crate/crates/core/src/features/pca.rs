//! Principal component analysis for HOG descriptors.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EGPC";
const VERSION: u32 = 1;

/// A fitted projection onto the top principal components.
///
/// Binary layout (little-endian): magic `EGPC`, `u32` version (1), `u32`
/// input dimension `D`, `u32` output dimension `K`, then `D` f64 mean values,
/// `K × D` f64 component values row by row, and `K` f64 explained variances.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// Row-major, `dim × input_dim`.
    components: Vec<f64>,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn from_parts(mean: Vec<f64>, components: Vec<f64>, explained_variance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        let k = explained_variance.len();
        if d == 0 || k == 0 || components.len() != d * k {
            return Err(Error::dims(format!("{k} x {d} components"), components.len()));
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn dim(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, k: usize) -> &[f64] {
        let d = self.input_dim();
        &self.components[k * d..(k + 1) * d]
    }

    /// Population variance along each component, non-increasing.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.input_dim() as u32).to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        for v in self.mean.iter().chain(&self.components).chain(&self.explained_variance) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec");
        buf
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::ModelFormat("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat("not a PCA model file".into()));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
            r.read_exact(&mut word).map_err(|_| Error::ModelFormat("truncated header".into()))?;
            Ok(u32::from_le_bytes(word))
        };
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported PCA model version {version}")));
        }
        let d = read_u32(&mut r)? as usize;
        let k = read_u32(&mut r)? as usize;
        let mut values = vec![0.0; d + k * d + k];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf).map_err(|_| Error::ModelFormat("truncated body".into()))?;
            *v = f64::from_le_bytes(buf);
        }
        let explained_variance = values.split_off(d + k * d);
        let components = values.split_off(d);
        Self::from_parts(values, components, explained_variance)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }

    /// CSV for inspection: a `mean` row, then one `pc<k>` row per component
    /// with its explained variance in the second column.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        write!(w, "name,explained_variance")?;
        for i in 0..self.input_dim() {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        write!(w, "mean,")?;
        for v in &self.mean {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
        for k in 0..self.dim() {
            write!(w, "pc{k},{}", self.explained_variance[k])?;
            for v in self.component(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Fits the top `dim` principal components of `samples` (one row each).
///
/// Components are eigenvectors of the population covariance, sorted by
/// decreasing eigenvalue, with the sign chosen so each component's
/// largest-magnitude entry is positive. The eigendecomposition is
/// deterministic, so no seed is involved.
pub fn pca_fit(samples: &[Vec<f64>], dim: usize) -> Result<PcaModel> {
    let n = samples.len();
    if dim == 0 {
        return Err(Error::validation("pca_dim", "must be greater than zero"));
    }
    if n < dim {
        return Err(Error::InsufficientData(format!(
            "PCA to {dim} dimensions needs at least {dim} samples, got {n}"
        )));
    }
    let d = samples[0].len();
    if dim > d {
        return Err(Error::validation("pca_dim", format!("{dim} exceeds input dimension {d}")));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::dims(d, bad.len()));
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| samples[i][j] - mean[j]);
    let cov = (centred.transpose() * &centred) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps ties in eigen-solver order, which is deterministic
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(dim * d);
    let mut explained = Vec::with_capacity(dim);
    for &k in order.iter().take(dim) {
        let col = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for j in 1..d {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.extend(col.iter().map(|v| v * sign));
        explained.push(eig.eigenvalues[k].max(0.0));
    }
    PcaModel::from_parts(mean, components, explained)
}

/// `components × (raw − mean)`.
pub fn pca_project(model: &PcaModel, raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() != model.input_dim() {
        return Err(Error::dims(model.input_dim(), raw.len()));
    }
    let centred: Vec<f64> = raw.iter().zip(&model.mean).map(|(r, m)| r - m).collect();
    Ok((0..model.dim())
        .map(|k| model.component(k).iter().zip(&centred).map(|(c, v)| c * v).sum())
        .collect())
}

/// Maps projected coordinates back into the input space.
pub fn pca_reconstruct(model: &PcaModel, coords: &[f64]) -> Result<Vec<f64>> {
    if coords.len() != model.dim() {
        return Err(Error::dims(model.dim(), coords.len()));
    }
    let mut out = model.mean.clone();
    for (k, &c) in coords.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(model.component(k)) {
            *o += c * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    // rows spanned by `basis` around `origin`, with random coefficients
    fn subspace_rows(rng: &mut ChaCha8Rng, basis: &[Vec<f64>], origin: &[f64], n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let mut row = origin.to_vec();
                for b in basis {
                    let c: f64 = rng.gen_range(-3.0..3.0);
                    for (r, v) in row.iter_mut().zip(b) {
                        *r += c * v;
                    }
                }
                row
            })
            .collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn three_dim_subspace_leaves_no_variance_elsewhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = random_rows(&mut rng, 3, 40);
        let origin = random_rows(&mut rng, 1, 40).remove(0);
        let rows = subspace_rows(&mut rng, &basis, &origin, 80);
        let m = pca_fit(&rows, 20).unwrap();
        assert!(m.explained_variance()[2] > 1e-3);
        for v in &m.explained_variance()[3..] {
            assert!(*v < 1e-9, "{v}");
        }
    }

    #[test]
    fn components_orthonormal_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = random_rows(&mut rng, 50, 30);
        let m = pca_fit(&rows, 10).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot(m.component(i), m.component(j)) - expected).abs() < 1e-6);
            }
            let c = m.component(i);
            let pivot = c.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(pivot > 0.0);
        }
        assert!(m.explained_variance().windows(2).all(|w| w[0] >= w[1]));
        assert!(pca_project(&m, m.mean()).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn duplicated_samples_give_same_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = random_rows(&mut rng, 30, 12);
        let doubled: Vec<Vec<f64>> = rows.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
        let a = pca_fit(&rows, 5).unwrap();
        let b = pca_fit(&doubled, 5).unwrap();
        for (x, y) in a.mean().iter().zip(b.mean()) {
            assert!((x - y).abs() < 1e-12);
        }
        for k in 0..5 {
            assert!((a.explained_variance()[k] - b.explained_variance()[k]).abs() < 1e-9);
            for (x, y) in a.component(k).iter().zip(b.component(k)) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_rank_data_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = random_rows(&mut rng, 6, 25);
        let origin = random_rows(&mut rng, 1, 25).remove(0);
        let rows = subspace_rows(&mut rng, &basis, &origin, 40);
        let m = pca_fit(&rows, 6).unwrap();
        for r in &rows {
            let back = pca_reconstruct(&m, &pca_project(&m, r).unwrap()).unwrap();
            let err = back.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn project_mean_plus_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = random_rows(&mut rng, 40, 16);
        let m = pca_fit(&rows, 4).unwrap();
        let x: Vec<f64> = m.mean().iter().zip(m.component(0)).map(|(a, b)| a + b).collect();
        let p = pca_project(&m, &x).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9);
        assert!(p[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn projection_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows = random_rows(&mut rng, 40, 16);
        let m = pca_fit(&rows, 8).unwrap();
        let a = random_rows(&mut rng, 1, 16).remove(0);
        let b = random_rows(&mut rng, 1, 16).remove(0);
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let pa = pca_project(&m, &a).unwrap();
        let pb = pca_project(&m, &b).unwrap();
        let pab = pca_project(&m, &ab).unwrap();
        // project(a + b) = project(a) + project(b) + components · mean
        let correction = pca_project(&m, &vec![0.0; 16]).unwrap();
        for k in 0..8 {
            assert!((pab[k] - (pa[k] + pb[k] - correction[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows = random_rows(&mut rng, 5, 10);
        assert!(matches!(pca_fit(&rows, 6), Err(Error::InsufficientData(_))));
        let m = pca_fit(&rows, 3).unwrap();
        assert!(pca_project(&m, &[0.0; 9]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows = random_rows(&mut rng, 20, 10);
        let m = pca_fit(&rows, 4).unwrap();
        let back = PcaModel::read_from(m.to_bytes().as_slice()).unwrap();
        assert_eq!(back, m);
        let mut bytes = m.to_bytes();
        bytes[0] = b'X';
        assert!(PcaModel::read_from(bytes.as_slice()).is_err());
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 6);
    }
}
