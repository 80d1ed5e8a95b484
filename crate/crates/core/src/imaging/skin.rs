//! Generic skin colour model and histogram back-projection.
//!
//! The built-in table is derived from the 16-component diagonal
//! mixture-of-Gaussians skin and non-skin colour densities of Jones and Rehg
//! (2002). Each quantized RGB cell holds the posterior skin probability of
//! its centre colour under equal priors; posteriors below
//! [`NEGLIGIBLE_PROBABILITY`] are stored as exactly zero so that clearly
//! non-skin colours never survive a relative threshold.
//!
//! # File formats
//!
//! A table holds 32768 probabilities indexed by `(r >> 3) << 10 | (g >> 3) << 5 | (b >> 3)`.
//!
//! * Binary: 32768 little-endian IEEE-754 `f32` values, no header (131072 bytes).
//! * CSV: one entry per non-empty line, either `probability` or
//!   `index,probability`. A first line that does not parse as a number is
//!   treated as a header.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::imaging::BinaryMask;
use crate::types::{BoundingBox, FrameImage};

pub const SKIN_TABLE_LEN: usize = 32 * 32 * 32;
pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-3;

/// (weight, mean RGB, diagonal covariance)
type Component = (f64, [f64; 3], [f64; 3]);

const SKIN_MIXTURE: [Component; 16] = [
    (0.0294, [73.53, 29.94, 17.76], [765.40, 121.44, 112.80]),
    (0.0331, [249.71, 233.94, 217.49], [39.94, 154.44, 396.05]),
    (0.0654, [161.68, 116.25, 96.95], [291.03, 60.48, 162.85]),
    (0.0756, [186.07, 136.62, 114.40], [274.95, 64.60, 198.27]),
    (0.0554, [189.26, 98.37, 51.18], [633.18, 222.40, 250.69]),
    (0.0314, [247.00, 152.20, 90.84], [65.23, 691.53, 609.92]),
    (0.0454, [150.10, 72.66, 37.76], [408.63, 200.77, 257.57]),
    (0.0469, [206.85, 171.09, 156.34], [530.08, 155.08, 572.79]),
    (0.0956, [212.78, 152.82, 120.04], [160.57, 84.52, 243.90]),
    (0.0763, [234.87, 175.43, 138.94], [163.80, 121.57, 279.22]),
    (0.1100, [151.19, 97.74, 74.59], [425.40, 73.56, 175.11]),
    (0.0676, [120.52, 77.55, 59.82], [330.45, 70.34, 151.82]),
    (0.0755, [192.20, 119.62, 82.32], [152.76, 92.14, 259.15]),
    (0.0500, [214.29, 136.08, 87.24], [204.90, 140.17, 270.19]),
    (0.0667, [99.57, 54.33, 38.06], [448.13, 90.18, 151.29]),
    (0.0749, [238.88, 203.08, 176.91], [178.38, 156.27, 404.99]),
];

const NON_SKIN_MIXTURE: [Component; 16] = [
    (0.0637, [254.37, 254.41, 253.82], [2.77, 2.81, 5.46]),
    (0.0516, [9.39, 8.09, 8.52], [46.84, 33.59, 32.48]),
    (0.0864, [96.57, 96.95, 91.53], [280.69, 156.79, 436.58]),
    (0.0636, [160.44, 162.49, 159.06], [355.98, 115.89, 591.24]),
    (0.0747, [74.98, 63.23, 46.33], [414.84, 245.95, 361.27]),
    (0.0365, [121.83, 60.88, 18.31], [2502.24, 1383.53, 237.18]),
    (0.0349, [202.18, 154.88, 91.04], [957.42, 1766.94, 1582.52]),
    (0.0649, [193.06, 201.93, 206.55], [562.88, 190.23, 447.28]),
    (0.0656, [51.88, 57.14, 61.55], [344.11, 191.77, 433.40]),
    (0.1189, [30.88, 26.84, 25.32], [222.07, 118.65, 182.41]),
    (0.0362, [44.97, 85.96, 131.95], [651.32, 840.52, 963.67]),
    (0.0849, [236.02, 236.27, 230.70], [225.03, 117.29, 331.95]),
    (0.0368, [207.86, 191.20, 164.12], [494.04, 237.69, 533.52]),
    (0.0389, [99.83, 148.11, 188.17], [955.88, 654.95, 916.70]),
    (0.0943, [135.06, 131.92, 123.10], [350.35, 130.30, 388.43]),
    (0.0477, [135.96, 103.89, 66.88], [806.44, 642.20, 350.36]),
];

fn mixture_density(mix: &[Component], rgb: [f64; 3]) -> f64 {
    let norm = (2.0 * std::f64::consts::PI).powf(1.5);
    mix.iter()
        .map(|(w, mu, var)| {
            let det = var[0] * var[1] * var[2];
            let q: f64 = (0..3).map(|i| (rgb[i] - mu[i]).powi(2) / var[i]).sum();
            w * (-0.5 * q).exp() / (norm * det.sqrt())
        })
        .sum()
}

/// Skin probability lookup over a 32x32x32 RGB quantization.
#[derive(Clone, Debug, PartialEq)]
pub struct SkinModel {
    table: Vec<f32>,
}

#[inline]
pub fn skin_index(rgb: [u8; 3]) -> usize {
    ((rgb[0] as usize >> 3) << 10) | ((rgb[1] as usize >> 3) << 5) | (rgb[2] as usize >> 3)
}

impl SkinModel {
    pub fn from_table(table: Vec<f32>) -> Result<Self> {
        if table.len() != SKIN_TABLE_LEN {
            return Err(Error::dims(SKIN_TABLE_LEN, table.len()));
        }
        if let Some(i) = table.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation(
                "skin_model",
                format!("entry {i} = {} is not a probability", table[i]),
            ));
        }
        Ok(Self { table })
    }

    /// The built-in generic model, computed once per process.
    pub fn generic() -> &'static SkinModel {
        static MODEL: OnceLock<SkinModel> = OnceLock::new();
        MODEL.get_or_init(|| {
            let mut table = vec![0f32; SKIN_TABLE_LEN];
            for (idx, slot) in table.iter_mut().enumerate() {
                let centre = |q: usize| (q * 8) as f64 + 3.5;
                let rgb = [centre(idx >> 10), centre((idx >> 5) & 31), centre(idx & 31)];
                let skin = mixture_density(&SKIN_MIXTURE, rgb);
                let other = mixture_density(&NON_SKIN_MIXTURE, rgb);
                let p = if skin + other > 0.0 { skin / (skin + other) } else { 0.0 };
                *slot = if p < NEGLIGIBLE_PROBABILITY { 0.0 } else { p as f32 };
            }
            SkinModel { table }
        })
    }

    /// A model assigning the same probability to every colour.
    pub fn uniform(p: f32) -> Result<Self> {
        Self::from_table(vec![p; SKIN_TABLE_LEN])
    }

    #[inline]
    pub fn probability(&self, rgb: [u8; 3]) -> f64 {
        self.table[skin_index(rgb)] as f64
    }

    pub fn table(&self) -> &[f32] {
        &self.table
    }

    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        for p in &self.table {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != SKIN_TABLE_LEN * 4 {
            return Err(Error::dims(SKIN_TABLE_LEN * 4, bytes.len()));
        }
        let table = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_table(table)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "index,probability")?;
        for (i, p) in self.table.iter().enumerate() {
            writeln!(w, "{i},{p}")?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut table = vec![f32::NAN; SKIN_TABLE_LEN];
        let mut next = 0usize;
        let bad = |line: usize, message: String| Error::Record {
            path: "<skin table>".into(),
            line,
            message,
        };
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = match fields.as_slice() {
                [p] => p.parse::<f32>().ok().map(|p| (next, p)),
                [i, p] => match (i.parse::<usize>(), p.parse::<f32>()) {
                    (Ok(i), Ok(p)) => Some((i, p)),
                    _ => None,
                },
                _ => None,
            };
            let Some((i, p)) = parsed else {
                if ln == 0 {
                    continue; // header
                }
                return Err(bad(ln + 1, format!("cannot parse `{line}`")));
            };
            if i >= SKIN_TABLE_LEN {
                return Err(bad(ln + 1, format!("index {i} out of range")));
            }
            table[i] = p;
            next = i + 1;
        }
        if let Some(i) = table.iter().position(|p| p.is_nan()) {
            return Err(Error::validation("skin_model", format!("entry {i} missing")));
        }
        Self::from_table(table)
    }

    /// Loads a `.csv` table or, for any other extension, the binary form.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::read_csv(&std::fs::read_to_string(path)?)
        } else {
            Self::read_binary(std::fs::File::open(path)?)
        }
    }
}

/// Skin probabilities for the pixels of `region`, row-major and region-local.
pub fn probability_map(frame: &FrameImage, region: &BoundingBox, model: &SkinModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(region.area());
    for y in region.y..region.bottom() {
        for x in region.x..region.right() {
            out.push(model.probability(frame.rgb(x, y)));
        }
    }
    out
}

/// Relative threshold on a probability map: set where `p >= frac * max(p)`.
/// An all-zero map yields an empty mask.
pub fn threshold_relative(values: &[f64], width: usize, height: usize, frac: f64) -> BinaryMask {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return BinaryMask::new(width, height);
    }
    let cut = frac * max;
    BinaryMask::from_bits(width, height, values.iter().map(|&p| p >= cut).collect())
}

/// Back-projects the skin model over `region` and thresholds it relative to
/// the maximum probability found inside that region. The mask is region-local.
pub fn back_project_region(
    frame: &FrameImage,
    region: &BoundingBox,
    model: &SkinModel,
    threshold_frac: f64,
) -> BinaryMask {
    let probs = probability_map(frame, region, model);
    threshold_relative(&probs, region.w, region.h, threshold_frac)
}

/// Whole-frame back-projection.
pub fn back_project(frame: &FrameImage, model: &SkinModel, threshold_frac: f64) -> BinaryMask {
    back_project_region(frame, &frame.bounds(), model, threshold_frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn generic_model_separates_skin_from_blue() {
        let m = SkinModel::generic();
        assert!(m.probability([224, 172, 140]) > 0.9);
        assert_eq!(m.probability([0, 0, 255]), 0.0);
        assert_eq!(m.probability([40, 60, 200]), 0.0);
        assert!(m.table().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn uniform_frame_fully_set() {
        let f = FrameImage::filled(0, 30.0, 8, 6, [10, 200, 30]).unwrap();
        let m = SkinModel::uniform(0.3).unwrap();
        assert_eq!(back_project(&f, &m, 0.75).count(), 48);
    }

    #[test]
    fn half_and_half_threshold() {
        // two colours with table probabilities 1.0 and 0.1
        let mut table = vec![0.1f32; SKIN_TABLE_LEN];
        table[skin_index([200, 150, 120])] = 1.0;
        let model = SkinModel::from_table(table).unwrap();
        let mut f = FrameImage::filled(0, 30.0, 10, 4, [0, 0, 0]).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                f.set_rgb(x, y, [200, 150, 120]);
            }
        }
        let mask = back_project(&f, &model, 0.75);
        // per-pixel oracle: p >= 0.75 * 1.0
        let expected = BinaryMask::from_fn(10, 4, |x, _| x < 5);
        assert_eq!(mask, expected);
    }

    #[test]
    fn zero_probability_gives_empty_mask() {
        let f = FrameImage::filled(0, 30.0, 5, 5, [0, 0, 255]).unwrap();
        assert!(back_project(&f, SkinModel::generic(), 0.75).is_empty());
        assert!(back_project(&f, &SkinModel::uniform(0.0).unwrap(), 0.5).is_empty());
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let m = SkinModel::generic();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), SKIN_TABLE_LEN * 4);
        assert_eq!(&SkinModel::read_binary(&buf[..]).unwrap(), m);
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(&SkinModel::read_csv(std::str::from_utf8(&csv).unwrap()).unwrap(), m);
    }

    #[test]
    fn wrong_size_table_rejected() {
        assert!(SkinModel::from_table(vec![0.0; 10]).is_err());
        assert!(SkinModel::read_binary(&[0u8; 12][..]).is_err());
        assert!(SkinModel::from_table(vec![1.5; SKIN_TABLE_LEN]).is_err());
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_pixels(
            pixels in proptest::collection::vec(any::<u8>(), 7 * 5 * 3),
            a in 0.01f64..1.0,
            b in 0.01f64..1.0,
        ) {
            let f = FrameImage::new(0, 30.0, 7, 5, pixels).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let m_lo = back_project(&f, SkinModel::generic(), lo);
            let m_hi = back_project(&f, SkinModel::generic(), hi);
            prop_assert!(m_hi.bits().iter().zip(m_lo.bits()).all(|(&h, &l)| !h || l));
        }
    }
}
