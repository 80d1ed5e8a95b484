//! Dense optical flow.
//!
//! The reference backend is coarse-to-fine block matching: a
//! 2x2-mean pyramid, integer block search around the upsampled coarser
//! estimate at every level, and bilinear interpolation of block-centre
//! vectors to a per-pixel field. It is exact on integer translations of
//! textured images, which makes it straightforward to test.

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Per-pixel displacement from the previous frame to the current one.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut out = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = f(x, y);
                out.dx[y * width + x] = dx;
                out.dy[y * width + x] = dy;
            }
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn is_zero(&self) -> bool {
        self.dx.iter().chain(&self.dy).all(|&v| v == 0.0)
    }
}

/// A dense optical flow algorithm.
pub trait FlowBackend: Send + Sync {
    fn flow(&self, prev: &GrayImage, curr: &GrayImage) -> Result<FlowField>;
}

/// Pyramidal block matching.
#[derive(Clone, Debug)]
pub struct BlockMatching {
    pub levels: usize,
    pub block: usize,
    /// Search radius in pixels around the predicted displacement, per level.
    pub search: usize,
    /// Cost added per pixel of deviation from the coarser prediction. Keeps
    /// textureless blocks on the prediction instead of chasing noise.
    pub smoothness: f64,
}

impl Default for BlockMatching {
    fn default() -> Self {
        Self {
            levels: 3,
            block: 8,
            search: 4,
            smoothness: 2e-3,
        }
    }
}

impl BlockMatching {
    pub fn from_config(cfg: &crate::PipelineConfig) -> Self {
        Self {
            levels: cfg.flow_levels,
            block: cfg.flow_block,
            search: cfg.flow_search,
            ..Self::default()
        }
    }
}

fn downsample(img: &GrayImage) -> GrayImage {
    let w = img.width().div_ceil(2);
    let h = img.height().div_ceil(2);
    GrayImage::from_fn(w, h, |x, y| {
        let mut sum = 0.0;
        let mut n = 0.0;
        for yy in 2 * y..(2 * y + 2).min(img.height()) {
            for xx in 2 * x..(2 * x + 2).min(img.width()) {
                sum += img.get(xx, yy);
                n += 1.0;
            }
        }
        sum / n
    })
}

/// Block-level vectors on a regular grid.
struct BlockField {
    nx: usize,
    ny: usize,
    block: usize,
    v: Vec<(i32, i32)>,
}

impl BlockField {
    /// Bilinear interpolation of block vectors at a pixel position.
    fn interpolate(&self, x: f64, y: f64) -> (f64, f64) {
        let gx = ((x - (self.block as f64 - 1.0) / 2.0) / self.block as f64).clamp(0.0, (self.nx - 1) as f64);
        let gy = ((y - (self.block as f64 - 1.0) / 2.0) / self.block as f64).clamp(0.0, (self.ny - 1) as f64);
        let x0 = gx.floor() as usize;
        let y0 = gy.floor() as usize;
        let x1 = (x0 + 1).min(self.nx - 1);
        let y1 = (y0 + 1).min(self.ny - 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let at = |bx: usize, by: usize| {
            let (u, v) = self.v[by * self.nx + bx];
            (u as f64, v as f64)
        };
        let lerp = |a: (f64, f64), b: (f64, f64), t: f64| (a.0 * (1.0 - t) + b.0 * t, a.1 * (1.0 - t) + b.1 * t);
        // skip the blend when weights are zero so exact inputs stay exact
        let top = if fx == 0.0 { at(x0, y0) } else { lerp(at(x0, y0), at(x1, y0), fx) };
        let bottom = if fx == 0.0 { at(x0, y1) } else { lerp(at(x0, y1), at(x1, y1), fx) };
        if fy == 0.0 {
            top
        } else {
            lerp(top, bottom, fy)
        }
    }
}

/// Mean absolute difference of a block displaced by `d`, or `None` when less
/// than half of the displaced block lands inside the frame.
fn block_mad(prev: &GrayImage, curr: &GrayImage, x0: usize, y0: usize, x1: usize, y1: usize, d: (i32, i32)) -> Option<f64> {
    let (w, h) = (prev.width() as i32, prev.height() as i32);
    let mut sad = 0.0;
    let mut n = 0usize;
    for y in y0..y1 {
        let ty = y as i32 + d.1;
        if ty < 0 || ty >= h {
            continue;
        }
        for x in x0..x1 {
            let tx = x as i32 + d.0;
            if tx < 0 || tx >= w {
                continue;
            }
            sad += (curr.get(tx as usize, ty as usize) - prev.get(x, y)).abs();
            n += 1;
        }
    }
    let total = (x1 - x0) * (y1 - y0);
    (n * 2 >= total).then(|| sad / n as f64)
}

// (cost, deviation from prediction, |d|, dy, dx), compared lexicographically
type Key = (f64, i32, i32, i32, i32);

fn better(a: &Key, b: &Key) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2, a.3, a.4) < (b.1, b.2, b.3, b.4))
}

impl BlockMatching {
    fn key(&self, mad: f64, d: (i32, i32), pred: (i32, i32)) -> Key {
        let dev = (d.0 - pred.0).abs() + (d.1 - pred.1).abs();
        (mad + self.smoothness * dev as f64, dev, d.0.abs() + d.1.abs(), d.1, d.0)
    }

    fn match_level(&self, prev: &GrayImage, curr: &GrayImage, coarse: Option<&BlockField>) -> BlockField {
        let (w, h) = (prev.width(), prev.height());
        let b = self.block;
        let nx = w.div_ceil(b);
        let ny = h.div_ceil(b);
        let s = self.search as i32;
        let extent = |bx: usize, by: usize| (bx * b, by * b, (bx * b + b).min(w), (by * b + b).min(h));
        let mut preds = Vec::with_capacity(nx * ny);
        let mut best: Vec<Option<Key>> = Vec::with_capacity(nx * ny);
        for by in 0..ny {
            for bx in 0..nx {
                let (x0, y0, x1, y1) = extent(bx, by);
                let pred = match coarse {
                    Some(c) => {
                        let cx = (x0 + x1 - 1) as f64 / 2.0;
                        let cy = (y0 + y1 - 1) as f64 / 2.0;
                        let (u, vv) = c.interpolate(cx / 2.0, cy / 2.0);
                        ((2.0 * u).round() as i32, (2.0 * vv).round() as i32)
                    }
                    None => (0, 0),
                };
                let mut found: Option<Key> = None;
                for dy in pred.1 - s..=pred.1 + s {
                    for dx in pred.0 - s..=pred.0 + s {
                        if let Some(mad) = block_mad(prev, curr, x0, y0, x1, y1, (dx, dy)) {
                            let key = self.key(mad, (dx, dy), pred);
                            if found.as_ref().is_none_or(|f| better(&key, f)) {
                                found = Some(key);
                            }
                        }
                    }
                }
                preds.push(pred);
                best.push(found);
            }
        }
        // A poor coarse estimate near the border can put the true motion
        // outside the search window, so blocks also try their neighbours'
        // vectors. Forward and backward sweeps let good vectors travel.
        let order: Vec<usize> = (0..nx * ny).chain((0..nx * ny).rev()).collect();
        for &i in &order {
            let (bx, by) = (i % nx, i / nx);
            let (x0, y0, x1, y1) = extent(bx, by);
            for (ox, oy) in [(-1i32, 0i32), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)] {
                let (nbx, nby) = (bx as i32 + ox, by as i32 + oy);
                if nbx < 0 || nby < 0 || nbx >= nx as i32 || nby >= ny as i32 {
                    continue;
                }
                let Some(nk) = best[nby as usize * nx + nbx as usize] else { continue };
                let d = (nk.4, nk.3);
                if let Some(mad) = block_mad(prev, curr, x0, y0, x1, y1, d) {
                    let key = self.key(mad, d, preds[i]);
                    if best[i].as_ref().is_none_or(|f| better(&key, f)) {
                        best[i] = Some(key);
                    }
                }
            }
        }
        let v = best
            .iter()
            .zip(&preds)
            .map(|(k, &p)| k.map_or(p, |k| (k.4, k.3)))
            .collect();
        BlockField { nx, ny, block: b, v }
    }
}

impl FlowBackend for BlockMatching {
    fn flow(&self, prev: &GrayImage, curr: &GrayImage) -> Result<FlowField> {
        if (prev.width(), prev.height()) != (curr.width(), curr.height()) {
            return Err(Error::dims(
                format!("{}x{}", prev.width(), prev.height()),
                format!("{}x{}", curr.width(), curr.height()),
            ));
        }
        let mut pyr = vec![(prev.clone(), curr.clone())];
        for _ in 1..self.levels.max(1) {
            let (p, c) = pyr.last().unwrap();
            if p.width() < 2 * self.block || p.height() < 2 * self.block {
                break;
            }
            pyr.push((downsample(p), downsample(c)));
        }
        let mut field: Option<BlockField> = None;
        for (p, c) in pyr.iter().rev() {
            field = Some(self.match_level(p, c, field.as_ref()));
        }
        let field = field.expect("at least one level");
        Ok(FlowField::from_fn(prev.width(), prev.height(), |x, y| {
            field.interpolate(x as f64, y as f64)
        }))
    }
}

/// Dense flow with the reference block-matching backend.
pub fn dense_flow(prev: &GrayImage, curr: &GrayImage) -> Result<FlowField> {
    BlockMatching::default().flow(prev, curr)
}
