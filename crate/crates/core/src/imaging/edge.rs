use crate::imaging::{threshold_relative, BinaryMask, GrayImage};
use crate::types::BoundingBox;

/// Produces a per-pixel edge strength map. Any learned or classical edge
/// detector can sit behind this trait.
pub trait EdgeOperator: Send + Sync {
    /// Row-major, non-negative strengths with the same size as `gray`.
    fn strength(&self, gray: &GrayImage) -> Vec<f64>;
}

/// Gradient magnitude from central differences, with clamped borders.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradientMagnitude;

impl EdgeOperator for GradientMagnitude {
    fn strength(&self, gray: &GrayImage) -> Vec<f64> {
        let (w, h) = (gray.width(), gray.height());
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h as isize {
            for x in 0..w as isize {
                let gx = (gray.get_clamped(x + 1, y) - gray.get_clamped(x - 1, y)) / 2.0;
                let gy = (gray.get_clamped(x, y + 1) - gray.get_clamped(x, y - 1)) / 2.0;
                out.push((gx * gx + gy * gy).sqrt());
            }
        }
        out
    }
}

/// Edge mask from an arbitrary operator: set where strength is at least
/// `threshold_frac` of the maximum. A flat image yields an empty mask.
pub fn edge_map_with(op: &dyn EdgeOperator, gray: &GrayImage, threshold_frac: f64) -> BinaryMask {
    let s = op.strength(gray);
    threshold_relative(&s, gray.width(), gray.height(), threshold_frac)
}

pub fn edge_map(gray: &GrayImage, threshold_frac: f64) -> BinaryMask {
    edge_map_with(&GradientMagnitude, gray, threshold_frac)
}

/// Edge mask local to `region`, thresholded against the strongest edge inside
/// the region. Strengths are computed on the region plus a one-pixel margin
/// (where the image allows) so the region border sees real neighbours.
pub fn edge_map_region(op: &dyn EdgeOperator, gray: &GrayImage, region: &BoundingBox, threshold_frac: f64) -> BinaryMask {
    let x0 = region.x.saturating_sub(1);
    let y0 = region.y.saturating_sub(1);
    let x1 = (region.right() + 1).min(gray.width());
    let y1 = (region.bottom() + 1).min(gray.height());
    let padded = BoundingBox::new(x0, y0, x1 - x0, y1 - y0);
    let strength = op.strength(&gray.crop(&padded));
    let (ox, oy) = (region.x - x0, region.y - y0);
    let mut inner = Vec::with_capacity(region.area());
    for y in 0..region.h {
        let row = (y + oy) * padded.w + ox;
        inner.extend_from_slice(&strength[row..row + region.w]);
    }
    threshold_relative(&inner, region.w, region.h, threshold_frac)
}
