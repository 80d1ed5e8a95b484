//! Hand verification and laterality from a rotating Haar-like feature.
//!
//! Three parallel strips of equal size are swept around the centroid of a
//! candidate box. The centre strip starts at the centroid and runs to the
//! image border; the two side strips sit one strip-width to either side. A
//! forearm is a long, fairly uniform region, so when the centre strip lies
//! along it its coefficient of variation (CoV) is low compared with the
//! sides. The per-angle score is therefore
//!
//! ```text
//! score(θ) = ½ [(CoV_side1 − CoV_centre) + (CoV_side2 − CoV_centre)]
//! ```
//!
//! which peaks at the arm direction. Scores at 1° steps are summed into
//! 5° bins (72 values), with angles in the crate-wide convention described in
//! [`crate::angle`]. The sign is side-minus-centre; the opposite sign would
//! make arm alignment a minimum.
//!
//! The arm enters an egocentric view from below: toward the bottom-left for
//! the wearer's left hand, bottom-right for the right hand, and from the top
//! half for anyone else.

use crate::classify::{ForestModel, TrainingSet};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::types::{angle, BoundingBox, Laterality};

/// Binned rotating-strip scores; bin `k` covers `[k·bin, (k+1)·bin)` degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarFeature {
    bins: Vec<f64>,
    bin_deg: u32,
}

impl HaarFeature {
    pub fn new(bins: Vec<f64>, bin_deg: u32) -> Result<Self> {
        if bin_deg == 0 || 360 % bin_deg != 0 || bins.len() != (360 / bin_deg) as usize {
            return Err(Error::dims(
                format!("360 / {bin_deg} bins"),
                bins.len(),
            ));
        }
        Ok(Self { bins, bin_deg })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn bin_deg(&self) -> u32 {
        self.bin_deg
    }

    /// Index of the largest bin (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.bins.iter().enumerate() {
            if v > self.bins[best] {
                best = i;
            }
        }
        best
    }

    /// Centre angle of a bin in degrees.
    pub fn bin_centre(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_deg as f64
    }

    /// Sums over the top half (0-180°), bottom-right (180-270°) and
    /// bottom-left (270-360°) quadrants, in that order.
    pub fn quadrant_sums(&self) -> (f64, f64, f64) {
        let (mut top, mut bottom_right, mut bottom_left) = (0.0, 0.0, 0.0);
        for (k, &v) in self.bins.iter().enumerate() {
            let start = k as u32 * self.bin_deg;
            if start < 180 {
                top += v;
            } else if start < 270 {
                bottom_right += v;
            } else {
                bottom_left += v;
            }
        }
        (top, bottom_right, bottom_left)
    }
}

/// Intensity statistics of one strip.
#[derive(Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    /// std / mean; 0 for empty strips or a (near-)zero mean.
    fn cov(&self) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let mean = self.sum / self.n;
        if mean < 1e-6 {
            return 0.0;
        }
        let var = (self.sum_sq / self.n - mean * mean).max(0.0);
        var.sqrt() / mean
    }
}

/// Width of each strip in pixels: half the box width, never below the
/// configured minimum.
pub fn strip_width(bbox: &BoundingBox, cfg: &PipelineConfig) -> usize {
    (bbox.w / 2).max(cfg.haar_min_strip_px)
}

/// Score of the three-strip filter at one angle.
pub fn strip_score(gray: &GrayImage, centre: (f64, f64), width: usize, deg: f64) -> f64 {
    let (ux, uy) = angle::direction(deg);
    // perpendicular unit vector
    let (nx, ny) = (-uy, ux);
    let max_x = (gray.width() - 1) as f64;
    let max_y = (gray.height() - 1) as f64;
    let half = (width as f64 - 1.0) / 2.0;
    let offsets: Vec<[(f64, f64); 3]> = (0..width)
        .map(|j| {
            let base = j as f64 - half;
            [0.0, -(width as f64), width as f64].map(|off| ((base + off) * nx, (base + off) * ny))
        })
        .collect();
    // the footprint at a ray step is a segment; its two ends bound every sample
    let reach = half + width as f64;
    let mut strips = [Moments::default(), Moments::default(), Moments::default()];
    let mut t = 0.0;
    loop {
        let (lx, ly) = (centre.0 + t * ux, centre.1 + t * uy);
        if !(lx >= 0.0 && ly >= 0.0 && lx <= max_x && ly <= max_y) {
            break;
        }
        let inside = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y;
        let all_inside = inside(lx + reach * nx, ly + reach * ny) && inside(lx - reach * nx, ly - reach * ny);
        for (s, strip) in strips.iter_mut().enumerate() {
            // local accumulators keep the inner loop in registers
            let (mut n, mut sum, mut sum_sq) = (0.0, 0.0, 0.0);
            if all_inside {
                for o in &offsets {
                    let (ox, oy) = o[s];
                    let v = gray.sample_inside(lx + ox, ly + oy);
                    sum += v;
                    sum_sq += v * v;
                }
                n = offsets.len() as f64;
            } else {
                for o in &offsets {
                    let (ox, oy) = o[s];
                    if let Some(v) = gray.sample(lx + ox, ly + oy) {
                        n += 1.0;
                        sum += v;
                        sum_sq += v * v;
                    }
                }
            }
            strip.n += n;
            strip.sum += sum;
            strip.sum_sq += sum_sq;
        }
        t += 1.0;
    }
    let centre_cov = strips[0].cov();
    0.5 * ((strips[1].cov() - centre_cov) + (strips[2].cov() - centre_cov))
}

/// Rotating Haar-like feature around the centroid of `bbox`.
pub fn haar_feature(gray: &GrayImage, bbox: &BoundingBox, cfg: &PipelineConfig) -> Result<HaarFeature> {
    if !bbox.is_within(gray.width(), gray.height()) {
        return Err(Error::validation("bbox", format!("{bbox:?} is not inside the frame")));
    }
    if bbox.w >= gray.width() && bbox.h >= gray.height() {
        return Err(Error::validation("bbox", "box covers the whole frame"));
    }
    let centre = bbox.centre();
    // centre() is on pixel edges; sampling works in pixel-centre coordinates
    let centre = (centre.0 - 0.5, centre.1 - 0.5);
    let width = strip_width(bbox, cfg);
    let bins = cfg.haar_bins();
    let per_bin = cfg.haar_bin_deg / cfg.haar_step_deg;
    let mut out = vec![0.0; bins];
    for (k, slot) in out.iter_mut().enumerate() {
        for j in 0..per_bin {
            let deg = (k as u32 * cfg.haar_bin_deg + j * cfg.haar_step_deg) as f64;
            *slot += strip_score(gray, centre, width, deg);
        }
    }
    HaarFeature::new(out, cfg.haar_bin_deg)
}

/// Laterality from the quadrant with the largest summed score. Ties resolve
/// in the order Left, Right, Other.
pub fn laterality(feature: &HaarFeature) -> Laterality {
    let (top, bottom_right, bottom_left) = feature.quadrant_sums();
    if bottom_left >= bottom_right && bottom_left >= top {
        Laterality::Left
    } else if bottom_right >= top {
        Laterality::Right
    } else {
        Laterality::Other
    }
}

/// Binary hand / not-hand classifier over Haar features.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifierModel {
    pub forest: ForestModel,
}

impl VerifierModel {
    /// Trains on Haar features of true hand boxes and of non-hand boxes.
    pub fn train(
        hands: &[HaarFeature],
        non_hands: &[HaarFeature],
        cfg: &PipelineConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut set = TrainingSet::default();
        for (i, f) in hands.iter().enumerate() {
            set.push(f.bins().to_vec(), true, ("hand".into(), i, 0));
        }
        for (i, f) in non_hands.iter().enumerate() {
            set.push(f.bins().to_vec(), false, ("non-hand".into(), i, 0));
        }
        Ok(Self {
            forest: ForestModel::fit(&set, cfg, seed)?,
        })
    }
}

/// True when the majority of trees vote "hand".
pub fn verify(feature: &HaarFeature, model: &VerifierModel) -> Result<bool> {
    Ok(model.forest.predict(feature.bins())?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_frame_all_zero() {
        let g = GrayImage::filled(60, 50, 0.5);
        let f = haar_feature(&g, &BoundingBox::new(20, 20, 16, 12), &PipelineConfig::default()).unwrap();
        assert_eq!(f.bins().len(), 72);
        assert!(f.bins().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(HaarFeature::new(vec![0.0; 71], 5).is_err());
    }

    #[test]
    fn box_outside_frame_rejected() {
        let g = GrayImage::filled(30, 30, 0.5);
        let cfg = PipelineConfig::default();
        assert!(haar_feature(&g, &BoundingBox::new(20, 20, 16, 12), &cfg).is_err());
        assert!(haar_feature(&g, &BoundingBox::new(0, 0, 30, 30), &cfg).is_err());
    }

    #[test]
    fn quadrant_tie_break() {
        let f = HaarFeature::new(vec![0.0; 72], 5).unwrap();
        assert_eq!(laterality(&f), Laterality::Left);
        let mut bins = vec![0.0; 72];
        bins[40] = 1.0;
        bins[60] = 1.0;
        assert_eq!(laterality(&HaarFeature::new(bins, 5).unwrap()), Laterality::Left);
        let mut bins = vec![0.0; 72];
        bins[40] = 1.0;
        bins[10] = 1.0;
        assert_eq!(laterality(&HaarFeature::new(bins, 5).unwrap()), Laterality::Right);
        let mut bins = vec![0.0; 72];
        bins[10] = 1.0;
        assert_eq!(laterality(&HaarFeature::new(bins, 5).unwrap()), Laterality::Other);
    }

    #[test]
    fn cov_scale_invariant_per_strip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = GrayImage::from_fn(50, 40, |_, _| 0.1 + 0.4 * rng.gen::<f64>());
        let g2 = g.map(|v| v * 1.7);
        for deg in [0.0, 33.0, 190.0, 300.0] {
            let a = strip_score(&g, (20.0, 20.0), 8, deg);
            let b = strip_score(&g2, (20.0, 20.0), 8, deg);
            assert!((a - b).abs() < 1e-9);
        }
    }
}
