//! Classical hand-box proposer for sequences without detector output.

use crate::config::PipelineConfig;
use crate::imaging::{label_components, morph_close, probability_map, threshold_relative, SkinModel};
use crate::ingest::DetectionRecord;
use crate::types::{BoundingBox, FrameImage};

/// Skin blobs as candidate boxes.
///
/// The frame is back-projected through `skin`, thresholded at
/// `propose_threshold` of the maximum and closed. Every 8-connected component
/// covering at least `propose_min_area_frac` of the frame yields its bounding
/// box, padded by `propose_pad_frac` of its size on each side and clipped.
/// The confidence is the mean skin probability over the component.
pub fn propose_boxes(frame: &FrameImage, skin: &SkinModel, cfg: &PipelineConfig) -> Vec<DetectionRecord> {
    let (w, h) = (frame.width(), frame.height());
    let probs = probability_map(frame, &frame.bounds(), skin);
    let mask = threshold_relative(&probs, w, h, cfg.propose_threshold);
    let mask = morph_close(&mask, cfg.morph_radius, cfg.morph_iterations);
    let (_, comps) = label_components(&mask);
    let min_area = cfg.propose_min_area_frac * (w * h) as f64;
    comps
        .iter()
        .filter(|c| c.len() as f64 >= min_area)
        .map(|c| {
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            let mut sum = 0.0;
            for &(x, y) in c {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
                sum += probs[y * w + x];
            }
            let px = (cfg.propose_pad_frac * (x1 - x0) as f64).round() as usize;
            let py = (cfg.propose_pad_frac * (y1 - y0) as f64).round() as usize;
            let (x0, y0) = (x0.saturating_sub(px), y0.saturating_sub(py));
            let (x1, y1) = ((x1 + px).min(w), (y1 + py).min(h));
            let b = BoundingBox::new(x0, y0, x1 - x0, y1 - y0);
            DetectionRecord::from_box(frame.index, &b, sum / c.len() as f64)
        })
        .collect()
}
