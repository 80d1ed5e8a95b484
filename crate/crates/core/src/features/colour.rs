use crate::config::PipelineConfig;
use crate::features::regions::{Region, RegionTriple};
use crate::imaging::Hsv;

/// Bhattacharyya distances between region colour histograms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColourDistances {
    /// Neighbourhood versus hand.
    pub hand_box: f64,
    /// Neighbourhood versus background.
    pub box_background: f64,
    pub valid: bool,
}

/// `sqrt(max(0, 1 − Σ sqrt(p q)))` for two L1-normalized histograms.
pub fn bhattacharyya(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "histogram lengths differ");
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    (1.0 - bc).max(0.0).sqrt()
}

/// Hue–saturation histograms (value ignored) of the three regions, each
/// normalized to sum to 1. An empty region yields an all-zero histogram.
pub fn hs_histograms(hsv: &[Hsv], regions: &RegionTriple, cfg: &PipelineConfig) -> [Vec<f64>; 3] {
    assert_eq!(hsv.len(), regions.labels().len(), "HSV buffer size");
    let (hb, sb) = (cfg.colour_bins_h, cfg.colour_bins_s);
    let mut hists = [vec![0.0; hb * sb], vec![0.0; hb * sb], vec![0.0; hb * sb]];
    for (px, region) in hsv.iter().zip(regions.labels()) {
        let hi = ((px.h / 360.0 * hb as f64) as usize).min(hb - 1);
        let si = ((px.s * sb as f64) as usize).min(sb - 1);
        hists[*region as usize][hi * sb + si] += 1.0;
    }
    for (hist, r) in hists.iter_mut().zip([Region::Hand, Region::Neighbourhood, Region::Background]) {
        let n = regions.count(r);
        if n > 0 {
            hist.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    hists
}

/// Distances between the neighbourhood and the hand, and between the
/// neighbourhood and the background. Any empty region makes both distances
/// 1 and the result invalid.
pub fn colour_distances(hsv: &[Hsv], regions: &RegionTriple, cfg: &PipelineConfig) -> ColourDistances {
    if !regions.all_nonempty() {
        return ColourDistances {
            hand_box: 1.0,
            box_background: 1.0,
            valid: false,
        };
    }
    let [hand, nb, bg] = hs_histograms(hsv, regions, cfg);
    ColourDistances {
        hand_box: bhattacharyya(&nb, &hand),
        box_background: bhattacharyya(&nb, &bg),
        valid: true,
    }
}
