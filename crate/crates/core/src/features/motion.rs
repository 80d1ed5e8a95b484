use crate::config::PipelineConfig;
use crate::features::regions::{Region, RegionTriple};
use crate::imaging::FlowField;
use crate::types::angle;

/// Normalized magnitude and direction histograms of the flow inside one region.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionHistogram {
    pub magnitude: Vec<f64>,
    pub direction: Vec<f64>,
}

impl MotionHistogram {
    fn zeros(bins: usize) -> Self {
        Self {
            magnitude: vec![0.0; bins],
            direction: vec![0.0; bins],
        }
    }

    /// `[magnitude; direction]`.
    pub fn concat(&self) -> Vec<f64> {
        self.magnitude.iter().chain(&self.direction).copied().collect()
    }
}

/// Per-region flow histograms. `valid` is false when any region is empty.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowHistograms {
    pub hand: MotionHistogram,
    pub neighbourhood: MotionHistogram,
    pub background: MotionHistogram,
    pub valid: bool,
}

impl FlowHistograms {
    /// `hand − neighbourhood` followed by `background − neighbourhood`, each as
    /// `[magnitude; direction]`.
    pub fn difference(&self) -> Vec<f64> {
        let nb = self.neighbourhood.concat();
        let hand = self.hand.concat();
        let bg = self.background.concat();
        let first = hand.iter().zip(&nb).map(|(a, b)| a - b);
        let second = bg.iter().zip(&nb).map(|(a, b)| a - b);
        first.chain(second).collect()
    }
}

/// Histograms of flow magnitude and direction over the hand, neighbourhood
/// and background.
///
/// Magnitude bins are linear over `[0, flow_mag_cap_frac × diagonal]` with
/// the last bin open-ended. Direction bins split 360° evenly in the crate
/// angle convention; zero vectors have angle 0. Each histogram is divided by
/// its region's pixel count.
pub fn flow_histograms(flow: &FlowField, regions: &RegionTriple, cfg: &PipelineConfig) -> FlowHistograms {
    assert_eq!(
        (flow.width(), flow.height()),
        (regions.width(), regions.height()),
        "flow and region sizes differ"
    );
    let bins = cfg.flow_bins;
    let (w, h) = (flow.width(), flow.height());
    let cap = cfg.flow_mag_cap_frac * ((w * w + h * h) as f64).sqrt();
    let mag_width = cap / bins as f64;
    let dir_width = 360.0 / bins as f64;
    let mut hists = [MotionHistogram::zeros(bins), MotionHistogram::zeros(bins), MotionHistogram::zeros(bins)];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = flow.get(x, y);
            let m = (dx * dx + dy * dy).sqrt();
            let mb = ((m / mag_width) as usize).min(bins - 1);
            let db = ((angle::of_vector(dx, dy) / dir_width) as usize).min(bins - 1);
            let hist = &mut hists[regions.region(x, y) as usize];
            hist.magnitude[mb] += 1.0;
            hist.direction[db] += 1.0;
        }
    }
    for (i, hist) in hists.iter_mut().enumerate() {
        let n = regions.count([Region::Hand, Region::Neighbourhood, Region::Background][i]);
        if n > 0 {
            let n = n as f64;
            hist.magnitude.iter_mut().chain(hist.direction.iter_mut()).for_each(|v| *v /= n);
        }
    }
    let [hand, neighbourhood, background] = hists;
    FlowHistograms {
        hand,
        neighbourhood,
        background,
        valid: regions.all_nonempty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::BinaryMask;
    use crate::types::BoundingBox;

    fn regions() -> RegionTriple {
        let bbox = BoundingBox::new(20, 10, 30, 30);
        let hand = BinaryMask::from_fn(30, 30, |x, y| (8..22).contains(&x) && (5..25).contains(&y));
        RegionTriple::new(80, 60, &bbox, &hand)
    }

    #[test]
    fn zero_flow_fills_bin_zero() {
        let h = flow_histograms(&FlowField::zeros(80, 60), &regions(), &PipelineConfig::default());
        assert!(h.valid);
        for hist in [&h.hand, &h.neighbourhood, &h.background] {
            assert_eq!(hist.magnitude.len(), 15);
            assert_eq!(hist.magnitude[0], 1.0);
            assert_eq!(hist.direction[0], 1.0);
            assert_eq!(hist.magnitude[1..].iter().sum::<f64>(), 0.0);
        }
        assert!(h.difference().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_translation_cancels_hand_minus_box() {
        let flow = FlowField::from_fn(80, 60, |_, _| (1.5, -0.5));
        let h = flow_histograms(&flow, &regions(), &PipelineConfig::default());
        let d = h.difference();
        assert_eq!(d.len(), 60);
        assert!(d[..30].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn moving_box_static_background() {
        // hand and its neighbourhood move together; the background is still
        let r = regions();
        let flow = FlowField::from_fn(80, 60, |x, y| {
            if r.region(x, y) == Region::Background { (0.0, 0.0) } else { (-2.0, 2.0) }
        });
        let h = flow_histograms(&flow, &r, &PipelineConfig::default());
        let d = h.difference();
        let l1: f64 = d[30..].iter().map(|v| v.abs()).sum();
        assert!(l1 > 0.5, "{l1}");
        assert!(d.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn bins_follow_cap_and_angle() {
        // diagonal of 80x60 is 100, so the cap is 5 px and bins are 1/3 px wide
        let cfg = PipelineConfig::default();
        let bbox = BoundingBox::new(0, 0, 2, 1);
        let hand = BinaryMask::from_bits(2, 1, vec![true, false]);
        let r = RegionTriple::new(80, 60, &bbox, &hand);
        let flow = FlowField::from_fn(80, 60, |x, y| match (x, y) {
            (0, 0) => (0.0, -0.5), // up: 90°, magnitude bin 1
            (1, 0) => (50.0, 0.0), // right: 180°, last magnitude bin
            _ => (0.0, 0.0),
        });
        let h = flow_histograms(&flow, &r, &cfg);
        assert_eq!(h.hand.magnitude[1], 1.0);
        assert_eq!(h.hand.direction[90 / 24], 1.0);
        assert_eq!(h.neighbourhood.magnitude[14], 1.0);
        assert_eq!(h.neighbourhood.direction[180 / 24], 1.0);
    }

    #[test]
    fn empty_hand_is_invalid() {
        let bbox = BoundingBox::new(20, 10, 30, 30);
        let r = RegionTriple::new(80, 60, &bbox, &BinaryMask::new(30, 30));
        let h = flow_histograms(&FlowField::zeros(80, 60), &r, &PipelineConfig::default());
        assert!(!h.valid);
        assert!(h.hand.magnitude.iter().all(|&v| v == 0.0));
    }
}
