//! The per-hand interaction feature: motion, shape and colour cues.
//!
//! A frame is partitioned into the hand, the rest of the re-centred box (the
//! neighbourhood) and everything else (the background), see
//! [`RegionTriple`]. Three cue families are computed over that partition:
//!
//! - flow histograms of each region, reported as the differences
//!   hand − neighbourhood and background − neighbourhood (60 values);
//! - a HOG descriptor of the re-centred box reduced by PCA (60 values);
//! - Bhattacharyya distances between hue–saturation histograms of the
//!   neighbourhood and the other two regions (2 values).

pub mod colour;
pub mod hog;
pub mod motion;
pub mod pca;
pub mod regions;

pub use colour::{bhattacharyya, colour_distances, hs_histograms, ColourDistances};
pub use hog::{hog_raw, hog_raw_gray, HOG_DIM};
pub use motion::{flow_histograms, FlowHistograms, MotionHistogram};
pub use pca::{pca_fit, pca_project, pca_reconstruct, PcaModel};
pub use regions::{Region, RegionTriple};

/// One cue family's values with its validity flag.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureComponent {
    pub values: Vec<f64>,
    pub valid: bool,
}

impl FeatureComponent {
    pub fn valid(values: Vec<f64>) -> Self {
        Self { values, valid: true }
    }

    /// Zero placeholder of the given length.
    pub fn invalid(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            valid: false,
        }
    }
}

impl From<&FlowHistograms> for FeatureComponent {
    fn from(h: &FlowHistograms) -> Self {
        Self {
            values: h.difference(),
            valid: h.valid,
        }
    }
}

impl From<ColourDistances> for FeatureComponent {
    fn from(d: ColourDistances) -> Self {
        Self {
            values: vec![d.hand_box, d.box_background],
            valid: d.valid,
        }
    }
}

/// Interaction feature of one hand in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionFeature {
    pub flow_diff: Vec<f64>,
    pub hog_pca: Vec<f64>,
    pub colour_dist: [f64; 2],
    pub valid: bool,
}

impl InteractionFeature {
    pub fn len(&self) -> usize {
        self.flow_diff.len() + self.hog_pca.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat vector in the order flow, HOG, colour.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.flow_diff);
        v.extend_from_slice(&self.hog_pca);
        v.extend_from_slice(&self.colour_dist);
        v
    }
}

/// Concatenates the three cue families. The result is invalid if any part is
/// invalid or the colour part does not have exactly two values.
pub fn assemble(flow_diff: &FeatureComponent, hog_pca: &FeatureComponent, colour: &FeatureComponent) -> InteractionFeature {
    let colour_ok = colour.values.len() == 2;
    let colour_dist = if colour_ok {
        [colour.values[0], colour.values[1]]
    } else {
        [1.0, 1.0]
    };
    InteractionFeature {
        flow_diff: flow_diff.values.clone(),
        hog_pca: hog_pca.values.clone(),
        colour_dist,
        valid: flow_diff.valid && hog_pca.valid && colour.valid && colour_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_components_give_zero_valid_feature() {
        let f = assemble(
            &FeatureComponent::valid(vec![0.0; 60]),
            &FeatureComponent::valid(vec![0.0; 60]),
            &FeatureComponent::valid(vec![0.0; 2]),
        );
        assert!(f.valid);
        assert_eq!(f.len(), 122);
        assert!(f.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_parts_propagate() {
        let ok = FeatureComponent::valid(vec![0.0; 60]);
        let colour = FeatureComponent::valid(vec![0.1, 0.2]);
        assert!(!assemble(&FeatureComponent::invalid(60), &ok, &colour).valid);
        assert!(!assemble(&ok, &FeatureComponent::invalid(60), &colour).valid);
        assert!(!assemble(&ok, &ok, &FeatureComponent::invalid(2)).valid);
    }

    #[test]
    fn order_is_flow_hog_colour() {
        let flow = FeatureComponent::valid((0..60).map(f64::from).collect());
        let hog = FeatureComponent::valid((60..120).map(f64::from).collect());
        let colour = FeatureComponent::valid(vec![120.0, 121.0]);
        let v = assemble(&flow, &hog, &colour).to_vec();
        assert_eq!(v, (0..122).map(f64::from).collect::<Vec<_>>());
    }
}
