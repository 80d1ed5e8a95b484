//! Interaction classification with a random forest.

mod forest;

pub use forest::{DecisionTree, ForestModel, Node, SampleKey, TrainingSet};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::types::Laterality;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NoInteraction,
    Interaction,
}

impl Label {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Label::Interaction
        } else {
            Label::NoInteraction
        }
    }

    pub fn is_interaction(self) -> bool {
        self == Label::Interaction
    }
}

/// One labelled feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledSample {
    pub feature: Vec<f64>,
    pub label: Label,
    pub subject_id: String,
    pub frame_index: usize,
    pub laterality: Laterality,
}

impl LabelledSample {
    /// (subject, frame, laterality): the canonical sort key.
    pub fn key(&self) -> SampleKey {
        let slot = match self.laterality {
            Laterality::Left => 0,
            Laterality::Right => 1,
            Laterality::Other => 2,
        };
        (self.subject_id.clone(), self.frame_index, slot)
    }
}

/// Trains the interaction forest. Bootstrap draws index the samples sorted by
/// (subject, frame, laterality), so the model does not depend on input order.
pub fn forest_fit(samples: &[LabelledSample], cfg: &PipelineConfig, seed: u64) -> Result<ForestModel> {
    for (label, name) in [(Label::Interaction, "interaction"), (Label::NoInteraction, "no_interaction")] {
        if !samples.iter().any(|s| s.label == label) {
            return Err(Error::InsufficientData(format!("training set has no `{name}` samples")));
        }
    }
    let mut set = TrainingSet::default();
    for s in samples {
        set.push(s.feature.clone(), s.label.is_interaction(), s.key());
    }
    ForestModel::fit(&set, cfg, seed)
}

/// Majority label and the fraction of trees voting for interaction. An exact
/// tie is [`Label::NoInteraction`].
pub fn forest_predict(model: &ForestModel, feature: &[f64]) -> Result<(Label, f64)> {
    let (positive, frac) = model.predict(feature)?;
    Ok((Label::from_bool(positive), frac))
}

/// A cue family of the interaction feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Full,
    Flow,
    Hog,
    Colour,
}

impl FeatureFamily {
    pub const SINGLE: [FeatureFamily; 3] = [FeatureFamily::Flow, FeatureFamily::Hog, FeatureFamily::Colour];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Full => "full",
            FeatureFamily::Flow => "flow",
            FeatureFamily::Hog => "hog",
            FeatureFamily::Colour => "colour",
        }
    }

    /// Index range of this family inside a full feature vector.
    pub fn range(self, cfg: &PipelineConfig) -> std::ops::Range<usize> {
        let flow = 4 * cfg.flow_bins;
        let hog = flow + cfg.pca_dim;
        match self {
            FeatureFamily::Full => 0..hog + 2,
            FeatureFamily::Flow => 0..flow,
            FeatureFamily::Hog => flow..hog,
            FeatureFamily::Colour => hog..hog + 2,
        }
    }

    /// The family's slice of a full feature vector.
    pub fn view<'a>(self, feature: &'a [f64], cfg: &PipelineConfig) -> Result<&'a [f64]> {
        let full = cfg.interaction_dim();
        if feature.len() != full {
            return Err(Error::dims(full, feature.len()));
        }
        Ok(&feature[self.range(cfg)])
    }
}

impl std::fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FeatureFamily::Full),
            "flow" => Ok(FeatureFamily::Flow),
            "hog" => Ok(FeatureFamily::Hog),
            "colour" | "color" => Ok(FeatureFamily::Colour),
            _ => Err(Error::validation("family", format!("unknown feature family `{s}`"))),
        }
    }
}

/// Flow, HOG and colour views of a full interaction feature.
pub fn feature_ablation_views<'a>(feature: &'a [f64], cfg: &PipelineConfig) -> Result<(&'a [f64], &'a [f64], &'a [f64])> {
    Ok((
        FeatureFamily::Flow.view(feature, cfg)?,
        FeatureFamily::Hog.view(feature, cfg)?,
        FeatureFamily::Colour.view(feature, cfg)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sample(feature: Vec<f64>, label: Label, frame: usize) -> LabelledSample {
        LabelledSample {
            feature,
            label,
            subject_id: "s".into(),
            frame_index: frame,
            laterality: Laterality::Left,
        }
    }

    // Two isotropic Gaussians, sigma 0.1, centres 2 apart along the diagonal.
    fn two_gaussians(n: usize, seed: u64, dim: usize) -> Vec<LabelledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let offset = 1.0 / (dim as f64).sqrt();
        (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let c = if positive { offset } else { -offset };
                let feature = (0..dim).map(|_| c + noise.sample(&mut rng)).collect();
                sample(feature, Label::from_bool(positive), i)
            })
            .collect()
    }

    fn f1(pred: &[bool], truth: &[bool]) -> f64 {
        let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count() as f64;
        let fp = pred.iter().zip(truth).filter(|(p, t)| **p && !**t).count() as f64;
        let fneg = pred.iter().zip(truth).filter(|(p, t)| !**p && **t).count() as f64;
        2.0 * tp / (2.0 * tp + fp + fneg)
    }

    #[test]
    fn separable_gaussians() {
        let cfg = PipelineConfig::default();
        let train = two_gaussians(1000, 1, 122);
        let test = two_gaussians(500, 2, 122);
        let model = forest_fit(&train, &cfg, 7).unwrap();
        assert_eq!(model.trees().len(), 150);
        let pred: Vec<bool> = test
            .iter()
            .map(|s| forest_predict(&model, &s.feature).unwrap().0.is_interaction())
            .collect();
        let truth: Vec<bool> = test.iter().map(|s| s.label.is_interaction()).collect();
        assert!(f1(&pred, &truth) >= 0.95);
        let again = forest_fit(&train, &cfg, 7).unwrap();
        assert_eq!(model.to_bytes(), again.to_bytes());
    }

    #[test]
    fn memorizes_repeated_points() {
        let cfg = PipelineConfig { forest_trees: 15, ..PipelineConfig::default() };
        let mut set = Vec::new();
        for i in 0..10 {
            set.push(sample(vec![0.0, 1.0, 2.0], Label::Interaction, i));
            set.push(sample(vec![3.0, 1.0, 0.0], Label::NoInteraction, 100 + i));
        }
        let m = forest_fit(&set, &cfg, 0).unwrap();
        for s in &set {
            let (label, frac) = forest_predict(&m, &s.feature).unwrap();
            assert_eq!(label, s.label);
            assert!(frac == 0.0 || frac == 1.0);
        }
    }

    #[test]
    fn symmetric_midpoint_is_uncertain() {
        let cfg = PipelineConfig::default();
        let train = two_gaussians(400, 3, 8);
        let m = forest_fit(&train, &cfg, 1).unwrap();
        let (_, frac) = forest_predict(&m, &[0.0; 8]).unwrap();
        assert!((0.3..=0.7).contains(&frac), "{frac}");
    }

    #[test]
    fn single_class_error_names_missing_label() {
        let set = vec![sample(vec![0.0], Label::Interaction, 0), sample(vec![1.0], Label::Interaction, 1)];
        let err = forest_fit(&set, &PipelineConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("no_interaction"), "{err}");
    }

    #[test]
    fn wrong_length_rejected() {
        let set = two_gaussians(20, 4, 5);
        let cfg = PipelineConfig { forest_trees: 5, ..PipelineConfig::default() };
        let m = forest_fit(&set, &cfg, 0).unwrap();
        assert!(forest_predict(&m, &[0.0; 4]).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let cfg = PipelineConfig { forest_trees: 20, ..PipelineConfig::default() };
        let set = two_gaussians(120, 5, 10);
        let mut shuffled = set.clone();
        shuffled.reverse();
        shuffled.swap(3, 70);
        let a = forest_fit(&set, &cfg, 11).unwrap();
        let b = forest_fit(&shuffled, &cfg, 11).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn constant_features_never_change_predictions() {
        let cfg = PipelineConfig { forest_trees: 25, ..PipelineConfig::default() };
        let set = two_gaussians(200, 6, 6);
        let padded: Vec<LabelledSample> = set
            .iter()
            .map(|s| {
                let mut f = s.feature.clone();
                f.extend([4.0, -1.0, 0.0]);
                LabelledSample { feature: f, ..s.clone() }
            })
            .collect();
        let a = forest_fit(&set, &cfg, 2).unwrap();
        let b = forest_fit(&padded, &cfg, 2).unwrap();
        for tree in b.trees() {
            for node in tree.nodes() {
                assert!(node.feature.is_none_or(|f| f < 6));
            }
        }
        for (s, p) in set.iter().zip(&padded) {
            assert_eq!(
                forest_predict(&a, &s.feature).unwrap().0,
                forest_predict(&b, &p.feature).unwrap().0
            );
        }
    }

    #[test]
    fn ablation_views_slice_in_order() {
        let cfg = PipelineConfig::default();
        let v: Vec<f64> = (0..122).map(f64::from).collect();
        let (flow, hog, colour) = feature_ablation_views(&v, &cfg).unwrap();
        assert_eq!(flow, &v[0..60]);
        assert_eq!(hog, &v[60..120]);
        assert_eq!(colour, &v[120..122]);
        assert!(feature_ablation_views(&v[..121], &cfg).is_err());
    }
}
