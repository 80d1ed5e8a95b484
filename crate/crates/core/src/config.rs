//! Pipeline configuration.
//!
//! Every numeric constant used by the pipeline lives here. The config file is
//! a UTF-8 JSON object whose keys are the field names of [`PipelineConfig`];
//! missing keys take their defaults and unknown keys are rejected.
//!
//! Window lengths are stored in frames. At the default 30 fps,
//! `prolong_frames = 90` is 3 s and `smooth_frames = 120` is 4 s.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fps: f64,

    // segmentation
    pub skin_threshold: f64,
    pub edge_threshold: f64,
    pub contour_area_min_frac: f64,
    pub contour_area_max_frac: f64,
    pub contour_arc_min_frac: f64,
    pub contour_arc_max_frac: f64,
    pub morph_radius: usize,
    pub morph_iterations: usize,
    pub fill_dilation_radius: usize,

    // hand identification
    pub haar_step_deg: u32,
    pub haar_bin_deg: u32,
    pub haar_min_strip_px: usize,

    // interaction features
    pub flow_bins: usize,
    pub flow_mag_cap_frac: f64,
    pub flow_levels: usize,
    pub flow_block: usize,
    pub flow_search: usize,
    pub hog_raw_dim: usize,
    pub pca_dim: usize,
    pub colour_bins_h: usize,
    pub colour_bins_s: usize,

    // classifier
    pub forest_trees: usize,
    pub tree_min_samples_split: usize,
    /// `None` grows trees until leaves are pure.
    pub tree_max_depth: Option<usize>,
    /// `None` uses floor(sqrt(feature_dim)) candidate features per node.
    pub tree_max_features: Option<usize>,

    // timelines
    pub prolong_frames: usize,
    pub smooth_frames: usize,
    pub binarize_threshold: f64,

    // skin-blob box proposer
    pub propose_threshold: f64,
    pub propose_min_area_frac: f64,
    pub propose_pad_frac: f64,

    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fps: 30.0,
            skin_threshold: 0.75,
            edge_threshold: 0.05,
            contour_area_min_frac: 0.02,
            contour_area_max_frac: 0.75,
            contour_arc_min_frac: 0.90,
            contour_arc_max_frac: 1.10,
            morph_radius: 1,
            morph_iterations: 2,
            fill_dilation_radius: 2,
            haar_step_deg: 1,
            haar_bin_deg: 5,
            haar_min_strip_px: 8,
            flow_bins: 15,
            flow_mag_cap_frac: 0.05,
            flow_levels: 3,
            flow_block: 8,
            flow_search: 4,
            hog_raw_dim: crate::features::hog::HOG_DIM,
            pca_dim: 60,
            colour_bins_h: 16,
            colour_bins_s: 16,
            forest_trees: 150,
            tree_min_samples_split: 2,
            tree_max_depth: None,
            tree_max_features: None,
            prolong_frames: 90,
            smooth_frames: 120,
            binarize_threshold: 0.5,
            propose_threshold: 0.5,
            propose_min_area_frac: 0.005,
            propose_pad_frac: 0.08,
            rng_seed: 0,
        }
    }
}

fn unit_interval(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("{v} is not in (0, 1]")))
    }
}

fn positive(field: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::validation(field, "must be greater than zero"))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", "must be a positive number"));
        }
        unit_interval("skin_threshold", self.skin_threshold)?;
        unit_interval("edge_threshold", self.edge_threshold)?;
        unit_interval("contour_area_min_frac", self.contour_area_min_frac)?;
        unit_interval("contour_area_max_frac", self.contour_area_max_frac)?;
        unit_interval("binarize_threshold", self.binarize_threshold)?;
        unit_interval("propose_threshold", self.propose_threshold)?;
        unit_interval("propose_min_area_frac", self.propose_min_area_frac)?;
        unit_interval("flow_mag_cap_frac", self.flow_mag_cap_frac)?;
        if self.contour_area_min_frac >= self.contour_area_max_frac {
            return Err(Error::validation(
                "contour_area_min_frac",
                "must be below contour_area_max_frac",
            ));
        }
        if !(self.contour_arc_min_frac > 0.0 && self.contour_arc_min_frac < self.contour_arc_max_frac) {
            return Err(Error::validation(
                "contour_arc_min_frac",
                "must be positive and below contour_arc_max_frac",
            ));
        }
        if !(self.propose_pad_frac >= 0.0 && self.propose_pad_frac < 1.0) {
            return Err(Error::validation("propose_pad_frac", "must be in [0, 1)"));
        }
        positive("morph_radius", self.morph_radius)?;
        positive("haar_step_deg", self.haar_step_deg as usize)?;
        positive("haar_bin_deg", self.haar_bin_deg as usize)?;
        if 360 % self.haar_bin_deg != 0 {
            return Err(Error::validation("haar_bin_deg", "must divide 360"));
        }
        if self.haar_bin_deg % self.haar_step_deg != 0 {
            return Err(Error::validation("haar_step_deg", "must divide haar_bin_deg"));
        }
        if 90 % self.haar_bin_deg != 0 {
            return Err(Error::validation(
                "haar_bin_deg",
                "must divide 90 so that quadrant boundaries fall on bin edges",
            ));
        }
        positive("haar_min_strip_px", self.haar_min_strip_px)?;
        positive("flow_bins", self.flow_bins)?;
        positive("flow_levels", self.flow_levels)?;
        positive("flow_block", self.flow_block)?;
        if self.hog_raw_dim != crate::features::hog::HOG_DIM {
            return Err(Error::validation(
                "hog_raw_dim",
                format!("only {} is supported by the HOG geometry", crate::features::hog::HOG_DIM),
            ));
        }
        positive("pca_dim", self.pca_dim)?;
        if self.pca_dim > self.hog_raw_dim {
            return Err(Error::validation("pca_dim", "cannot exceed hog_raw_dim"));
        }
        positive("colour_bins_h", self.colour_bins_h)?;
        positive("colour_bins_s", self.colour_bins_s)?;
        positive("forest_trees", self.forest_trees)?;
        if self.tree_min_samples_split < 2 {
            return Err(Error::validation("tree_min_samples_split", "must be at least 2"));
        }
        if let Some(m) = self.tree_max_features {
            positive("tree_max_features", m)?;
        }
        positive("smooth_frames", self.smooth_frames)?;
        Ok(())
    }

    /// Parses a JSON config string, filling unspecified fields with defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        // an empty file means "all defaults"
        let cfg: PipelineConfig = if text.trim().is_empty() {
            PipelineConfig::default()
        } else {
            serde_json::from_str(text).map_err(|e| Error::ConfigParse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Length of the interaction feature vector for this configuration.
    pub fn interaction_dim(&self) -> usize {
        4 * self.flow_bins + self.pca_dim + 2
    }

    /// Number of bins in the rotating Haar-like feature.
    pub fn haar_bins(&self) -> usize {
        (360 / self.haar_bin_deg) as usize
    }
}

/// Loads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)?;
    PipelineConfig::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_json_str("").unwrap();
        assert_eq!(cfg.forest_trees, 150);
        assert_eq!(cfg, PipelineConfig::default());
        let cfg = PipelineConfig::from_json_str("{}").unwrap();
        assert_eq!(cfg.prolong_frames, 90);
        assert_eq!(cfg.smooth_frames, 120);
    }

    #[test]
    fn zero_smoothing_window_rejected() {
        let err = PipelineConfig::from_json_str(r#"{"smooth_frames": 0}"#).unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "smooth_frames"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn explicit_field_is_kept() {
        let cfg = PipelineConfig::from_json_str(r#"{"skin_threshold": 0.75}"#).unwrap();
        assert_eq!(cfg.skin_threshold, 0.75);
        let cfg = PipelineConfig::from_json_str(r#"{"skin_threshold": 0.6, "rng_seed": 9}"#).unwrap();
        assert_eq!(cfg.skin_threshold, 0.6);
        assert_eq!(cfg.rng_seed, 9);
    }

    #[test]
    fn parse_error_carries_line() {
        let err = PipelineConfig::from_json_str("{\n  \"fps\": 30,\n  oops\n}").unwrap_err();
        match err {
            Error::ConfigParse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn out_of_range_values_name_the_field() {
        for (json, field) in [
            (r#"{"skin_threshold": 0.0}"#, "skin_threshold"),
            (r#"{"edge_threshold": 1.5}"#, "edge_threshold"),
            (r#"{"haar_bin_deg": 7}"#, "haar_bin_deg"),
            (r#"{"hog_raw_dim": 100}"#, "hog_raw_dim"),
            (r#"{"forest_trees": 0}"#, "forest_trees"),
        ] {
            match PipelineConfig::from_json_str(json).unwrap_err() {
                Error::Validation { field: f, .. } => assert_eq!(f, field, "{json}"),
                e => panic!("unexpected {e:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_json_str(r#"{"fsp": 30}"#).is_err());
    }

    #[test]
    fn default_dimensions() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.interaction_dim(), 122);
        assert_eq!(cfg.haar_bins(), 72);
    }
}
