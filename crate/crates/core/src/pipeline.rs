//! End-to-end processing: per-frame analysis, model training, inference and
//! leave-one-subject-out evaluation.
//!
//! Analysis is split in two. [`analyze_sequence`] does every model-free step
//! (Haar feature, laterality, segmentation, flow and colour histograms, raw
//! HOG) once per detection. [`decide`] then applies the verifier, PCA and
//! interaction forest. Cross-validation reuses one analysis for every fold.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::classify::{forest_fit, forest_predict, ForestModel, Label, LabelledSample};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evaluation::{frame_scores, metric_correlations, CorrelationReport, EvaluationReport, MetricPair, SubjectScore};
use crate::features::{
    assemble, colour_distances, flow_histograms, hog_raw_gray, pca_fit, pca_project, FeatureComponent, PcaModel, RegionTriple,
};
use crate::handid::{haar_feature, laterality, verify, HaarFeature, VerifierModel};
use crate::imaging::{rgb_to_hsv, to_gray, BinaryMask, BlockMatching, EdgeOperator, FlowBackend, GradientMagnitude, GrayImage, SkinModel};
use crate::ingest::{detection_boxes, label_timelines, DetectionRecord, LabelRecord};
use crate::segmentation::segment;
use crate::timeline::{assign_detections, finalize, smooth_binarize, FrameDecision, HandTimelines, UseMetrics};
use crate::types::{BoundingBox, FrameImage, Laterality};

/// Configuration plus the pluggable operators.
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub skin: SkinModel,
    pub flow: Box<dyn FlowBackend>,
    pub edges: Box<dyn EdgeOperator>,
}

impl Pipeline {
    /// Generic skin model, block-matching flow and gradient edges.
    pub fn new(cfg: PipelineConfig) -> Self {
        Self {
            flow: Box::new(BlockMatching::from_config(&cfg)),
            edges: Box::new(GradientMagnitude),
            skin: SkinModel::generic().clone(),
            cfg,
        }
    }
}

/// Model-free measurements of a segmented hand.
#[derive(Clone, Debug)]
pub struct SegmentedHand {
    pub recentred_box: BoundingBox,
    /// Hand pixels, local to `recentred_box`.
    pub mask: BinaryMask,
    pub flow: FeatureComponent,
    pub hog_raw: Option<Vec<f64>>,
    pub colour: FeatureComponent,
}

/// Everything known about one detection before any model is applied.
#[derive(Clone, Debug)]
pub struct HandCandidate {
    pub frame_index: usize,
    pub detection: DetectionRecord,
    pub bbox: BoundingBox,
    /// `None` when the box admits no Haar feature (e.g. it spans the frame).
    pub haar: Option<HaarFeature>,
    pub laterality: Laterality,
    pub segmented: Option<SegmentedHand>,
}

/// Analyses the detections of one frame. `prev` is the previous frame's
/// grayscale image; without it the flow component is invalid.
pub fn analyze_frame(
    p: &Pipeline,
    frame: &FrameImage,
    gray: &GrayImage,
    prev: Option<&GrayImage>,
    detections: &[(DetectionRecord, BoundingBox)],
) -> Result<Vec<HandCandidate>> {
    if detections.is_empty() {
        return Ok(Vec::new());
    }
    let cfg = &p.cfg;
    let flow = prev.map(|prev| p.flow.flow(prev, gray)).transpose()?;
    let hsv = rgb_to_hsv(frame);
    let mut out = Vec::with_capacity(detections.len());
    for (det, bbox) in detections {
        let haar = haar_feature(gray, bbox, cfg).ok();
        let lat = haar.as_ref().map_or(Laterality::Other, laterality);
        let segmented = segment(frame, gray, bbox, &p.skin, p.edges.as_ref(), cfg).map(|seg| {
            let regions = RegionTriple::new(frame.width(), frame.height(), &seg.recentred_box, &seg.mask);
            let flow = match &flow {
                Some(f) => FeatureComponent::from(&flow_histograms(f, &regions, cfg)),
                None => FeatureComponent::invalid(4 * cfg.flow_bins),
            };
            SegmentedHand {
                hog_raw: hog_raw_gray(gray, &seg.recentred_box),
                colour: colour_distances(&hsv, &regions, cfg).into(),
                recentred_box: seg.recentred_box,
                mask: seg.mask,
                flow,
            }
        });
        out.push(HandCandidate {
            frame_index: frame.index,
            detection: det.clone(),
            bbox: *bbox,
            haar,
            laterality: lat,
            segmented,
        });
    }
    Ok(out)
}

/// Model-free analysis of every detection in a sequence, in frame order.
/// Frames are processed in parallel on the current rayon pool.
pub fn analyze_sequence(p: &Pipeline, frames: &[FrameImage], detections: &[DetectionRecord]) -> Result<Vec<HandCandidate>> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let boxes = detection_boxes(detections, first.width(), first.height(), frames.len());
    let mut per_frame: Vec<Vec<(DetectionRecord, BoundingBox)>> = vec![Vec::new(); frames.len()];
    for (rec, b) in boxes {
        per_frame[rec.frame_index].push((rec, b));
    }
    let grays: Vec<GrayImage> = frames.par_iter().map(to_gray).collect();
    let results: Vec<Result<Vec<HandCandidate>>> = (0..frames.len())
        .into_par_iter()
        .map(|i| {
            let prev = i.checked_sub(1).map(|j| &grays[j]);
            analyze_frame(p, &frames[i], &grays[i], prev, &per_frame[i])
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// The three trained models used at inference time.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub verifier: VerifierModel,
    pub pca: PcaModel,
    pub interaction: ForestModel,
}

pub const VERIFIER_FILE: &str = "verifier.egrf";
pub const PCA_FILE: &str = "pca.egpc";
pub const INTERACTION_FILE: &str = "interaction.egrf";

impl Models {
    /// Loads the three model files from a directory; a missing file is
    /// reported before anything is read.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        for name in [VERIFIER_FILE, PCA_FILE, INTERACTION_FILE] {
            if !dir.join(name).is_file() {
                return Err(Error::MissingModel(dir.join(name)));
            }
        }
        Ok(Self {
            verifier: VerifierModel {
                forest: ForestModel::load(dir.join(VERIFIER_FILE))?,
            },
            pca: PcaModel::load(dir.join(PCA_FILE))?,
            interaction: ForestModel::load(dir.join(INTERACTION_FILE))?,
        })
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.verifier.forest.save(dir.join(VERIFIER_FILE))?;
        self.pca.save(dir.join(PCA_FILE))?;
        self.interaction.save(dir.join(INTERACTION_FILE))
    }
}

fn verified(c: &HandCandidate, verifier: &VerifierModel) -> Result<bool> {
    match &c.haar {
        Some(h) => verify(h, verifier),
        None => Ok(false),
    }
}

/// Full interaction feature of a verified, segmented candidate, or `None`
/// when a component is invalid.
pub fn candidate_feature(c: &HandCandidate, pca: &PcaModel, cfg: &PipelineConfig) -> Result<Option<Vec<f64>>> {
    let Some(seg) = &c.segmented else {
        return Ok(None);
    };
    let hog = match &seg.hog_raw {
        Some(raw) => FeatureComponent::valid(pca_project(pca, raw)?),
        None => FeatureComponent::invalid(cfg.pca_dim),
    };
    let f = assemble(&seg.flow, &hog, &seg.colour);
    Ok(f.valid.then(|| f.to_vec()))
}

/// Verifies, featurizes and classifies every candidate. Candidates that fail
/// verification or have an invalid feature produce no decision.
pub fn decide(candidates: &[HandCandidate], models: &Models, cfg: &PipelineConfig) -> Result<Vec<FrameDecision>> {
    let mut out = Vec::new();
    for c in candidates {
        if !verified(c, &models.verifier)? {
            continue;
        }
        let Some(feature) = candidate_feature(c, &models.pca, cfg)? else {
            continue;
        };
        let (label, _) = forest_predict(&models.interaction, &feature)?;
        out.push(FrameDecision {
            frame_index: c.frame_index,
            laterality: c.laterality,
            confidence: c.detection.confidence,
            interaction: label.is_interaction(),
        });
    }
    Ok(out)
}

/// Result of running the trained pipeline over one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct InferOutput {
    /// Per-frame classifier output; frames without a decision are missing.
    pub raw: HandTimelines,
    /// After prolongation, smoothing and binarization.
    pub smoothed: HandTimelines,
    pub left: UseMetrics,
    pub right: UseMetrics,
    pub other: UseMetrics,
}

impl InferOutput {
    pub fn metrics(&self, l: Laterality) -> &UseMetrics {
        match l {
            Laterality::Left => &self.left,
            Laterality::Right => &self.right,
            Laterality::Other => &self.other,
        }
    }
}

/// Assigns decisions to timelines and finalizes each hand.
pub fn timelines_from_decisions(decisions: &[FrameDecision], frame_count: usize, cfg: &PipelineConfig) -> Result<InferOutput> {
    let raw = assign_detections(decisions, frame_count, cfg.fps);
    let mut m = Vec::new();
    let smoothed = raw.map(|tl| {
        let (s, metrics) = finalize(tl, cfg)?;
        m.push(metrics);
        Ok(s)
    })?;
    Ok(InferOutput {
        raw,
        smoothed,
        left: m[0],
        right: m[1],
        other: m[2],
    })
}

/// Verify, laterality, segment, features, classify, assign, prolong, smooth
/// and metrics for a whole sequence.
pub fn run_infer(p: &Pipeline, frames: &[FrameImage], detections: &[DetectionRecord], models: &Models) -> Result<InferOutput> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("no frames".into()));
    }
    let candidates = analyze_sequence(p, frames, detections)?;
    let decisions = decide(&candidates, models, &p.cfg)?;
    timelines_from_decisions(&decisions, frames.len(), &p.cfg)
}

/// Haar features of detections marked as hands and as non-hands. Records
/// without a `hand` field are ignored.
pub fn verifier_examples(candidates: &[HandCandidate]) -> (Vec<HaarFeature>, Vec<HaarFeature>) {
    let (mut hands, mut others) = (Vec::new(), Vec::new());
    for c in candidates {
        match (&c.haar, c.detection.hand) {
            (Some(h), Some(true)) => hands.push(h.clone()),
            (Some(h), Some(false)) => others.push(h.clone()),
            _ => {}
        }
    }
    (hands, others)
}

pub fn train_verifier(candidates: &[HandCandidate], cfg: &PipelineConfig, seed: u64) -> Result<VerifierModel> {
    let (hands, others) = verifier_examples(candidates);
    if hands.is_empty() || others.is_empty() {
        return Err(Error::InsufficientData(format!(
            "verifier training needs hand and non-hand detections, got {} and {}",
            hands.len(),
            others.len()
        )));
    }
    VerifierModel::train(&hands, &others, cfg, seed)
}

/// Whether a candidate counts as a hand for training: the record's `hand`
/// field when present, the verifier's verdict otherwise.
fn training_hand(c: &HandCandidate, verifier: &VerifierModel) -> Result<bool> {
    match c.detection.hand {
        Some(h) => Ok(h && c.haar.is_some()),
        None => verified(c, verifier),
    }
}

/// Raw HOG vectors of training hands.
pub fn hog_examples(candidates: &[HandCandidate], verifier: &VerifierModel) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for c in candidates {
        if !training_hand(c, verifier)? {
            continue;
        }
        if let Some(raw) = c.segmented.as_ref().and_then(|s| s.hog_raw.clone()) {
            out.push(raw);
        }
    }
    Ok(out)
}

pub fn fit_pca(candidates: &[HandCandidate], verifier: &VerifierModel, cfg: &PipelineConfig) -> Result<PcaModel> {
    pca_fit(&hog_examples(candidates, verifier)?, cfg.pca_dim)
}

/// Labelled interaction features of one subject's training hands. The label
/// is looked up by frame and the Haar laterality; unlabelled hands are
/// skipped.
pub fn labelled_samples(
    subject: &str,
    candidates: &[HandCandidate],
    labels: &[LabelRecord],
    verifier: &VerifierModel,
    pca: &PcaModel,
    cfg: &PipelineConfig,
) -> Result<Vec<LabelledSample>> {
    let lookup: HashMap<(usize, Laterality), Label> = labels.iter().map(|l| ((l.frame_index, l.laterality), l.label)).collect();
    let mut out = Vec::new();
    for c in candidates {
        if !training_hand(c, verifier)? {
            continue;
        }
        let Some(&label) = lookup.get(&(c.frame_index, c.laterality)) else {
            continue;
        };
        if let Some(feature) = candidate_feature(c, pca, cfg)? {
            out.push(LabelledSample {
                feature,
                label,
                subject_id: subject.to_string(),
                frame_index: c.frame_index,
                laterality: c.laterality,
            });
        }
    }
    Ok(out)
}

/// One subject's analysed sequence and labels.
#[derive(Clone, Debug)]
pub struct SubjectData {
    pub id: String,
    pub frame_count: usize,
    pub candidates: Vec<HandCandidate>,
    pub labels: Vec<LabelRecord>,
}

/// Trains all three models on the given subjects.
pub fn train_models(subjects: &[&SubjectData], cfg: &PipelineConfig, seed: u64) -> Result<Models> {
    let all: Vec<HandCandidate> = subjects.iter().flat_map(|s| s.candidates.iter().cloned()).collect();
    let verifier = train_verifier(&all, cfg, seed)?;
    let pca = fit_pca(&all, &verifier, cfg)?;
    let mut samples = Vec::new();
    for s in subjects {
        samples.extend(labelled_samples(&s.id, &s.candidates, &s.labels, &verifier, &pca, cfg)?);
    }
    let interaction = forest_fit(&samples, cfg, seed)?;
    Ok(Models {
        verifier,
        pca,
        interaction,
    })
}

/// Outcome of leave-one-subject-out evaluation of the whole pipeline.
#[derive(Debug)]
pub struct LosoOutcome {
    pub report: EvaluationReport,
    pub pairs: Vec<MetricPair>,
    pub correlations: BTreeMap<String, Result<CorrelationReport>>,
}

/// The hands scored per subject.
pub const SCORED_HANDS: [Laterality; 2] = [Laterality::Left, Laterality::Right];

/// Leave-one-subject-out evaluation. For each subject, models are trained on
/// all others and run on it; the smoothed prediction is scored frame by
/// frame against the smoothed labels of the left and right hands, and the
/// metrics of both are paired for correlation.
pub fn loso_end_to_end(subjects: &[SubjectData], cfg: &PipelineConfig, seed: u64) -> Result<LosoOutcome> {
    if subjects.len() < 2 {
        return Err(Error::InsufficientData("leave-one-subject-out needs at least 2 subjects".into()));
    }
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for held in subjects {
        let train: Vec<&SubjectData> = subjects.iter().filter(|s| s.id != held.id).collect();
        let models = train_models(&train, cfg, seed)?;
        let decisions = decide(&held.candidates, &models, cfg)?;
        let predicted = timelines_from_decisions(&decisions, held.frame_count, cfg)?;
        let truth = label_timelines(&held.labels, held.frame_count, cfg.fps);
        for hand in SCORED_HANDS {
            let truth_smoothed = smooth_binarize(truth.get(hand), cfg)?;
            let scores = frame_scores(predicted.smoothed.get(hand), &truth_smoothed)?;
            rows.push(SubjectScore {
                subject: held.id.clone(),
                hand,
                f1: scores.f1,
                accuracy: scores.accuracy,
                counts: scores.counts,
            });
            pairs.push(MetricPair {
                subject: held.id.clone(),
                hand,
                predicted: *predicted.metrics(hand),
                actual: crate::timeline::metrics(&truth_smoothed)?,
            });
        }
        log::info!("fold {} done", held.id);
    }
    Ok(LosoOutcome {
        report: EvaluationReport::from_rows(rows),
        correlations: metric_correlations(&pairs),
        pairs,
    })
}

/// Frame with detector boxes (yellow for verified, grey otherwise),
/// re-centred boxes (green) and hand masks tinted red.
pub fn debug_image(frame: &FrameImage, candidates: &[HandCandidate], verifier: Option<&VerifierModel>) -> FrameImage {
    let mut out = frame.clone();
    for c in candidates.iter().filter(|c| c.frame_index == frame.index) {
        let ok = match verifier {
            Some(v) => verified(c, v).unwrap_or(false),
            None => true,
        };
        if let Some(seg) = &c.segmented {
            let b = seg.recentred_box;
            for ly in 0..b.h {
                for lx in 0..b.w {
                    if seg.mask.get(lx, ly) {
                        let [r, g, bl] = out.rgb(b.x + lx, b.y + ly);
                        out.set_rgb(b.x + lx, b.y + ly, [r / 2 + 127, g / 2, bl / 2]);
                    }
                }
            }
            outline(&mut out, &b, [0, 220, 0]);
        }
        outline(&mut out, &c.bbox, if ok { [255, 220, 0] } else { [128, 128, 128] });
    }
    out
}

fn outline(f: &mut FrameImage, b: &BoundingBox, rgb: [u8; 3]) {
    for x in b.x..b.right() {
        f.set_rgb(x, b.y, rgb);
        f.set_rgb(x, b.bottom() - 1, rgb);
    }
    for y in b.y..b.bottom() {
        f.set_rgb(b.x, y, rgb);
        f.set_rgb(b.right() - 1, y, rgb);
    }
}
