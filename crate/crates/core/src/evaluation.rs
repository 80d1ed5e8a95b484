//! Frame-level scores, leave-one-subject-out splits, correlation statistics
//! and feature-family ablation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::classify::{forest_fit, forest_predict, FeatureFamily, LabelledSample};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::timeline::{Timeline, UseMetrics};
use crate::types::Laterality;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_pairs(pred: &[bool], truth: &[bool]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::dims(truth.len(), pred.len()));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &t) in pred.iter().zip(truth) {
            c.add(p, t);
        }
        Ok(c)
    }

    pub fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub f1: f64,
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

impl From<ConfusionCounts> for FrameScores {
    fn from(counts: ConfusionCounts) -> Self {
        Self {
            f1: counts.f1(),
            accuracy: counts.accuracy(),
            counts,
        }
    }
}

/// F1 and accuracy of a binary prediction timeline against the truth.
pub fn frame_scores(pred: &Timeline, truth: &Timeline) -> Result<FrameScores> {
    if pred.len() != truth.len() {
        return Err(Error::dims(truth.len(), pred.len()));
    }
    let counts = ConfusionCounts::from_pairs(&pred.to_bools()?, &truth.to_bools()?)?;
    Ok(counts.into())
}

/// Splits off every sample of `held_out`. `subjects` is the study roster; a
/// rostered subject without samples gives an empty test set and a warning.
pub fn loso_split(
    samples: &[LabelledSample],
    subjects: &[String],
    held_out: &str,
) -> Result<(Vec<LabelledSample>, Vec<LabelledSample>)> {
    if subjects.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    if !subjects.iter().any(|s| s == held_out) {
        return Err(Error::validation("subject", format!("unknown subject `{held_out}`")));
    }
    let (test, train): (Vec<_>, Vec<_>) = samples.iter().cloned().partition(|s| s.subject_id == held_out);
    if test.is_empty() {
        log::warn!("subject `{held_out}` has no samples; its test set is empty");
    }
    Ok((train, test))
}

/// Distinct subject ids in sorted order.
pub fn subjects_of(samples: &[LabelledSample]) -> Vec<String> {
    let mut s: Vec<String> = samples.iter().map(|s| s.subject_id.clone()).collect();
    s.sort();
    s.dedup();
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub pearson_p_one_tailed: f64,
    pub spearman_rho: f64,
    pub spearman_p_one_tailed: f64,
    pub n: usize,
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given the mean of the ranks they span.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Right-tailed p-value for correlation `r` over `n` pairs, from
/// `t = r sqrt((n − 2) / (1 − r²))` on `n − 2` degrees of freedom.
pub fn one_tailed_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r >= 1.0 {
        return 0.0;
    }
    if r <= -1.0 {
        return 1.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    // P(T > |t|) = I_{df / (df + t²)}(df/2, 1/2) / 2
    let tail = 0.5 * beta_reg(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Pearson and Spearman correlations with one-tailed (right) p-values.
pub fn correlations(predicted: &[f64], actual: &[f64]) -> Result<CorrelationReport> {
    if predicted.len() != actual.len() {
        return Err(Error::dims(actual.len(), predicted.len()));
    }
    let n = predicted.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("correlation needs at least 3 pairs, got {n}")));
    }
    let r = pearson(predicted, actual)?;
    let rho = pearson(&mid_ranks(predicted), &mid_ranks(actual))?;
    Ok(CorrelationReport {
        pearson_r: r,
        pearson_p_one_tailed: one_tailed_p(r, n),
        spearman_rho: rho,
        spearman_p_one_tailed: one_tailed_p(rho, n),
        n,
    })
}

/// Scores for one subject's hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject: String,
    pub hand: Laterality,
    pub f1: f64,
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

/// Per-subject, per-hand scores for one feature family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub family: FeatureFamily,
    pub feature_dim: usize,
    pub rows: Vec<SubjectScore>,
}

impl AblationTable {
    /// Mean F1 and accuracy over the rows of one hand.
    pub fn mean(&self, hand: Laterality) -> Option<(f64, f64)> {
        let rows: Vec<_> = self.rows.iter().filter(|r| r.hand == hand).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((
            rows.iter().map(|r| r.f1).sum::<f64>() / n,
            rows.iter().map(|r| r.accuracy).sum::<f64>() / n,
        ))
    }

    /// Mean F1 and accuracy over all rows.
    pub fn overall(&self) -> (f64, f64) {
        let n = self.rows.len().max(1) as f64;
        (
            self.rows.iter().map(|r| r.f1).sum::<f64>() / n,
            self.rows.iter().map(|r| r.accuracy).sum::<f64>() / n,
        )
    }
}

/// Leave-one-subject-out evaluation on one feature family's sub-vector.
/// Scores are per sample, grouped by subject and hand.
pub fn ablation_run(
    dataset: &[LabelledSample],
    family: FeatureFamily,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<AblationTable> {
    let sliced = dataset
        .iter()
        .map(|s| {
            Ok(LabelledSample {
                feature: family.view(&s.feature, cfg)?.to_vec(),
                ..s.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let subjects = subjects_of(&sliced);
    let mut counts: BTreeMap<(String, Laterality), ConfusionCounts> = BTreeMap::new();
    let mut feature_dim = family.range(cfg).len();
    for subject in &subjects {
        let (train, test) = loso_split(&sliced, &subjects, subject)?;
        let model = forest_fit(&train, cfg, seed)?;
        feature_dim = model.feature_dim();
        for s in &test {
            let (label, _) = forest_predict(&model, &s.feature)?;
            counts
                .entry((s.subject_id.clone(), s.laterality))
                .or_default()
                .add(label.is_interaction(), s.label.is_interaction());
        }
    }
    let rows = counts
        .into_iter()
        .map(|((subject, hand), c)| SubjectScore {
            subject,
            hand,
            f1: c.f1(),
            accuracy: c.accuracy(),
            counts: c,
        })
        .collect();
    Ok(AblationTable {
        family,
        feature_dim,
        rows,
    })
}

/// Evaluation report: per-subject, per-hand scores plus per-hand means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<SubjectScore>,
    pub mean_f1: BTreeMap<Laterality, f64>,
    pub mean_accuracy: BTreeMap<Laterality, f64>,
}

impl EvaluationReport {
    pub fn from_rows(rows: Vec<SubjectScore>) -> Self {
        let mut f1: BTreeMap<Laterality, Vec<f64>> = BTreeMap::new();
        let mut acc: BTreeMap<Laterality, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            f1.entry(r.hand).or_default().push(r.f1);
            acc.entry(r.hand).or_default().push(r.accuracy);
        }
        let mean = |m: BTreeMap<Laterality, Vec<f64>>| {
            m.into_iter()
                .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
                .collect()
        };
        Self {
            rows,
            mean_f1: mean(f1),
            mean_accuracy: mean(acc),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Predicted and actual metrics for one subject's hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub subject: String,
    pub hand: Laterality,
    pub predicted: UseMetrics,
    pub actual: UseMetrics,
}

/// Scatter data: one row per subject, hand and metric.
pub fn write_scatter_csv(pairs: &[MetricPair], mut w: impl Write) -> Result<()> {
    writeln!(w, "subject,hand,metric,predicted,actual")?;
    for p in pairs {
        let rows = [
            ("interaction_fraction", p.predicted.interaction_fraction, p.actual.interaction_fraction),
            ("mean_duration_s", p.predicted.mean_duration_s, p.actual.mean_duration_s),
            ("interactions_per_hour", p.predicted.interactions_per_hour, p.actual.interactions_per_hour),
        ];
        for (name, a, b) in rows {
            writeln!(w, "{},{},{name},{a},{b}", p.subject, p.hand)?;
        }
    }
    Ok(())
}

/// Correlations between predicted and actual values of each metric across
/// all subject-hands. Metrics whose correlation is undefined are omitted.
pub fn metric_correlations(pairs: &[MetricPair]) -> BTreeMap<String, Result<CorrelationReport>> {
    let pick: [(&str, fn(&UseMetrics) -> f64); 3] = [
        ("interaction_fraction", |m| m.interaction_fraction),
        ("mean_duration_s", |m| m.mean_duration_s),
        ("interactions_per_hour", |m| m.interactions_per_hour),
    ];
    pick.iter()
        .map(|(name, f)| {
            let p: Vec<f64> = pairs.iter().map(|x| f(&x.predicted)).collect();
            let a: Vec<f64> = pairs.iter().map(|x| f(&x.actual)).collect();
            (name.to_string(), correlations(&p, &a))
        })
        .collect()
}
