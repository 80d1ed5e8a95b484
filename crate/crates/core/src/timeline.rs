//! Per-hand interaction timelines and hand-use metrics.
//!
//! Frame decisions are gathered into one timeline per laterality. Short
//! dropouts after an interaction are bridged ([`prolong`]), the sequence is
//! smoothed with a centred moving average, min-max normalized and thresholded
//! ([`smooth_binarize`]), and the resulting runs of interaction are
//! summarized by [`metrics`].

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::types::Laterality;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum State {
    NoInteraction,
    Interaction,
    /// No usable observation of this hand in the frame.
    Missing,
}

impl State {
    pub fn from_bool(b: bool) -> Self {
        if b {
            State::Interaction
        } else {
            State::NoInteraction
        }
    }

    /// `'0'`, `'1'` or `'M'`.
    pub fn as_char(self) -> char {
        match self {
            State::NoInteraction => '0',
            State::Interaction => '1',
            State::Missing => 'M',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(State::NoInteraction),
            '1' => Some(State::Interaction),
            'M' | 'm' => Some(State::Missing),
            _ => None,
        }
    }
}

/// One hand's per-frame states at a fixed frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Timeline {
    pub laterality: Laterality,
    pub fps: f64,
    pub states: Vec<State>,
}

impl Timeline {
    pub fn new(laterality: Laterality, fps: f64, states: Vec<State>) -> Self {
        Self { laterality, fps, states }
    }

    pub fn missing(laterality: Laterality, fps: f64, len: usize) -> Self {
        Self::new(laterality, fps, vec![State::Missing; len])
    }

    pub fn from_bools(laterality: Laterality, fps: f64, values: &[bool]) -> Self {
        Self::new(laterality, fps, values.iter().map(|&b| State::from_bool(b)).collect())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn has_missing(&self) -> bool {
        self.states.contains(&State::Missing)
    }

    /// Interaction flags; fails if any frame is missing.
    pub fn to_bools(&self) -> Result<Vec<bool>> {
        self.states
            .iter()
            .map(|s| match s {
                State::Interaction => Ok(true),
                State::NoInteraction => Ok(false),
                State::Missing => Err(Error::validation("timeline", "contains missing frames")),
            })
            .collect()
    }
}

/// Bridges dropouts: a missing run directly after an interaction frame stays
/// an interaction for up to `prolong_frames` frames. Every other missing
/// frame becomes a non-interaction.
pub fn prolong(tl: &Timeline, cfg: &PipelineConfig) -> Timeline {
    let mut out = Vec::with_capacity(tl.len());
    let mut carry = 0usize;
    let mut prev = State::NoInteraction;
    for &s in &tl.states {
        let v = match s {
            State::Missing => {
                if prev == State::Interaction && carry < cfg.prolong_frames {
                    carry += 1;
                    State::Interaction
                } else {
                    // the bridge is exhausted until a real interaction shows up
                    carry = usize::MAX;
                    State::NoInteraction
                }
            }
            other => {
                carry = 0;
                other
            }
        };
        if s != State::Missing {
            prev = s;
        }
        out.push(v);
    }
    Timeline::new(tl.laterality, tl.fps, out)
}

/// Bounds `[lo, hi)` of the averaging window at `t` for a sequence of `n`.
///
/// The window is `[t − w/2, t + w − w/2 − 1]`, clipped to the sequence. When
/// `w` is even and clipping leaves an odd number of samples, the sample
/// farthest from `t` is dropped (the later one on a tie), so the window never
/// leans on an unpaired sample. This keeps a perfectly alternating input at
/// exactly 0.5 everywhere.
pub fn window_bounds(t: usize, n: usize, w: usize) -> (usize, usize) {
    let lo = t.saturating_sub(w / 2);
    let hi = (t + (w - w / 2)).min(n);
    let (mut lo, mut hi) = (lo, hi);
    if w % 2 == 0 && (hi - lo) % 2 == 1 && hi - lo > 1 {
        let before = t - lo;
        let after = hi - 1 - t;
        if before > after {
            lo += 1;
        } else {
            hi -= 1;
        }
    }
    (lo, hi)
}

/// Centred moving average with [`window_bounds`].
pub fn moving_average(values: &[bool], window: usize) -> Vec<f64> {
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    for &v in values {
        prefix.push(prefix.last().unwrap() + v as u64);
    }
    (0..n)
        .map(|t| {
            let (lo, hi) = window_bounds(t, n, window);
            (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64
        })
        .collect()
}

/// Moving average, min-max normalization over the whole sequence (skipped
/// when the range is below 1e-9), then `value > binarize_threshold`.
pub fn smooth_binarize(tl: &Timeline, cfg: &PipelineConfig) -> Result<Timeline> {
    let values = tl.to_bools()?;
    let avg = moving_average(&values, cfg.smooth_frames);
    let min = avg.iter().copied().fold(f64::INFINITY, f64::min);
    let max = avg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let states = avg
        .iter()
        .map(|&a| {
            let v = if range < 1e-9 { a } else { (a - min) / range };
            State::from_bool(v > cfg.binarize_threshold)
        })
        .collect();
    Ok(Timeline::new(tl.laterality, tl.fps, states))
}

/// Hand-use summary of a binary timeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UseMetrics {
    pub interaction_fraction: f64,
    pub mean_duration_s: f64,
    pub interactions_per_hour: f64,
    pub interaction_count: usize,
}

/// Lengths of the runs of consecutive `true` values.
pub fn run_lengths(values: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for &v in values {
        if v {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

/// Interaction fraction, mean run duration and run rate.
pub fn metrics(tl: &Timeline) -> Result<UseMetrics> {
    if tl.is_empty() {
        return Err(Error::InsufficientData("empty timeline".into()));
    }
    if !(tl.fps > 0.0) {
        return Err(Error::validation("fps", "must be positive"));
    }
    let values = tl.to_bools()?;
    let runs = run_lengths(&values);
    let total = values.len() as f64;
    let ones: usize = runs.iter().sum();
    let count = runs.len();
    let mean_duration_s = if count == 0 {
        0.0
    } else {
        ones as f64 / count as f64 / tl.fps
    };
    let hours = total / tl.fps / 3600.0;
    Ok(UseMetrics {
        interaction_fraction: ones as f64 / total,
        mean_duration_s,
        interactions_per_hour: count as f64 / hours,
        interaction_count: count,
    })
}

/// Prolongation, smoothing and metrics in one step.
pub fn finalize(tl: &Timeline, cfg: &PipelineConfig) -> Result<(Timeline, UseMetrics)> {
    let smoothed = smooth_binarize(&prolong(tl, cfg), cfg)?;
    let m = metrics(&smoothed)?;
    Ok((smoothed, m))
}

/// A classified hand in one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameDecision {
    pub frame_index: usize,
    pub laterality: Laterality,
    pub confidence: f64,
    pub interaction: bool,
}

/// Left, right and other timelines.
#[derive(Clone, Debug, PartialEq)]
pub struct HandTimelines {
    pub left: Timeline,
    pub right: Timeline,
    pub other: Timeline,
}

impl HandTimelines {
    pub fn missing(fps: f64, len: usize) -> Self {
        Self {
            left: Timeline::missing(Laterality::Left, fps, len),
            right: Timeline::missing(Laterality::Right, fps, len),
            other: Timeline::missing(Laterality::Other, fps, len),
        }
    }

    pub fn get(&self, l: Laterality) -> &Timeline {
        match l {
            Laterality::Left => &self.left,
            Laterality::Right => &self.right,
            Laterality::Other => &self.other,
        }
    }

    pub fn get_mut(&mut self, l: Laterality) -> &mut Timeline {
        match l {
            Laterality::Left => &mut self.left,
            Laterality::Right => &mut self.right,
            Laterality::Other => &mut self.other,
        }
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn map(&self, mut f: impl FnMut(&Timeline) -> Result<Timeline>) -> Result<Self> {
        Ok(Self {
            left: f(&self.left)?,
            right: f(&self.right)?,
            other: f(&self.other)?,
        })
    }
}

/// Builds the three timelines. For each frame and laterality the decision of
/// the most confident observation is used; on equal confidence the earlier
/// one in `decisions` wins. Frames without an observation are missing.
/// Decisions outside `0..frame_count` are ignored.
pub fn assign_detections(decisions: &[FrameDecision], frame_count: usize, fps: f64) -> HandTimelines {
    let mut out = HandTimelines::missing(fps, frame_count);
    let mut best: Vec<[f64; 3]> = vec![[f64::NEG_INFINITY; 3]; frame_count];
    for d in decisions {
        if d.frame_index >= frame_count {
            continue;
        }
        let slot = d.laterality as usize;
        if d.confidence > best[d.frame_index][slot] {
            best[d.frame_index][slot] = d.confidence;
            out.get_mut(d.laterality).states[d.frame_index] = State::from_bool(d.interaction);
        }
    }
    out
}

/// Writes `frame,time_s,left,right,other` rows with `0`, `1` or `M`.
pub fn write_timelines_csv(tl: &HandTimelines, mut w: impl Write) -> Result<()> {
    writeln!(w, "frame,time_s,left,right,other")?;
    for i in 0..tl.len() {
        writeln!(
            w,
            "{i},{:.4},{},{},{}",
            i as f64 / tl.left.fps,
            tl.left.states[i].as_char(),
            tl.right.states[i].as_char(),
            tl.other.states[i].as_char()
        )?;
    }
    Ok(())
}

/// Reads the format written by [`write_timelines_csv`].
pub fn read_timelines_csv(r: impl BufRead, fps: f64) -> Result<HandTimelines> {
    let mut out = HandTimelines::missing(fps, 0);
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let record_err = |message: String| Error::Record {
            path: "timeline csv".into(),
            line: i + 1,
            message,
        };
        if i == 0 {
            if line.trim() != "frame,time_s,left,right,other" {
                return Err(record_err(format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(record_err(format!("expected 5 columns, found {}", cols.len())));
        }
        let frame: usize = cols[0].parse().map_err(|_| record_err(format!("bad frame `{}`", cols[0])))?;
        if frame != out.len() {
            return Err(record_err(format!("expected frame {}, found {frame}", out.len())));
        }
        for (col, l) in cols[2..].iter().zip(Laterality::ALL) {
            let s = col
                .chars()
                .next()
                .filter(|_| col.len() == 1)
                .and_then(State::from_char)
                .ok_or_else(|| record_err(format!("bad state `{col}`")))?;
            out.get_mut(l).states.push(s);
        }
    }
    Ok(out)
}

/// Metrics document: `left` and `right`, plus `other` when requested.
pub fn metrics_json(left: &UseMetrics, right: &UseMetrics, other: Option<&UseMetrics>) -> String {
    let mut map = serde_json::Map::new();
    map.insert("left".into(), serde_json::to_value(left).expect("metrics serialize"));
    map.insert("right".into(), serde_json::to_value(right).expect("metrics serialize"));
    if let Some(o) = other {
        map.insert("other".into(), serde_json::to_value(o).expect("metrics serialize"));
    }
    serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("metrics serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use State::{Interaction as I, Missing as M, NoInteraction as N};

    fn tl(states: Vec<State>) -> Timeline {
        Timeline::new(Laterality::Left, 30.0, states)
    }

    fn repeat(s: State, n: usize) -> Vec<State> {
        vec![s; n]
    }

    #[test]
    fn prolong_short_gap() {
        let cfg = PipelineConfig::default();
        let input = [vec![I], repeat(M, 50), vec![I]].concat();
        assert_eq!(prolong(&tl(input), &cfg).states, repeat(I, 52));
    }

    #[test]
    fn prolong_long_gap() {
        let cfg = PipelineConfig::default();
        let input = [vec![I], repeat(M, 100), vec![N]].concat();
        let expected = [repeat(I, 91), repeat(N, 10), vec![N]].concat();
        assert_eq!(prolong(&tl(input), &cfg).states, expected);
    }

    #[test]
    fn prolong_needs_preceding_interaction() {
        let cfg = PipelineConfig::default();
        let input = [repeat(M, 10), vec![N]].concat();
        assert_eq!(prolong(&tl(input), &cfg).states, repeat(N, 11));
        let input = [vec![I, N], repeat(M, 5)].concat();
        assert_eq!(prolong(&tl(input), &cfg).states, [vec![I], repeat(N, 6)].concat());
    }

    #[test]
    fn constant_input_survives_smoothing() {
        let cfg = PipelineConfig::default();
        let ones = smooth_binarize(&tl(repeat(I, 500)), &cfg).unwrap();
        assert_eq!(ones.states, repeat(I, 500));
        let zeros = smooth_binarize(&tl(repeat(N, 500)), &cfg).unwrap();
        assert_eq!(zeros.states, repeat(N, 500));
    }

    #[test]
    fn alternating_input_gives_no_runs() {
        let cfg = PipelineConfig::default();
        for len in [7, 119, 120, 121, 1000, 1001] {
            let states: Vec<State> = (0..len).map(|i| State::from_bool(i % 2 == 1)).collect();
            let avg = moving_average(&tl(states.clone()).to_bools().unwrap(), 120);
            assert!(avg.iter().all(|&a| a == 0.5), "len {len}");
            let out = smooth_binarize(&tl(states), &cfg).unwrap();
            assert_eq!(metrics(&out).unwrap().interaction_count, 0, "len {len}");
        }
    }

    #[test]
    fn single_block_keeps_its_place() {
        let cfg = PipelineConfig::default();
        let input = [repeat(N, 1200), repeat(I, 300), repeat(N, 1500)].concat();
        let out = smooth_binarize(&prolong(&tl(input), &cfg), &cfg).unwrap();
        let v = out.to_bools().unwrap();
        assert_eq!(run_lengths(&v).len(), 1);
        let start = v.iter().position(|&b| b).unwrap();
        let end = v.iter().rposition(|&b| b).unwrap() + 1;
        assert!(start.abs_diff(1200) <= 60 && end.abs_diff(1500) <= 60, "{start}..{end}");
    }

    #[test]
    fn window_bounds_examples() {
        assert_eq!(window_bounds(500, 1000, 120), (440, 560));
        assert_eq!(window_bounds(0, 1000, 120), (0, 60));
        // [0, 61) has 61 samples; the farthest (60) is dropped
        assert_eq!(window_bounds(1, 1000, 120), (0, 60));
        assert_eq!(window_bounds(999, 1000, 120), (940, 1000));
        assert_eq!(window_bounds(0, 1, 120), (0, 1));
        assert_eq!(window_bounds(5, 100, 5), (3, 8));
    }

    #[test]
    fn metrics_examples() {
        let all = Timeline::from_bools(Laterality::Left, 30.0, &[true; 3600]);
        let m = metrics(&all).unwrap();
        assert_eq!(m.interaction_fraction, 1.0);
        assert_eq!(m.interaction_count, 1);
        assert_eq!(m.mean_duration_s, 120.0);
        assert_eq!(m.interactions_per_hour, 30.0);

        let none = Timeline::from_bools(Laterality::Left, 30.0, &[false; 90]);
        let m = metrics(&none).unwrap();
        assert_eq!((m.interaction_fraction, m.mean_duration_s, m.interactions_per_hour, m.interaction_count), (0.0, 0.0, 0.0, 0));

        let v = [vec![true; 30], vec![false; 30], vec![true; 30]].concat();
        let m = metrics(&Timeline::from_bools(Laterality::Left, 30.0, &v)).unwrap();
        assert!((m.interaction_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.interaction_count, 2);
        assert_eq!(m.mean_duration_s, 1.0);
        // 2 runs in 90 frames = 3 s = 1/1200 h
        assert!((m.interactions_per_hour - 2.0 / (90.0 / 30.0 / 3600.0)).abs() < 1e-9);
        assert!((m.interactions_per_hour - 2400.0).abs() < 1e-9);

        assert!(metrics(&tl(vec![])).is_err());
        assert!(metrics(&tl(vec![I, M])).is_err());
    }

    #[test]
    fn assignment_prefers_confident_observation() {
        let d = |frame, l, c, i| FrameDecision {
            frame_index: frame,
            laterality: l,
            confidence: c,
            interaction: i,
        };
        let decisions = vec![
            d(0, Laterality::Left, 0.4, false),
            d(0, Laterality::Left, 0.9, true),
            d(1, Laterality::Left, 0.5, false),
            d(2, Laterality::Right, 0.7, true),
        ];
        let t = assign_detections(&decisions, 3, 30.0);
        assert_eq!(t.left.states, vec![I, N, M]);
        assert_eq!(t.right.states, vec![M, M, I]);
        assert_eq!(t.other.states, vec![M, M, M]);
        let empty = assign_detections(&[], 4, 30.0);
        assert!(Laterality::ALL.iter().all(|&l| empty.get(l).states == repeat(M, 4)));
    }

    #[test]
    fn csv_round_trip() {
        let t = HandTimelines {
            left: tl(vec![I, M, N]),
            right: Timeline::new(Laterality::Right, 30.0, vec![N, N, I]),
            other: Timeline::new(Laterality::Other, 30.0, vec![M, M, M]),
        };
        let mut buf = Vec::new();
        write_timelines_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("frame,time_s,left,right,other\n0,0.0000,1,0,M\n"));
        let back = read_timelines_csv(text.as_bytes(), 30.0).unwrap();
        assert_eq!(back, t);
        assert!(read_timelines_csv("frame,time_s,left,right,other\n0,0,2,0,0\n".as_bytes(), 30.0).is_err());
    }

    #[test]
    fn metrics_json_has_hands() {
        let m = metrics(&Timeline::from_bools(Laterality::Left, 30.0, &[true, false])).unwrap();
        let j: serde_json::Value = serde_json::from_str(&metrics_json(&m, &m, None)).unwrap();
        assert!(j.get("left").is_some() && j.get("right").is_some() && j.get("other").is_none());
        assert_eq!(j["left"]["interaction_count"], 1);
    }

    // Straightforward scan used as an independent oracle.
    fn brute_metrics(v: &[bool], fps: f64) -> (usize, usize, f64) {
        let mut count = 0;
        let mut ones = 0;
        for i in 0..v.len() {
            if v[i] {
                ones += 1;
                if i == 0 || !v[i - 1] {
                    count += 1;
                }
            }
        }
        let mean = if count == 0 { 0.0 } else { ones as f64 / count as f64 / fps };
        (count, ones, mean)
    }

    proptest! {
        #[test]
        fn metrics_match_brute_force(v in proptest::collection::vec(any::<bool>(), 1..3000)) {
            let m = metrics(&Timeline::from_bools(Laterality::Right, 30.0, &v)).unwrap();
            let (count, ones, mean) = brute_metrics(&v, 30.0);
            prop_assert_eq!(m.interaction_count, count);
            prop_assert_eq!(m.interaction_fraction, ones as f64 / v.len() as f64);
            prop_assert!((m.mean_duration_s - mean).abs() < 1e-12);
            prop_assert!(m.interaction_count as f64 * m.mean_duration_s <= v.len() as f64 / 30.0 + 1e-9);
        }

        #[test]
        fn prolong_never_drops_interactions(v in proptest::collection::vec(0u8..3, 0..400)) {
            let states: Vec<State> = v.iter().map(|&x| [N, I, M][x as usize]).collect();
            let out = prolong(&tl(states.clone()), &PipelineConfig::default());
            prop_assert!(!out.has_missing());
            for (a, b) in states.iter().zip(&out.states) {
                if *a == I {
                    prop_assert_eq!(*b, I);
                }
            }
        }

        #[test]
        fn moving_average_is_monotone(
            v in proptest::collection::vec(any::<bool>(), 1..600),
            flips in proptest::collection::vec(any::<usize>(), 1..20),
            w in 1usize..150,
        ) {
            let mut more = v.clone();
            for f in flips {
                more[f % v.len()] = true;
            }
            let a = moving_average(&v, w);
            let b = moving_average(&more, w);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(y >= x);
            }
        }
    }
}
