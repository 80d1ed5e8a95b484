use egohand::evaluation::{correlations, loso_split, mid_ranks, ConfusionCounts};
use egohand::classify::{Label, LabelledSample};
use egohand::timeline::{
    finalize, metrics, prolong, read_timelines_csv, smooth_binarize, write_timelines_csv, HandTimelines, State,
    Timeline,
};
use egohand::{Laterality, PipelineConfig};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = State> {
    prop_oneof![Just(State::Interaction), Just(State::NoInteraction), Just(State::Missing)]
}

fn brute_runs(v: &[bool]) -> usize {
    (0..v.len()).filter(|&i| v[i] && (i == 0 || !v[i - 1])).count()
}

#[test]
fn constant_timelines_have_expected_metrics() {
    let cfg = PipelineConfig::default();
    let ones = Timeline::from_bools(Laterality::Left, 30.0, &[true; 300]);
    let m = metrics(&ones).unwrap();
    assert_eq!((m.interaction_fraction, m.interaction_count, m.mean_duration_s), (1.0, 1, 10.0));
    // an all-zero timeline stays free of runs after smoothing
    let (_, m) = finalize(&Timeline::from_bools(Laterality::Left, 30.0, &[false; 300]), &cfg).unwrap();
    assert_eq!(m.interaction_count, 0);
}

#[test]
fn empty_timeline_is_insufficient_data() {
    let tl = Timeline::new(Laterality::Right, 30.0, vec![]);
    assert!(matches!(metrics(&tl), Err(egohand::Error::InsufficientData(_))));
}

#[test]
fn loso_rejects_single_subject_and_unknown_holdout() {
    let s = |id: &str| LabelledSample {
        feature: vec![0.0],
        label: Label::Interaction,
        subject_id: id.into(),
        frame_index: 0,
        laterality: Laterality::Left,
    };
    let samples = vec![s("a"), s("b"), s("b")];
    assert!(loso_split(&samples, &["a".into()], "a").is_err());
    assert!(loso_split(&samples, &["a".into(), "b".into()], "c").is_err());
    let (train, test) = loso_split(&samples, &["a".into(), "b".into()], "b").unwrap();
    assert_eq!((train.len(), test.len()), (1, 2));
}

proptest! {
    #[test]
    fn metrics_match_brute_force(v in prop::collection::vec(any::<bool>(), 1..400), fps in 1.0f64..60.0) {
        let m = metrics(&Timeline::from_bools(Laterality::Left, fps, &v)).unwrap();
        let ones = v.iter().filter(|&&b| b).count();
        let runs = brute_runs(&v);
        prop_assert_eq!(m.interaction_count, runs);
        prop_assert!((m.interaction_fraction - ones as f64 / v.len() as f64).abs() < 1e-12);
        let hours = v.len() as f64 / fps / 3600.0;
        prop_assert!((m.interactions_per_hour - runs as f64 / hours).abs() < 1e-6 * (1.0 + m.interactions_per_hour));
        if runs > 0 {
            prop_assert!((m.mean_duration_s * runs as f64 * fps - ones as f64).abs() < 1e-6);
        } else {
            prop_assert_eq!(m.mean_duration_s, 0.0);
        }
    }

    #[test]
    fn prolong_leaves_no_missing_and_keeps_decisions(states in prop::collection::vec(state(), 0..300)) {
        let cfg = PipelineConfig::default();
        let tl = Timeline::new(Laterality::Left, 30.0, states.clone());
        let out = prolong(&tl, &cfg);
        prop_assert_eq!(out.len(), states.len());
        prop_assert!(!out.has_missing());
        for (a, b) in states.iter().zip(&out.states) {
            if *a != State::Missing {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn smoothing_preserves_length_and_is_binary(v in prop::collection::vec(any::<bool>(), 1..600)) {
        let cfg = PipelineConfig::default();
        let out = smooth_binarize(&Timeline::from_bools(Laterality::Right, 30.0, &v), &cfg).unwrap();
        prop_assert_eq!(out.len(), v.len());
        prop_assert!(out.to_bools().is_ok());
    }

    #[test]
    fn confusion_counts_partition_frames(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let (p, t): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let c = ConfusionCounts::from_pairs(&p, &t).unwrap();
        prop_assert_eq!(c.total(), p.len());
        prop_assert!((0.0..=1.0).contains(&c.f1()));
        prop_assert!((0.0..=1.0).contains(&c.accuracy()));
    }

    #[test]
    fn mid_ranks_sum_to_triangular(v in prop::collection::vec(0i32..10, 1..50)) {
        let x: Vec<f64> = v.iter().map(|&a| a as f64).collect();
        let n = x.len() as f64;
        prop_assert!((mid_ranks(&x).iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn correlations_are_symmetric_and_bounded(
        xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let (Ok(a), Ok(b)) = (correlations(&x, &y), correlations(&y, &x)) {
            prop_assert!((a.pearson_r - b.pearson_r).abs() < 1e-9);
            prop_assert!((a.spearman_rho - b.spearman_rho).abs() < 1e-9);
            prop_assert!(a.pearson_r.abs() <= 1.0 && a.spearman_rho.abs() <= 1.0);
            prop_assert!((0.0..=1.0).contains(&a.pearson_p_one_tailed));
        }
    }

    #[test]
    fn timeline_csv_round_trips(states in prop::collection::vec((state(), state(), state()), 1..100)) {
        let mut tl = HandTimelines::missing(30.0, states.len());
        for (i, (l, r, o)) in states.iter().enumerate() {
            tl.get_mut(Laterality::Left).states[i] = *l;
            tl.get_mut(Laterality::Right).states[i] = *r;
            tl.get_mut(Laterality::Other).states[i] = *o;
        }
        let mut buf = Vec::new();
        write_timelines_csv(&tl, &mut buf).unwrap();
        let back = read_timelines_csv(&buf[..], 30.0).unwrap();
        for l in [Laterality::Left, Laterality::Right, Laterality::Other] {
            prop_assert_eq!(&back.get(l).states, &tl.get(l).states);
        }
    }
}
