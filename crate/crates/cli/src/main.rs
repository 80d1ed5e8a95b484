//! `egohand` command-line front-end.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use egohand::classify::{FeatureFamily, ForestModel};
use egohand::evaluation::{ablation_run, write_scatter_csv, AblationTable};
use egohand::features::PcaModel;
use egohand::handid::VerifierModel;
use egohand::ingest::{
    ingest_detections, ingest_frames, ingest_labels, label_timelines, list_frames, load_frame, save_frame_png,
    write_json_lines, DetectionRecord, LabelRecord,
};
use egohand::pipeline::{
    analyze_sequence, debug_image, decide, fit_pca, labelled_samples, loso_end_to_end, timelines_from_decisions,
    train_verifier, HandCandidate, Models, Pipeline, SubjectData, INTERACTION_FILE, PCA_FILE, VERIFIER_FILE,
};
use egohand::propose::propose_boxes;
use egohand::synth::{bundled_study, SynthConfig};
use egohand::timeline::{finalize, metrics, metrics_json, read_timelines_csv, write_timelines_csv, HandTimelines};
use egohand::{load_config, Error, Laterality, PipelineConfig, Result};

#[derive(Parser, Debug)]
#[command(name = "egohand", version, about = "Hand-object interaction detection and hand-use metrics for egocentric video")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Pipeline configuration JSON; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice (overrides the config's rng_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory that receives all outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Write per-frame debug images under <out-dir>/debug.
    #[arg(long, global = true)]
    debug_dump: bool,
    /// Worker threads for frame-level work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

/// A subject directory holds `frames/`, `detections.jsonl` and, for
/// training and evaluation, `labels.jsonl`.
#[derive(Args, Debug)]
struct Subjects {
    /// Subject directory (repeatable).
    #[arg(long = "subject", required = true)]
    subjects: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the Haar hand verifier from detections carrying a `hand` field.
    TrainVerifier(Subjects),
    /// Fit the HOG PCA on verified hands.
    FitPca {
        #[command(flatten)]
        subjects: Subjects,
        /// Directory with the verifier (default: --out-dir).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Train the interaction forest on labelled, verified hands.
    TrainInteraction {
        #[command(flatten)]
        subjects: Subjects,
        /// Directory with the verifier and PCA (default: --out-dir).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Run the trained pipeline over a frame directory.
    Infer {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Directory with all three models (default: --out-dir).
        #[arg(long)]
        models: Option<PathBuf>,
        /// Also report other people's hands in metrics.json.
        #[arg(long)]
        include_other: bool,
    },
    /// Hand-use metrics from a timeline CSV or from a label file.
    Metrics {
        /// Timeline CSV (`frame,time_s,left,right,other`).
        #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
        timelines: Option<PathBuf>,
        /// Label JSON lines; unlabelled frames count as no interaction.
        #[arg(long, requires = "frame_count")]
        labels: Option<PathBuf>,
        /// Sequence length when reading labels.
        #[arg(long)]
        frame_count: Option<usize>,
        /// Use the timeline as is (it must be binary) instead of prolonging
        /// and smoothing it first.
        #[arg(long)]
        no_smooth: bool,
        #[arg(long)]
        include_other: bool,
    },
    /// Leave-one-subject-out evaluation of the full pipeline.
    EvalLoso(Subjects),
    /// Leave-one-subject-out scores for each feature family alone.
    Ablate(Subjects),
    /// Classical skin-blob boxes for frames without detector output.
    Propose {
        #[arg(long)]
        frames: PathBuf,
    },
    /// Write the bundled synthetic study as subject directories.
    Synth {
        /// Frames per subject.
        #[arg(long, default_value_t = 480)]
        frame_count: usize,
    },
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

/// 2 for bad input, 3 for missing models or data, 1 otherwise.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigParse { .. }
        | Error::Validation { .. }
        | Error::DimensionMismatch { .. }
        | Error::Record { .. }
        | Error::ModelFormat(_)
        | Error::Json(_)
        | Error::Image { .. } => 2,
        Error::MissingModel(_) | Error::InsufficientData(_) | Error::Frames(_) => 3,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 3,
        _ => 1,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingModel(path.to_path_buf()))
    }
}

fn load_verifier(dir: &Path) -> Result<VerifierModel> {
    let path = dir.join(VERIFIER_FILE);
    require_file(&path)?;
    Ok(VerifierModel {
        forest: ForestModel::load(path)?,
    })
}

fn load_pca(dir: &Path) -> Result<PcaModel> {
    let path = dir.join(PCA_FILE);
    require_file(&path)?;
    PcaModel::load(path)
}

struct Loaded {
    id: String,
    frame_count: usize,
    candidates: Vec<HandCandidate>,
    labels: Vec<LabelRecord>,
}

fn subject_id(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn load_subject(p: &Pipeline, dir: &Path, need_labels: bool) -> Result<Loaded> {
    let frames = ingest_frames(dir.join("frames"), p.cfg.fps)?;
    let detections = ingest_detections(dir.join("detections.jsonl"))?;
    let label_path = dir.join("labels.jsonl");
    let labels = if label_path.is_file() {
        ingest_labels(&label_path)?
    } else if need_labels {
        return Err(Error::InsufficientData(format!("{} not found", label_path.display())));
    } else {
        Vec::new()
    };
    log::info!("{}: {} frames, {} detections", dir.display(), frames.len(), detections.len());
    let candidates = analyze_sequence(p, &frames, &detections)?;
    Ok(Loaded {
        id: subject_id(dir),
        frame_count: frames.len(),
        candidates,
        labels,
    })
}

fn load_subjects(p: &Pipeline, s: &Subjects, need_labels: bool) -> Result<Vec<Loaded>> {
    let mut out: Vec<Loaded> = Vec::new();
    for dir in &s.subjects {
        let l = load_subject(p, dir, need_labels)?;
        if out.iter().any(|o| o.id == l.id) {
            return Err(invalid("subject", format!("subject `{}` given twice", l.id)));
        }
        out.push(l);
    }
    Ok(out)
}

fn all_candidates(subjects: &[Loaded]) -> Vec<HandCandidate> {
    subjects.iter().flat_map(|s| s.candidates.iter().cloned()).collect()
}

fn timelines_to_file(path: &Path, tl: &HandTimelines) -> Result<()> {
    let mut w = create(path)?;
    write_timelines_csv(tl, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.rng_seed = seed;
    }
    cfg.validate()?;
    if let Some(jobs) = g.jobs {
        if jobs == 0 {
            return Err(invalid("jobs", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| invalid("jobs", e.to_string()))?;
    }
    fs::create_dir_all(&g.out_dir)?;
    let out = g.out_dir.as_path();
    let seed = cfg.rng_seed;
    let p = Pipeline::new(cfg.clone());

    match &cli.command {
        Command::TrainVerifier(s) => {
            let subjects = load_subjects(&p, s, false)?;
            let verifier = train_verifier(&all_candidates(&subjects), &cfg, seed)?;
            verifier.forest.save(out.join(VERIFIER_FILE))?;
            println!("wrote {}", out.join(VERIFIER_FILE).display());
        }
        Command::FitPca { subjects, models } => {
            let verifier = load_verifier(models.as_deref().unwrap_or(out))?;
            let subjects = load_subjects(&p, subjects, false)?;
            let pca = fit_pca(&all_candidates(&subjects), &verifier, &cfg)?;
            pca.save(out.join(PCA_FILE))?;
            println!("wrote {}", out.join(PCA_FILE).display());
        }
        Command::TrainInteraction { subjects, models } => {
            let dir = models.as_deref().unwrap_or(out);
            let verifier = load_verifier(dir)?;
            let pca = load_pca(dir)?;
            let subjects = load_subjects(&p, subjects, true)?;
            let mut samples = Vec::new();
            for s in &subjects {
                samples.extend(labelled_samples(&s.id, &s.candidates, &s.labels, &verifier, &pca, &cfg)?);
            }
            let model = egohand::classify::forest_fit(&samples, &cfg, seed)?;
            model.save(out.join(INTERACTION_FILE))?;
            println!("wrote {} ({} samples)", out.join(INTERACTION_FILE).display(), samples.len());
        }
        Command::Infer {
            frames,
            detections,
            models,
            include_other,
        } => {
            // models first, so a missing file fails before any frame work
            let models = Models::load_dir(models.as_deref().unwrap_or(out))?;
            let frames = ingest_frames(frames, cfg.fps)?;
            let detections = ingest_detections(detections)?;
            let candidates = analyze_sequence(&p, &frames, &detections)?;
            let decisions = decide(&candidates, &models, &cfg)?;
            let result = timelines_from_decisions(&decisions, frames.len(), &cfg)?;
            timelines_to_file(&out.join("timelines_raw.csv"), &result.raw)?;
            timelines_to_file(&out.join("timelines.csv"), &result.smoothed)?;
            let other = include_other.then_some(&result.other);
            write_text(&out.join("metrics.json"), &metrics_json(&result.left, &result.right, other))?;
            if g.debug_dump {
                let dir = out.join("debug");
                fs::create_dir_all(&dir)?;
                for f in &frames {
                    let img = debug_image(f, &candidates, Some(&models.verifier));
                    save_frame_png(&img, dir.join(format!("{:06}.png", f.index)))?;
                }
            }
            println!(
                "{} frames, {} decisions; left {:.3}, right {:.3} interaction fraction",
                frames.len(),
                decisions.len(),
                result.left.interaction_fraction,
                result.right.interaction_fraction
            );
        }
        Command::Metrics {
            timelines,
            labels,
            frame_count,
            no_smooth,
            include_other,
        } => {
            let tl = match (timelines, labels) {
                (Some(path), _) => read_timelines_csv(BufReader::new(File::open(path)?), cfg.fps)?,
                (None, Some(path)) => {
                    let n = frame_count.ok_or_else(|| invalid("frame-count", "required with --labels"))?;
                    label_timelines(&ingest_labels(path)?, n, cfg.fps)
                }
                (None, None) => return Err(invalid("timelines", "give --timelines or --labels")),
            };
            if tl.is_empty() {
                return Err(Error::InsufficientData("timeline has no frames".into()));
            }
            let m = if *no_smooth {
                [metrics(&tl.left)?, metrics(&tl.right)?, metrics(&tl.other)?]
            } else {
                [finalize(&tl.left, &cfg)?.1, finalize(&tl.right, &cfg)?.1, finalize(&tl.other, &cfg)?.1]
            };
            let doc = metrics_json(&m[0], &m[1], include_other.then_some(&m[2]));
            write_text(&out.join("metrics.json"), &doc)?;
            println!("{doc}");
        }
        Command::EvalLoso(s) => {
            let subjects: Vec<SubjectData> = load_subjects(&p, s, true)?
                .into_iter()
                .map(|l| SubjectData {
                    id: l.id,
                    frame_count: l.frame_count,
                    candidates: l.candidates,
                    labels: l.labels,
                })
                .collect();
            let outcome = loso_end_to_end(&subjects, &cfg, seed)?;
            write_text(&out.join("evaluation.json"), &outcome.report.to_json())?;
            let mut w = create(&out.join("scatter.csv"))?;
            write_scatter_csv(&outcome.pairs, &mut w)?;
            w.flush()?;
            let corr: serde_json::Map<String, serde_json::Value> = outcome
                .correlations
                .iter()
                .map(|(k, v)| {
                    let value = match v {
                        Ok(r) => serde_json::to_value(r)?,
                        Err(e) => serde_json::json!({ "undefined": e.to_string() }),
                    };
                    Ok((k.clone(), value))
                })
                .collect::<Result<_>>()?;
            write_text(&out.join("correlations.json"), &serde_json::to_string_pretty(&corr)?)?;
            for row in &outcome.report.rows {
                println!("{:<16} {:<5} F1 {:.3}  accuracy {:.3}", row.subject, row.hand.as_str(), row.f1, row.accuracy);
            }
            for hand in [Laterality::Left, Laterality::Right] {
                if let Some(f1) = outcome.report.mean_f1.get(&hand) {
                    println!("mean {:<5} F1 {:.3}", hand.as_str(), f1);
                }
            }
        }
        Command::Ablate(s) => {
            let subjects = load_subjects(&p, s, true)?;
            if subjects.len() < 2 {
                return Err(Error::InsufficientData("ablation needs at least 2 subjects".into()));
            }
            // the verifier and PCA only gate and compress features; the
            // ablation compares interaction classifiers under LOSO
            let all = all_candidates(&subjects);
            let verifier = train_verifier(&all, &cfg, seed)?;
            let pca = fit_pca(&all, &verifier, &cfg)?;
            let mut dataset = Vec::new();
            for s in &subjects {
                dataset.extend(labelled_samples(&s.id, &s.candidates, &s.labels, &verifier, &pca, &cfg)?);
            }
            let families = [FeatureFamily::Full, FeatureFamily::Flow, FeatureFamily::Hog, FeatureFamily::Colour];
            let tables: Vec<AblationTable> = families
                .iter()
                .map(|&f| ablation_run(&dataset, f, &cfg, seed))
                .collect::<Result<_>>()?;
            write_text(&out.join("ablation.json"), &serde_json::to_string_pretty(&tables)?)?;
            for t in &tables {
                let (f1, acc) = t.overall();
                println!("{:<7} dim {:>3}  F1 {:.3}  accuracy {:.3}", t.family.as_str(), t.feature_dim, f1, acc);
            }
        }
        Command::Propose { frames } => {
            let paths = list_frames(frames)?;
            let mut records: Vec<DetectionRecord> = Vec::new();
            for (i, path) in paths.iter().enumerate() {
                let frame = load_frame(path, i, cfg.fps)?;
                records.extend(propose_boxes(&frame, &p.skin, &cfg));
            }
            let path = out.join("detections.jsonl");
            let mut w = create(&path)?;
            write_json_lines(&records, &mut w)?;
            w.flush()?;
            println!("wrote {} boxes for {} frames to {}", records.len(), paths.len(), path.display());
        }
        Command::Synth { frame_count } => {
            if *frame_count < 2 {
                return Err(invalid("frame-count", "must be at least 2"));
            }
            let scfg = SynthConfig {
                frames: *frame_count,
                fps: cfg.fps,
                ..SynthConfig::default()
            };
            for s in bundled_study(&scfg, seed) {
                let dir = out.join(&s.subject);
                let frames_dir = dir.join("frames");
                fs::create_dir_all(&frames_dir)?;
                for f in &s.frames {
                    save_frame_png(f, frames_dir.join(format!("{:06}.png", f.index)))?;
                }
                let mut w = create(&dir.join("detections.jsonl"))?;
                write_json_lines(&s.detections, &mut w)?;
                w.flush()?;
                let mut w = create(&dir.join("labels.jsonl"))?;
                write_json_lines(&s.labels, &mut w)?;
                w.flush()?;
                println!("wrote {}", dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
