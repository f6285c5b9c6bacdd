//! `onset` — batch pipeline for imagined-word onset detection.
//!
//! Subcommands: `synth` (generate a marked synthetic subject), `train`
//! (build a corpus from marked signals and train a forest), `detect`
//! (predict onsets on a continuous signal), `cv` (leave-one-signal-out
//! cross-validation with TETR-scored reports).
//!
//! Exit codes: 0 success, 2 validation error, 3 I/O error, 4 computation
//! error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use config::{FeatureSet, RunConfig};
use onset_core::{
    build_fold_corpus, config_fingerprint, detect, generate_subject, read_markers, read_signal,
    run_cross_validation, train, write_markers, write_signal, ErrorCategory, ForestModel,
    RecordedSignal, SynthSpec,
};

#[derive(Parser)]
#[command(name = "onset", version, about = "Onset detection for imagined-word events in continuous multichannel recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic 5-signal subject with planted word/idle segments
    Synth {
        /// Synthesis spec JSON; defaults are used when omitted
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for signal_<i>.csv / markers_<i>.csv
        #[arg(long)]
        out: PathBuf,
        /// Override the seed from the synthesis spec file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a random forest on marked signals and save the model
    Train {
        /// Signal CSV, repeatable; pairs with --markers by position
        #[arg(long = "signal", required = true)]
        signals: Vec<PathBuf>,
        /// Markers CSV, repeatable
        #[arg(long = "markers", required = true)]
        markers: Vec<PathBuf>,
        /// Run configuration JSON
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        feature_set: Option<FeatureSet>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output model file (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect onsets in a continuous signal with a trained model
    Detect {
        #[arg(long)]
        signal: PathBuf,
        /// Model file written by `train`
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        feature_set: Option<FeatureSet>,
        /// Output detections CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-signal-out cross-validation over a subject directory
    Cv {
        /// Directory holding signal_<i>.csv / markers_<i>.csv pairs
        #[arg(long)]
        subject_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        feature_set: Option<FeatureSet>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated TETR tolerances in seconds (e.g. `3,4`)
        #[arg(long, value_delimiter = ',')]
        tetr: Option<Vec<f64>>,
        /// Output directory for report.json / report.csv
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<onset_core::Error>() {
            return match core.category() {
                ErrorCategory::Validation => 2,
                ErrorCategory::Io => 3,
                ErrorCategory::Computation => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    2
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth { spec, out, seed } => cmd_synth(spec.as_deref(), &out, seed),
        Command::Train {
            signals,
            markers,
            config,
            feature_set,
            seed,
            out,
        } => cmd_train(&signals, &markers, config.as_deref(), feature_set, seed, &out),
        Command::Detect {
            signal,
            model,
            config,
            feature_set,
            out,
        } => cmd_detect(&signal, &model, config.as_deref(), feature_set, &out),
        Command::Cv {
            subject_dir,
            config,
            feature_set,
            seed,
            tetr,
            out,
        } => cmd_cv(&subject_dir, config.as_deref(), feature_set, seed, tetr, &out),
    }
}

fn cmd_synth(spec_path: Option<&Path>, out: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let mut spec = match spec_path {
        None => SynthSpec::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading synth spec {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing synth spec {}", path.display()))?
        }
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let subject = generate_subject(&spec)?;
    fs::create_dir_all(out)?;
    for (i, (signal, markers)) in subject.iter().enumerate() {
        write_signal(signal, &out.join(format!("signal_{i}.csv")))?;
        write_markers(markers, &out.join(format!("markers_{i}.csv")))?;
    }
    println!(
        "wrote {} signal/marker pairs to {} ({} channels, {} events each, seed {})",
        subject.len(),
        out.display(),
        spec.channels,
        spec.n_events,
        spec.seed
    );
    Ok(())
}

fn load_recorded(signal_path: &Path, markers_path: &Path) -> anyhow::Result<RecordedSignal> {
    let signal = read_signal(signal_path)
        .with_context(|| format!("reading signal {}", signal_path.display()))?;
    let markers = read_markers(markers_path, signal.samples_per_channel())
        .with_context(|| format!("reading markers {}", markers_path.display()))?;
    let id = signal_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| signal_path.display().to_string());
    Ok(RecordedSignal {
        id,
        signal,
        markers,
    })
}

fn cmd_train(
    signals: &[PathBuf],
    markers: &[PathBuf],
    config: Option<&Path>,
    feature_set: Option<FeatureSet>,
    seed: Option<u64>,
    out: &Path,
) -> anyhow::Result<()> {
    if signals.len() != markers.len() {
        bail!(
            "{} --signal arguments but {} --markers arguments; they pair by position",
            signals.len(),
            markers.len()
        );
    }
    let mut cfg = RunConfig::load(config)?;
    cfg.apply_overrides(feature_set, seed, None);

    let recs: Vec<RecordedSignal> = signals
        .iter()
        .zip(markers)
        .map(|(s, m)| load_recorded(s, m))
        .collect::<anyhow::Result<_>>()?;
    let refs: Vec<&RecordedSignal> = recs.iter().collect();

    let corpus = build_fold_corpus(&refs, &cfg.feature_config(), &cfg.segment_spec())?;
    for (signal_index, skip) in &corpus.skipped {
        eprintln!(
            "warning: {}: event {} skipped, {:?} window out of bounds",
            recs[*signal_index].id, skip.event_index, skip.side
        );
    }
    if corpus.overlapping_word_windows > 0 {
        eprintln!(
            "warning: {} events shorter than two windows (their word windows overlap)",
            corpus.overlapping_word_windows
        );
    }

    let model = train(&corpus.matrix, &cfg.forest_params())?;
    model.save(out)?;
    println!(
        "trained {} trees on {} instances × {} features; model written to {}",
        model.params.n_trees,
        corpus.matrix.rows.len(),
        corpus.matrix.layout.len(),
        out.display()
    );
    Ok(())
}

fn cmd_detect(
    signal_path: &Path,
    model_path: &Path,
    config: Option<&Path>,
    feature_set: Option<FeatureSet>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(config)?;
    cfg.apply_overrides(feature_set, None, None);
    let signal = read_signal(signal_path)
        .with_context(|| format!("reading signal {}", signal_path.display()))?;
    let model = ForestModel::load(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let result = detect(&signal, &model, &cfg.feature_config(), cfg.window_len)?;
    result.write_csv(out)?;
    println!(
        "{} predicted events over {} windows; detections written to {}",
        result.events.len(),
        result.window_scores.len(),
        out.display()
    );
    Ok(())
}

/// Collects `signal_<i>.csv` / `markers_<i>.csv` pairs, ordered by index.
fn discover_subject(dir: &Path) -> anyhow::Result<Vec<RecordedSignal>> {
    let mut indices = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(idx) = name
            .strip_prefix("signal_")
            .and_then(|rest| rest.strip_suffix(".csv"))
            .and_then(|n| n.parse::<usize>().ok())
        {
            indices.push(idx);
        }
    }
    indices.sort_unstable();
    if indices.len() < 2 {
        bail!(
            "{} holds {} signal_<i>.csv files; cross-validation needs at least 2",
            dir.display(),
            indices.len()
        );
    }
    indices
        .into_iter()
        .map(|i| {
            load_recorded(
                &dir.join(format!("signal_{i}.csv")),
                &dir.join(format!("markers_{i}.csv")),
            )
        })
        .collect()
}

fn cmd_cv(
    subject_dir: &Path,
    config: Option<&Path>,
    feature_set: Option<FeatureSet>,
    seed: Option<u64>,
    tetr: Option<Vec<f64>>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(config)?;
    cfg.apply_overrides(feature_set, seed, tetr);

    let recs = discover_subject(subject_dir)?;
    let subject_id = subject_dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".into());

    let feature_config = cfg.feature_config();
    let forest_params = cfg.forest_params();
    let report = run_cross_validation(
        &subject_id,
        &recs,
        &feature_config,
        &forest_params,
        &cfg.segment_spec(),
        &cfg.tetrs(),
    )?;

    fs::create_dir_all(out)?;
    report.write_json(&out.join("report.json"))?;
    report.write_csv(&out.join("report.csv"))?;

    println!(
        "subject {} — {} folds, config fingerprint {}",
        report.subject_id,
        report.per_fold.len(),
        config_fingerprint(&feature_config, &forest_params)
    );
    for avg in &report.averages {
        println!("  TETR {:>4} s: averaged TPR {:.4}", avg.tolerance_s, avg.tpr);
    }
    println!("report written to {}", out.display());
    Ok(())
}
