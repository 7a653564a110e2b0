use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use tactile_grasp::controller::{run_streams_with, AttemptStream};
use tactile_grasp::dataset::{read_dataset_full, write_dataset_with, Dataset};
use tactile_grasp::estimator::{calibrate, DecisionInputs};
use tactile_grasp::evaluation::{evaluate, predict_dataset, read_predictions, write_predictions};
use tactile_grasp::pipeline::extract_features;
use tactile_grasp::simulator::{
    generate_dataset, scenario_sweep, BenchmarkMix, NuisanceRanges, DEFAULT_BENCHMARK_SEED,
};
use tactile_grasp::{ControllerConfig, Error, EstimatorConfig, GraspClass, GraspState, PipelineConfig};

/// Tactile grasp-state detection for a four-finger harvesting gripper.
#[derive(Debug, Parser)]
#[command(name = "tgrasp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a labelled benchmark dataset.
    Generate {
        #[arg(long, default_value_t = DEFAULT_BENCHMARK_SEED)]
        seed: u64,
        /// Output manifest path; the payload goes next to it.
        #[arg(long)]
        dataset: PathBuf,
        /// Emit a noise-free sweep with this many recordings per class
        /// instead of the default benchmark.
        #[arg(long, value_name = "PER_CLASS")]
        sweep: Option<usize>,
    },
    /// Grid-search estimator thresholds on a labelled dataset.
    Calibrate {
        #[arg(long)]
        dataset: PathBuf,
        /// Write the calibrated config here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Classify one recording and print the decision trace.
    Classify {
        #[command(flatten)]
        input: DatasetArgs,
        #[arg(long, default_value_t = 0)]
        id: usize,
    },
    /// Stream recordings through pipeline, estimator and controller.
    Replay {
        #[command(flatten)]
        input: DatasetArgs,
        /// Recording ids, one per grasp attempt, in order.
        #[arg(long, value_delimiter = ',', required = true)]
        id: Vec<usize>,
        /// Pace frames by their timestamps instead of running flat out.
        #[arg(long)]
        realtime: bool,
        #[arg(long, default_value_t = 2)]
        max_retries: usize,
        /// Classify again after opening a branch finger.
        #[arg(long)]
        recheck: bool,
        #[arg(long, default_value_t = 50)]
        timeout_frames: usize,
        /// Also write the cycle report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score predictions against dataset labels.
    Evaluate {
        #[command(flatten)]
        input: DatasetArgs,
        /// External predictions file; the rule estimator is used when absent.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Write the machine-readable report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Save the rule estimator's predictions in the exchange format.
        #[arg(long, conflicts_with = "predictions")]
        emit_predictions: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Estimator config (TOML); shipped defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl DatasetArgs {
    fn load(&self) -> Result<(Dataset<f64>, EstimatorConfig), Error> {
        let cfg = match &self.config {
            Some(path) => EstimatorConfig::load(path)?,
            None => EstimatorConfig::default(),
        };
        Ok((read_dataset_full(&self.dataset)?, cfg))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Format(_) | Error::Truncated { .. } | Error::Structural(_) => 3,
        Error::Calibration(_) => 4,
        Error::Reconciliation { .. } => 5,
        Error::Io { .. } => 6,
        Error::Config(_) | Error::Argument(_) => 7,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn recording_index(dataset: &Dataset<f64>, id: usize) -> Result<usize, Error> {
    dataset
        .manifest
        .recordings
        .iter()
        .position(|e| e.id == id)
        .ok_or_else(|| Error::Argument(format!("dataset has no recording {id}")))
}

fn generate(seed: u64, dataset: &Path, sweep: Option<usize>) -> Result<String, Error> {
    let (recs, ranges, kind) = match sweep {
        Some(per_class) => (scenario_sweep::<f64>(seed, per_class)?, NuisanceRanges::clean(), "sweep"),
        None => {
            let ranges = NuisanceRanges::benchmark();
            (generate_dataset(seed, &BenchmarkMix::TABLE, &ranges)?, ranges, "benchmark")
        }
    };
    let mut provenance: BTreeMap<String, String> = ranges.describe();
    provenance.insert("generator".into(), kind.into());
    provenance.insert("seed".into(), seed.to_string());
    let manifest = write_dataset_with(&recs, dataset, provenance)?;
    Ok(format!(
        "wrote {} recordings to {} ({})\n",
        manifest.recording_count,
        dataset.display(),
        manifest.digest()
    ))
}

fn run_calibrate(dataset: &Path, report: Option<&Path>) -> Result<String, Error> {
    let data = read_dataset_full::<f64>(dataset)?;
    let cal = calibrate(&data.recordings, &PipelineConfig::default())?;
    let text = cal.config.to_toml()?;
    let mut summary = String::new();
    for (c, class) in GraspClass::ALL.iter().enumerate() {
        let _ = write!(summary, "{} {:.1}%  ", class.name(), 100.0 * cal.per_class_accuracy[c]);
    }
    eprintln!("calibrated on {}: {}macro {:.1}%", data.manifest.digest(), summary, 100.0 * cal.macro_accuracy);
    match report {
        Some(path) => {
            write_file(path, &text)?;
            Ok(format!("wrote estimator config to {}\n", path.display()))
        }
        None => Ok(text),
    }
}

fn run_classify(input: &DatasetArgs, id: usize) -> Result<String, Error> {
    let (data, cfg) = input.load()?;
    let rec = &data.recordings[recording_index(&data, id)?];
    let feat = extract_features(rec, &cfg.pipeline_config())?;
    let inputs = DecisionInputs::new(&feat.per_finger_max, feat.onsets(cfg.onset_threshold));
    let verdict = tactile_grasp::estimator::decide(&inputs, &cfg);

    let mut s = String::new();
    let label = rec.label().map_or("unlabelled".to_string(), |l| l.to_string());
    let _ = writeln!(s, "recording {id} (label {label})");
    let _ = writeln!(s, "analysis span frames {}..{}", feat.span.start, feat.span.end);
    let _ = writeln!(s, "finger  max_variance  onset");
    for f in 0..4 {
        let onset = inputs.onsets[f].map_or("-".to_string(), |o| o.to_string());
        let _ = writeln!(s, "{f:>6}  {:>12.4e}  {onset:>5}", feat.per_finger_max[f]);
    }
    let contact = inputs.max_variance >= cfg.null_threshold;
    let _ = writeln!(
        s,
        "null test: max {:.4e} {} T_null {:.4e}",
        inputs.max_variance,
        if contact { ">=" } else { "<" },
        cfg.null_threshold
    );
    if contact {
        let spread = match inputs.onset_spread() {
            None => "no onsets".to_string(),
            Some(usize::MAX) => "some fingers never reached onset".to_string(),
            Some(d) => format!("{d} frames"),
        };
        let _ = writeln!(
            s,
            "obstruction test: spread {spread}, limit {} frames, earliest finger {}",
            cfg.obstruct_spread,
            inputs.earliest_onset().map_or("-".to_string(), |f| f.index().to_string())
        );
        if !matches!(verdict, GraspState::Obstructed(_)) {
            let _ = writeln!(
                s,
                "branch test: finger {} ratio {:.3} vs limit {:.3}",
                inputs.loudest.index(),
                inputs.branch_ratio,
                cfg.branch_ratio
            );
        }
    }
    let _ = writeln!(s, "verdict: {verdict}");
    Ok(s)
}

fn run_replay(
    input: &DatasetArgs,
    ids: &[usize],
    realtime: bool,
    ctl: ControllerConfig,
    report: Option<&Path>,
) -> Result<String, Error> {
    let (data, cfg) = input.load()?;
    let attempts = ids
        .iter()
        .map(|&id| Ok(AttemptStream::from(&data.recordings[recording_index(&data, id)?])))
        .collect::<Result<Vec<_>, Error>>()?;
    let started = Instant::now();
    let mut first_ts: Option<u64> = None;
    let cycle = run_streams_with(attempts, &cfg, &ctl, |frame| {
        if realtime {
            let t0 = *first_ts.get_or_insert(frame.timestamp_ms());
            let due = Duration::from_millis(frame.timestamp_ms().saturating_sub(t0));
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    })?;
    let text = cycle.to_string();
    if let Some(path) = report {
        write_file(path, &text)?;
    }
    Ok(text)
}

fn run_evaluate(
    input: &DatasetArgs,
    predictions: Option<&Path>,
    report: Option<&Path>,
    emit: Option<&Path>,
) -> Result<String, Error> {
    let (data, cfg) = input.load()?;
    let preds = match predictions {
        Some(path) => read_predictions(path)?,
        None => predict_dataset(&data, &cfg)?,
    };
    if let Some(path) = emit {
        write_predictions(&preds, path)?;
    }
    let result = evaluate(&data, &preds)?;
    if let Some(path) = report {
        write_file(path, &result.to_machine_text())?;
    }
    Ok(result.to_string())
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Generate { seed, dataset, sweep } => generate(seed, &dataset, sweep),
        Command::Calibrate { dataset, report } => run_calibrate(&dataset, report.as_deref()),
        Command::Classify { input, id } => run_classify(&input, id),
        Command::Replay {
            input,
            id,
            realtime,
            max_retries,
            recheck,
            timeout_frames,
            report,
        } => {
            let ctl = ControllerConfig {
                max_retries,
                recheck_after_release: recheck,
                timeout_frames,
            };
            run_replay(&input, &id, realtime, ctl, report.as_deref())
        }
        Command::Evaluate {
            input,
            predictions,
            report,
            emit_predictions,
        } => run_evaluate(&input, predictions.as_deref(), report.as_deref(), emit_predictions.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
