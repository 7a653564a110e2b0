//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tactile_grasp::controller::{run_cycle, step, Controller};
use tactile_grasp::dataset::{payload_crc32, payload_path_for, read_dataset_full, write_dataset};
use tactile_grasp::estimator::{calibrate, calibrate_features, classify, CalibrationGrid};
use tactile_grasp::evaluation::{predict_recordings, EvaluationReport};
use tactile_grasp::frame::TaxelFrame;
use tactile_grasp::layout::TAXEL_COUNT;
use tactile_grasp::material::{OgdenParams, OgdenTerm};
use tactile_grasp::pipeline::{extract_features, RollingMean, RollingVariance, TactilePipeline};
use tactile_grasp::recording::GraspRecording;
use tactile_grasp::simulator::{generate_benchmark, scenario_sweep, DEFAULT_BENCHMARK_SEED};
use tactile_grasp::{
    Action, ControllerConfig, ControllerState, EstimatorConfig, Event, Finger, GraspClass, GraspState, Mode,
    PhaseMarks, PipelineConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Independent brute-force recomputation of both windowed statistics.
fn brute_mean(xs: &[f64], t: usize, w: usize) -> f64 {
    let lo = (t + 1).saturating_sub(w);
    xs[lo..=t].iter().sum::<f64>() / (t + 1 - lo) as f64
}

fn brute_variance(xs: &[f64], t: usize, n: usize) -> f64 {
    let lo = (t + 1).saturating_sub(n);
    let win = &xs[lo..=t];
    let mean = win.iter().sum::<f64>() / win.len() as f64;
    win.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / win.len() as f64
}

fn streaming_matches_batch() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<f64> = (0..10_000).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut avg = RollingMean::new(4).map_err(|e| e.to_string())?;
    let mut var = RollingVariance::new(8).map_err(|e| e.to_string())?;
    let smoothed: Vec<f64> = xs.iter().map(|&x| avg.push(x)).collect();
    let streamed: Vec<f64> = smoothed.iter().map(|&x| var.push(x)).collect();
    let mut worst = 0.0f64;
    for t in 0..xs.len() {
        worst = worst.max((smoothed[t] - brute_mean(&xs, t, 4)).abs());
        worst = worst.max((streamed[t] - brute_variance(&smoothed, t, 8)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-9 && secs < 10.0,
        format!("max |diff| = {worst:.2e} over 10^4 samples in {secs:.2}s"),
    )
}

fn ogden_model() -> Outcome {
    let p = OgdenParams::ninjaflex();
    let at = |l: f64| p.uniaxial_nominal_stress(l).unwrap();
    let mut problems = Vec::new();
    if at(1.0) != 0.0 {
        problems.push(format!("P(1) = {}", at(1.0)));
    }
    let grid: Vec<f64> = (0..1000).map(|i| at(1.0 + i as f64 / 999.0)).collect();
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        problems.push(format!("not increasing at grid point {i}"));
    }
    let neo = OgdenParams::<f64>::new(vec![OgdenTerm { mu: 1.0, alpha: 2.0 }]).unwrap();
    let p2 = neo.uniaxial_nominal_stress(2.0).unwrap();
    if (p2 - 1.75).abs() > 1e-12 {
        problems.push(format!("neo-Hookean P(2) = {p2}"));
    }
    // 50-digit evaluation of the same formula
    #[allow(clippy::excessive_precision)]
    let oracle = 40.623_464_739_176_611_434_997_1;
    let rel = (at(1.5) - oracle).abs() / oracle;
    if rel > 1e-9 {
        problems.push(format!("P(1.5) relative error {rel:.2e}"));
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("P(1)=0, monotone on 10^3 points, neo-Hookean 1.75, P(1.5) rel err {rel:.1e}")
        } else {
            problems.join("; ")
        },
    )
}

fn noiseless_separability() -> Outcome {
    let recs: Vec<GraspRecording<f64>> = scenario_sweep(7, 10).map_err(|e| e.to_string())?;
    let pc = PipelineConfig::default();
    let samples: Vec<_> = recs
        .iter()
        .map(|r| (extract_features(r, &pc).unwrap(), r.label().unwrap()))
        .collect();
    let cal = calibrate_features(&samples, &CalibrationGrid::default()).map_err(|e| e.to_string())?;
    let wrong = samples
        .iter()
        .filter(|(f, label)| classify(f, &cal.config).unwrap() != *label)
        .count();
    check(
        recs.len() == 40 && wrong == 0,
        format!("{} recordings, {wrong} misclassified (exact finger)", recs.len()),
    )
}

fn seeded_benchmark() -> Outcome {
    let start = Instant::now();
    let recs: Vec<GraspRecording<f64>> = generate_benchmark(DEFAULT_BENCHMARK_SEED).map_err(|e| e.to_string())?;
    let labels: Vec<GraspState> = recs.iter().map(|r| r.label().unwrap()).collect();
    let cal = calibrate(&recs, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let preds = predict_recordings(&recs, &cal.config).map_err(|e| e.to_string())?;
    let states: Vec<GraspState> = preds.iter().map(|p| p.state).collect();
    let report = EvaluationReport::from_pairs(&labels, &states, "in-memory").map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let acc = report.reported_accuracy();
    let counts = report.class_counts();
    let mut per_finger = [0usize; 4];
    for l in &labels {
        if let GraspState::BranchInterference(f) = l {
            per_finger[f.index()] += 1;
        }
    }
    let ok = counts == [30, 26, 48, 96]
        && per_finger == [24; 4]
        && acc[GraspClass::Null.index()] >= 0.96
        && acc[GraspClass::Obstructed.index()] >= 0.88
        && report.localization_accuracy >= 0.75
        && cal.config == EstimatorConfig::default()
        && secs < 60.0;
    check(
        ok,
        format!(
            "seed {DEFAULT_BENCHMARK_SEED}: null {:.1}% obstructed {:.1}% good {:.1}% (ungated) branch {:.1}%, \
             shipped defaults {}, {secs:.1}s",
            100.0 * acc[0],
            100.0 * acc[1],
            100.0 * acc[2],
            100.0 * acc[3],
            if cal.config == EstimatorConfig::default() { "match calibration" } else { "DIFFER from calibration" }
        ),
    )
}

fn all_states() -> Vec<GraspState> {
    let mut v = vec![GraspState::Null, GraspState::Good];
    for f in Finger::ALL {
        v.push(GraspState::Obstructed(f));
        v.push(GraspState::BranchInterference(f));
    }
    v
}

fn all_events() -> Vec<Event> {
    let mut v: Vec<Event> = all_states().into_iter().map(Event::Classified).collect();
    v.push(Event::PhaseComplete);
    v.push(Event::Timeout);
    v
}

/// The reaction table written out row by row.
fn golden(s: ControllerState, e: Event, cfg: &ControllerConfig) -> (ControllerState, Vec<Action>) {
    use GraspState::*;
    let with = |mode: Mode, retry: usize, open: [bool; 4]| ControllerState {
        mode,
        retry_count: retry,
        finger_open: open,
    };
    let opened = |f: Finger| {
        let mut o = s.finger_open;
        o[f.index()] = true;
        o
    };
    let failed = || {
        if s.retry_count < cfg.max_retries {
            (
                with(Mode::Approaching, s.retry_count + 1, [true; 4]),
                vec![Action::OpenAll, Action::RequestReposition],
            )
        } else {
            (with(Mode::Faulted, s.retry_count, s.finger_open), vec![Action::Abort])
        }
    };
    match (s.mode, e) {
        (Mode::Idle, Event::PhaseComplete) => (with(Mode::Approaching, s.retry_count, s.finger_open), vec![]),
        (Mode::Approaching, Event::PhaseComplete) => {
            (with(Mode::Grasping, s.retry_count, [false; 4]), vec![Action::CloseAll])
        }
        (Mode::Grasping, Event::Classified(Good)) | (Mode::Holding, Event::Classified(Good)) => {
            (with(Mode::Detaching, s.retry_count, s.finger_open), vec![Action::Detach])
        }
        (Mode::Grasping | Mode::Holding, Event::Classified(Null))
        | (Mode::Grasping | Mode::Holding, Event::Classified(Obstructed(_)))
        | (Mode::Grasping | Mode::Holding, Event::Timeout) => failed(),
        (Mode::Grasping, Event::Classified(BranchInterference(f))) if cfg.recheck_after_release => {
            (with(Mode::Holding, s.retry_count, opened(f)), vec![Action::OpenFinger(f)])
        }
        (Mode::Grasping, Event::Classified(BranchInterference(f))) => (
            with(Mode::Detaching, s.retry_count, opened(f)),
            vec![Action::OpenFinger(f), Action::Detach],
        ),
        (Mode::Holding, Event::Classified(BranchInterference(f))) if s.finger_open[f.index()] => {
            (with(Mode::Detaching, s.retry_count, s.finger_open), vec![Action::Detach])
        }
        (Mode::Holding, Event::Classified(BranchInterference(f))) => (
            with(Mode::Detaching, s.retry_count, opened(f)),
            vec![Action::OpenFinger(f), Action::Detach],
        ),
        (Mode::Detaching, Event::PhaseComplete) => (with(Mode::Releasing, s.retry_count, [true; 4]), vec![Action::OpenAll]),
        (Mode::Releasing, Event::PhaseComplete) => (ControllerState::default(), vec![]),
        _ => (s, vec![]),
    }
}

fn controller_table() -> Outcome {
    let mut problems = Vec::new();
    let mut pairs = 0usize;

    for recheck in [false, true] {
        let cfg = ControllerConfig {
            recheck_after_release: recheck,
            ..Default::default()
        };
        for mode in Mode::ALL {
            for retry in 0..=cfg.max_retries {
                for mask in 0..16u8 {
                    let s = ControllerState {
                        mode,
                        retry_count: retry,
                        finger_open: std::array::from_fn(|f| mask & (1 << f) != 0),
                    };
                    for e in all_events() {
                        pairs += 1;
                        let got = step(s, e, &cfg);
                        if got != golden(s, e, &cfg) {
                            problems.push(format!("{mode} retry {retry} mask {mask} on {e}: {got:?}"));
                        }
                        if got.0.mode == Mode::Releasing && mode != Mode::Releasing && mode != Mode::Detaching {
                            problems.push(format!("releasing reached from {mode}"));
                        }
                    }
                }
            }
        }
    }

    // Liveness and safety on replayed cycles built from benchmark recordings.
    let recs: Vec<GraspRecording<f64>> = generate_benchmark(DEFAULT_BENCHMARK_SEED).map_err(|e| e.to_string())?;
    let est = EstimatorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cycles = 0;
    for max_retries in 0..=3usize {
        for recheck in [false, true] {
            let cfg = ControllerConfig {
                max_retries,
                recheck_after_release: recheck,
                ..Default::default()
            };
            for _ in 0..25 {
                let attempts: Vec<GraspRecording<f64>> =
                    (0..max_retries + 3).map(|_| recs.choose(&mut rng).unwrap().clone()).collect();
                let report = run_cycle(&attempts, &est, &cfg).map_err(|e| e.to_string())?;
                cycles += 1;
                if report.incomplete
                    || !report.final_state.mode.ends_cycle()
                    || report.attempts_used > max_retries + 1
                {
                    problems.push(format!("cycle did not terminate in time:\n{report}"));
                }
                let mut named = Vec::new();
                for entry in &report.entries {
                    if let Event::Classified(GraspState::BranchInterference(f)) = entry.event {
                        named.push(f);
                    }
                    for a in &entry.actions {
                        if let Action::OpenFinger(f) = a {
                            if !named.contains(f) {
                                problems.push(format!("OpenFinger({}) without a branch verdict", f.index()));
                            }
                        }
                    }
                }
            }
        }
    }

    // Safety and the retry bound under arbitrary event streams.
    let cfg = ControllerConfig::default();
    let events = all_events();
    for _ in 0..200 {
        let mut ctl = Controller::new(cfg);
        for _ in 0..200 {
            let e = *events.choose(&mut rng).unwrap();
            let actions = ctl.handle(e);
            for a in actions {
                if let Action::OpenFinger(f) = a {
                    if e != Event::Classified(GraspState::BranchInterference(f)) {
                        problems.push(format!("OpenFinger({}) on {e}", f.index()));
                    }
                }
            }
            if ctl.state().retry_count > cfg.max_retries {
                problems.push("retry bound exceeded".into());
            }
        }
    }

    problems.truncate(5);
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{pairs} (state, event) pairs match the table; {cycles} replayed cycles live and safe")
        } else {
            problems.join("\n    ")
        },
    )
}

fn throughput() -> Outcome {
    let recs: Vec<GraspRecording<f64>> = generate_benchmark(DEFAULT_BENCHMARK_SEED).map_err(|e| e.to_string())?;
    let frames: Vec<&TaxelFrame<f64>> = recs.iter().flat_map(|r| r.frames()).take(4000).collect();
    let mut pipeline = TactilePipeline::new(PipelineConfig::default()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut sink = 0.0;
    for frame in &frames {
        let update = pipeline.push(frame);
        sink += update.finger_max_variance[0];
    }
    let secs = start.elapsed().as_secs_f64();
    let rate = frames.len() as f64 / secs;
    check(
        rate >= 1000.0 && sink.is_finite(),
        format!("{} frames of {TAXEL_COUNT} taxels at {rate:.0} frames/s single-threaded", frames.len()),
    )
}

fn random_recording(rng: &mut ChaCha8Rng) -> GraspRecording<f32> {
    let n = rng.random_range(1..12usize);
    let mut t = rng.random_range(0..1_000_000u64);
    let frames = (0..n)
        .map(|_| {
            t += rng.random_range(1..200);
            TaxelFrame::new(t, (0..TAXEL_COUNT).map(|_| rng.random::<f32>()).collect()).unwrap()
        })
        .collect();
    let mut marks: Vec<usize> = (0..4).map(|_| rng.random_range(0..n)).collect();
    marks.sort_unstable();
    let phases = PhaseMarks {
        approach: marks[0],
        grasp: marks[1],
        hold: marks[2],
        release: marks[3],
    };
    let label = match rng.random_range(0..5) {
        0 => None,
        _ => Some(*all_states().choose(rng).unwrap()),
    };
    let meta = rng.random_bool(0.5).then(|| {
        BTreeMap::from([("note".to_string(), format!("r{}", rng.random::<u16>()))])
    });
    GraspRecording::new(frames, phases, label, meta).unwrap()
}

fn dataset_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let recs: Vec<GraspRecording<f32>> = (0..1000).map(|_| random_recording(&mut rng)).collect();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("round_trip.toml");
    let written = write_dataset(&recs, &path).map_err(|e| e.to_string())?;
    let back = read_dataset_full::<f32>(&path).map_err(|e| e.to_string())?;
    let crc = payload_crc32(&payload_path_for(&path)).map_err(|e| e.to_string())?;
    let frames: usize = recs.iter().map(|r| r.len()).sum();
    let bit_exact = back.recordings.len() == recs.len()
        && back.recordings.iter().zip(&recs).all(|(a, b)| {
            a.phases() == b.phases()
                && a.label() == b.label()
                && a.meta() == b.meta()
                && a.frames().iter().zip(b.frames()).all(|(x, y)| {
                    x.timestamp_ms() == y.timestamp_ms()
                        && x.values().iter().zip(y.values()).all(|(p, q)| p.to_bits() == q.to_bits())
                })
                && a.len() == b.len()
        });
    let crc_ok = format!("{crc:08x}") == written.payload_crc32 && back.manifest == written;
    check(
        bit_exact && crc_ok,
        format!("1000 recordings / {frames} frames, bit-exact {bit_exact}, crc32 {crc:08x} verified {crc_ok}"),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("streaming vs batch windows", streaming_matches_batch),
        ("ogden material model", ogden_model),
        ("noiseless separability", noiseless_separability),
        ("seeded default benchmark", seeded_benchmark),
        ("controller transition table", controller_table),
        ("pipeline throughput", throughput),
        ("dataset round-trip", dataset_round_trip),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
