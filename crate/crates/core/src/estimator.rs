//! Threshold classifier over moving-variance features.
//!
//! Decision order, first match wins:
//!
//! 1. every finger's max variance below `null_threshold` → `Null`;
//! 2. contact onsets spread by more than `obstruct_spread` frames, or some
//!    fingers made contact while others never did → `Obstructed` on the
//!    earliest finger;
//! 3. one finger's max variance exceeds `branch_ratio` × the median of the
//!    other three → `BranchInterference` on that finger;
//! 4. otherwise `Good`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::{GraspClass, GraspState};
use crate::layout::{Finger, FINGER_COUNT};
use crate::pipeline::{extract_features, finger_argmax, PipelineConfig, PipelineFeatures};
use crate::recording::GraspRecording;
use crate::scalar::Scalar;

// Calibrated on `generate_benchmark(DEFAULT_BENCHMARK_SEED)` with the default
// grid; `shipped_defaults_match_benchmark_calibration` keeps them in sync.
pub const DEFAULT_NULL_THRESHOLD: f64 = 0.0031622776601683794;
pub const DEFAULT_ONSET_THRESHOLD: f64 = 0.0007905694150420948;
pub const DEFAULT_OBSTRUCT_SPREAD: usize = 4;
pub const DEFAULT_BRANCH_RATIO: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T> {
    /// Variance below which no finger is considered in contact.
    pub null_threshold: T,
    /// Per-finger variance level marking contact onset.
    pub onset_threshold: T,
    /// Largest tolerated onset spread, in frames, for a synchronized grasp.
    pub obstruct_spread: usize,
    /// Ratio of one finger's max variance to the median of the others.
    pub branch_ratio: T,
}

impl<T: Scalar> Default for EstimatorConfig<T> {
    fn default() -> Self {
        EstimatorConfig {
            null_threshold: T::lit(DEFAULT_NULL_THRESHOLD),
            onset_threshold: T::lit(DEFAULT_ONSET_THRESHOLD),
            obstruct_spread: DEFAULT_OBSTRUCT_SPREAD,
            branch_ratio: T::lit(DEFAULT_BRANCH_RATIO),
        }
    }
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.null_threshold, self.onset_threshold, self.branch_ratio]
            .iter()
            .all(|v| *v > T::zero() && v.is_finite());
        if !positive {
            return Err(Error::Config("estimator thresholds must be finite and > 0".into()));
        }
        if self.obstruct_spread < 1 {
            return Err(Error::Config("obstruct_spread must be >= 1 frame".into()));
        }
        Ok(())
    }

    /// The pipeline configuration whose onset threshold matches this estimator.
    pub fn pipeline_config(&self) -> PipelineConfig<T> {
        PipelineConfig {
            onset_threshold: self.onset_threshold,
            ..PipelineConfig::default()
        }
    }
}

impl<T: Scalar + Serialize + DeserializeOwned> EstimatorConfig<T> {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("cannot serialize estimator config: {e}")))
    }

    /// Parses and validates a TOML estimator config.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Format(format!("bad estimator config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// Per-recording quantities the decision rule reads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionInputs<T> {
    pub max_variance: T,
    /// Finger with the largest max variance (ties to the lowest index).
    pub loudest: Finger,
    /// `per_finger_max[loudest] / median(others)`; infinite when the median is 0.
    pub branch_ratio: T,
    pub onsets: [Option<usize>; FINGER_COUNT],
    spread: Option<usize>,
    earliest: Option<Finger>,
}

impl<T: Scalar> DecisionInputs<T> {
    pub fn new(per_finger_max: &[T; FINGER_COUNT], onsets: [Option<usize>; FINGER_COUNT]) -> Self {
        let loudest = finger_argmax(per_finger_max);
        let mut others: Vec<T> = (0..FINGER_COUNT)
            .filter(|&f| f != loudest.index())
            .map(|f| per_finger_max[f])
            .collect();
        others.sort_by(|a, b| a.partial_cmp(b).expect("variances are not NaN"));
        let median = others[1];
        let top = per_finger_max[loudest.index()];
        let branch_ratio = if median > T::zero() {
            top / median
        } else if top > T::zero() {
            T::infinity()
        } else {
            T::zero()
        };
        let seen = onsets.iter().flatten().count();
        let spread = match seen {
            0 => None,
            n if n < FINGER_COUNT => Some(usize::MAX),
            _ => {
                let lo = onsets.iter().flatten().min().unwrap();
                let hi = onsets.iter().flatten().max().unwrap();
                Some(hi - lo)
            }
        };
        let earliest = onsets
            .iter()
            .enumerate()
            .filter_map(|(f, o)| o.map(|t| (t, f)))
            .min()
            .map(|(_, f)| Finger::ALL[f]);
        DecisionInputs {
            max_variance: top,
            loudest,
            branch_ratio,
            onsets,
            spread,
            earliest,
        }
    }

    /// Onset spread in frames; `None` when no finger has an onset, and
    /// `usize::MAX` when some fingers have one and others do not.
    pub fn onset_spread(&self) -> Option<usize> {
        self.spread
    }

    /// Finger with the first onset, ties to the lowest index.
    pub fn earliest_onset(&self) -> Option<Finger> {
        self.earliest
    }
}

/// The fixed decision order applied to precomputed inputs.
pub fn decide<T: Scalar>(inputs: &DecisionInputs<T>, cfg: &EstimatorConfig<T>) -> GraspState {
    if inputs.max_variance < cfg.null_threshold {
        return GraspState::Null;
    }
    if let (Some(spread), Some(first)) = (inputs.onset_spread(), inputs.earliest_onset()) {
        if spread > cfg.obstruct_spread {
            return GraspState::Obstructed(first);
        }
    }
    if inputs.branch_ratio > cfg.branch_ratio {
        return GraspState::BranchInterference(inputs.loudest);
    }
    GraspState::Good
}

pub fn classify<T: Scalar>(features: &PipelineFeatures<T>, cfg: &EstimatorConfig<T>) -> Result<GraspState> {
    if features.frame_count() == 0 || features.span.is_empty() {
        return Err(Error::Argument("features cover zero frames".into()));
    }
    let inputs = DecisionInputs::new(&features.per_finger_max, features.onsets(cfg.onset_threshold));
    Ok(decide(&inputs, cfg))
}

/// Finger with the largest max variance; ties go to the lowest index.
pub fn localize_branch_finger<T: Scalar>(per_finger_max: &[T; FINGER_COUNT]) -> Finger {
    finger_argmax(per_finger_max)
}

/// Candidate values searched by [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrid {
    pub null_thresholds: Vec<f64>,
    /// Onset threshold as a fraction of the null threshold.
    pub onset_fractions: Vec<f64>,
    pub obstruct_spreads: Vec<usize>,
    pub branch_ratios: Vec<f64>,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        // Thresholds log-spaced at 8 per decade over [1e-6, 1e-1].
        let null_thresholds = (0..=40).map(|i| 10f64.powf(-6.0 + i as f64 / 8.0)).collect();
        CalibrationGrid {
            null_thresholds,
            onset_fractions: vec![0.125, 0.25, 0.5, 1.0],
            obstruct_spreads: (1..=20).collect(),
            branch_ratios: (0..=36).map(|i| 1.5 + 0.25 * i as f64).collect(),
        }
    }
}

/// Result of a calibration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<T> {
    pub config: EstimatorConfig<T>,
    /// Macro-averaged per-class accuracy of `config` on the calibration set.
    pub macro_accuracy: f64,
    pub per_class_accuracy: [f64; 4],
}

/// Grid search maximizing macro-averaged per-class accuracy.
pub fn calibrate<T: Scalar>(
    labeled: &[GraspRecording<T>],
    pipeline: &PipelineConfig<T>,
) -> Result<Calibration<T>> {
    calibrate_with(labeled, pipeline, &CalibrationGrid::default())
}

pub fn calibrate_with<T: Scalar>(
    labeled: &[GraspRecording<T>],
    pipeline: &PipelineConfig<T>,
    grid: &CalibrationGrid,
) -> Result<Calibration<T>> {
    let mut samples = Vec::with_capacity(labeled.len());
    for (i, rec) in labeled.iter().enumerate() {
        let label = rec
            .label()
            .ok_or_else(|| Error::Calibration(format!("recording {i} has no label")))?;
        samples.push((extract_features(rec, pipeline)?, label));
    }
    calibrate_features(&samples, grid)
}

/// Grid search over precomputed features.
///
/// Ties on the score are broken towards the configuration nearest (in grid
/// index space) to the per-axis median of all tied configurations, so the
/// result sits inside the optimal plateau rather than on its edge.
pub fn calibrate_features<T: Scalar>(
    samples: &[(PipelineFeatures<T>, GraspState)],
    grid: &CalibrationGrid,
) -> Result<Calibration<T>> {
    let mut counts = [0usize; 4];
    for (_, label) in samples {
        counts[label.class().index()] += 1;
    }
    let absent: Vec<&str> = GraspClass::ALL
        .iter()
        .filter(|c| counts[c.index()] == 0)
        .map(|c| c.name())
        .collect();
    if !absent.is_empty() {
        return Err(Error::Calibration(format!(
            "labeled set lacks classes: {}",
            absent.join(", ")
        )));
    }
    if grid.null_thresholds.is_empty()
        || grid.onset_fractions.is_empty()
        || grid.obstruct_spreads.is_empty()
        || grid.branch_ratios.is_empty()
    {
        return Err(Error::Calibration("calibration grid has an empty axis".into()));
    }

    let mut best_score = -1.0f64;
    let mut tied: Vec<[usize; 4]> = Vec::new();
    let mut inputs = Vec::with_capacity(samples.len());
    for (i_null, &t_null) in grid.null_thresholds.iter().enumerate() {
        for (i_onset, &frac) in grid.onset_fractions.iter().enumerate() {
            let t_onset = T::lit(t_null * frac);
            inputs.clear();
            inputs.extend(
                samples
                    .iter()
                    .map(|(f, _)| DecisionInputs::new(&f.per_finger_max, f.onsets(t_onset))),
            );
            for (i_spread, &spread) in grid.obstruct_spreads.iter().enumerate() {
                for (i_ratio, &ratio) in grid.branch_ratios.iter().enumerate() {
                    let cfg = EstimatorConfig {
                        null_threshold: T::lit(t_null),
                        onset_threshold: t_onset,
                        obstruct_spread: spread,
                        branch_ratio: T::lit(ratio),
                    };
                    let score = macro_accuracy(&inputs, samples, &counts, &cfg).0;
                    if score > best_score {
                        best_score = score;
                        tied.clear();
                    }
                    if score == best_score {
                        tied.push([i_null, i_onset, i_spread, i_ratio]);
                    }
                }
            }
        }
    }

    let centre: [usize; 4] = std::array::from_fn(|axis| {
        let mut v: Vec<usize> = tied.iter().map(|t| t[axis]).collect();
        v.sort_unstable();
        v[v.len() / 2]
    });
    let pick = tied
        .iter()
        .min_by_key(|t| (0..4).map(|a| t[a].abs_diff(centre[a])).sum::<usize>())
        .expect("grid is nonempty");
    let t_null = grid.null_thresholds[pick[0]];
    let config = EstimatorConfig {
        null_threshold: T::lit(t_null),
        onset_threshold: T::lit(t_null * grid.onset_fractions[pick[1]]),
        obstruct_spread: grid.obstruct_spreads[pick[2]],
        branch_ratio: T::lit(grid.branch_ratios[pick[3]]),
    };
    let final_inputs: Vec<_> = samples
        .iter()
        .map(|(f, _)| DecisionInputs::new(&f.per_finger_max, f.onsets(config.onset_threshold)))
        .collect();
    let (macro_acc, per_class) = macro_accuracy(&final_inputs, samples, &counts, &config);
    Ok(Calibration {
        config,
        macro_accuracy: macro_acc,
        per_class_accuracy: per_class,
    })
}

fn macro_accuracy<T: Scalar>(
    inputs: &[DecisionInputs<T>],
    samples: &[(PipelineFeatures<T>, GraspState)],
    counts: &[usize; 4],
    cfg: &EstimatorConfig<T>,
) -> (f64, [f64; 4]) {
    let mut correct = [0usize; 4];
    for (inp, (_, label)) in inputs.iter().zip(samples) {
        if decide(inp, cfg) == *label {
            correct[label.class().index()] += 1;
        }
    }
    let per_class: [f64; 4] = std::array::from_fn(|c| correct[c] as f64 / counts[c] as f64);
    (per_class.iter().sum::<f64>() / 4.0, per_class)
}
