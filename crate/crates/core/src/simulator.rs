//! Seeded synthesis of labeled grasp recordings.
//!
//! Pressures are phenomenological: each finger's fruit contact is an
//! elliptical Gaussian patch on the distal half of the finger plus a weaker
//! band at the hinge end, scaled by the Ogden nominal stress at the finger's
//! current indentation stretch. Stretch follows a logistic ramp starting at
//! the finger's contact frame. A branch caught under a finger adds a narrow
//! ridge one array tall, 2 to 4× the fruit peak, rising twice as fast. An
//! obstructed finger touches down early and plateaus while the other fingers
//! arrive later or never.
//!
//! All values are normalized pressures: 0 is no load, 1 is 20 N. Contact
//! loads under the 0.2 N detection floor read as zero. Frame values are
//! rounded to `f32` so recordings survive a dataset round trip unchanged.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::TaxelFrame;
use crate::grasp::GraspState;
use crate::layout::{
    Finger, FingerLayout, ARRAY_SIDE, ARRAYS_PER_FINGER, FINGER_COLS, FINGER_COUNT,
    FRAME_COLS, FRAME_INTERVAL_MS, FRAME_ROWS, TAXEL_COUNT,
};
use crate::material::OgdenParams;
use crate::recording::{GraspRecording, PhaseMarks};
use crate::scalar::Scalar;

/// 0.2 N out of the 20 N full scale.
pub const DETECTION_FLOOR: f64 = 0.2 / 20.0;
/// Seed of the default 200-recording benchmark.
pub const DEFAULT_BENCHMARK_SEED: u64 = 20_220_301;

/// Fruit-patch pressure produced by the reference stretch.
const REFERENCE_PRESSURE: f64 = 0.4;
const REFERENCE_STRETCH: f64 = 1.3;
const PATCH_SIGMA_ROWS: f64 = 3.0;
const PATCH_SIGMA_COLS: f64 = 1.5;
const HINGE_FRACTION: f64 = 0.2;
const RIDGE_SIGMA_ROWS: f64 = 0.8;
const CROSSTALK: f64 = 0.05;

/// Rectangle of taxels in frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaxelRect {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TaxelRect {
    /// The full-width band covering sensor array `array` of `finger`.
    pub fn array_band(finger: Finger, array: usize) -> Self {
        TaxelRect {
            row: array * ARRAY_SIDE,
            col: finger.index() * FINGER_COLS,
            rows: ARRAY_SIDE,
            cols: FINGER_COLS,
        }
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row..self.row + self.rows).contains(&row) && (self.col..self.col + self.cols).contains(&col)
    }

    fn centre_row(&self) -> f64 {
        self.row as f64 + (self.rows as f64 - 1.0) / 2.0
    }
}

/// Everything needed to synthesize one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: GraspState,
    pub phases: PhaseMarks,
    pub frame_count: usize,
    /// Frame at which each finger starts loading; `None` if it never touches.
    pub contact_frame: [Option<usize>; FINGER_COUNT],
    /// Peak indentation stretch λ ≥ 1 per finger.
    pub grasp_depth: [f64; FINGER_COUNT],
    /// Rise time of each finger's logistic ramp, in frames.
    pub rise_frames: [f64; FINGER_COUNT],
    /// Centre row of each finger's contact patch.
    pub patch_row: [f64; FINGER_COUNT],
    /// Stress-concentration ridge of a branch scenario.
    pub branch_patch: Option<TaxelRect>,
    /// Ridge amplitude relative to the fruit-patch peak.
    pub ridge_gain: f64,
    /// Gaussian sd on normalized values.
    pub noise_sd: f64,
    /// Resting reading of an unloaded taxel.
    pub baseline: f64,
    /// Short low-amplitude transients from leaves brushing the fingers.
    pub leaf_blips: usize,
    /// Peak amplitude of the strongest possible leaf transient.
    pub leaf_amplitude: f64,
    /// Mix 5% of the four nearest neighbours into each taxel.
    pub crosstalk: bool,
    pub seed: u64,
}

impl ScenarioSpec {
    /// A clean, noise-free spec with fixed timing and geometry.
    pub fn nominal(scenario: GraspState) -> Self {
        let phases = PhaseMarks {
            approach: 0,
            grasp: 10,
            hold: 40,
            release: 52,
        };
        let contact = match scenario {
            GraspState::Null => [None; FINGER_COUNT],
            GraspState::Good | GraspState::BranchInterference(_) => [Some(14); FINGER_COUNT],
            GraspState::Obstructed(f) => {
                std::array::from_fn(|i| Some(if i == f.index() { 12 } else { 30 }))
            }
        };
        let mut depth = [1.3; FINGER_COUNT];
        let mut rise = [8.0; FINGER_COUNT];
        if let GraspState::Obstructed(f) = scenario {
            // the blocked finger strikes the obstacle and stops short
            depth[f.index()] = 1.2;
            rise[f.index()] = 2.0;
        }
        ScenarioSpec {
            scenario,
            phases,
            frame_count: 62,
            contact_frame: contact,
            grasp_depth: depth,
            rise_frames: rise,
            patch_row: [16.5; FINGER_COUNT],
            branch_patch: match scenario {
                GraspState::BranchInterference(f) => Some(TaxelRect::array_band(f, 3)),
                _ => None,
            },
            ridge_gain: 3.0,
            noise_sd: 0.0,
            baseline: 0.02,
            leaf_blips: 0,
            leaf_amplitude: 0.08,
            crosstalk: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        self.phases.validate(self.frame_count)?;
        if let Some(c) = self.contact_frame.iter().flatten().find(|&&c| c >= self.frame_count) {
            return bad(format!("contact frame {c} beyond {} frames", self.frame_count));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if !(0.0..=0.5).contains(&self.baseline) {
            return bad(format!("baseline {} outside [0, 0.5]", self.baseline));
        }
        if self.grasp_depth.iter().any(|d| !(*d >= 1.0 && d.is_finite())) {
            return bad(format!("grasp depths must be >= 1, got {:?}", self.grasp_depth));
        }
        if self.rise_frames.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad(format!("rise times must be > 0, got {:?}", self.rise_frames));
        }
        if !(0.0..=1.0).contains(&self.leaf_amplitude) {
            return bad(format!("leaf amplitude {} outside [0, 1]", self.leaf_amplitude));
        }
        if !(self.ridge_gain >= 0.0 && self.ridge_gain.is_finite()) {
            return bad(format!("ridge gain must be >= 0, got {}", self.ridge_gain));
        }
        let all_touch = self.contact_frame.iter().all(Option::is_some);
        match self.scenario {
            GraspState::Null => {
                if self.contact_frame.iter().any(Option::is_some) {
                    return bad("null scenario cannot have finger contact".into());
                }
            }
            GraspState::Good | GraspState::BranchInterference(_) => {
                if !all_touch {
                    return bad(format!("{} scenario needs contact on all fingers", self.scenario));
                }
            }
            GraspState::Obstructed(f) => {
                let Some(first) = self.contact_frame[f.index()] else {
                    return bad("obstructed finger must make contact".into());
                };
                let early = Finger::ALL
                    .iter()
                    .filter(|&&g| g != f)
                    .filter_map(|g| self.contact_frame[g.index()])
                    .any(|c| c <= first);
                if early {
                    return bad("obstructed finger must touch strictly first".into());
                }
            }
        }
        match (self.scenario, self.branch_patch) {
            (GraspState::BranchInterference(f), Some(rect)) => {
                let cols = FingerLayout.column_span(f);
                let inside = rect.rows > 0
                    && rect.cols > 0
                    && rect.row + rect.rows <= FRAME_ROWS
                    && rect.col >= cols.start
                    && rect.col + rect.cols <= cols.end;
                if !inside {
                    return bad(format!("branch patch {rect:?} outside finger {f}"));
                }
            }
            (GraspState::BranchInterference(_), None) => {
                return bad("branch scenario needs a branch patch".into())
            }
            (_, Some(_)) => return bad("branch patch given for a non-branch scenario".into()),
            (_, None) => {}
        }
        Ok(())
    }

    /// Scenario parameters as manifest metadata.
    pub fn to_meta(&self) -> BTreeMap<String, String> {
        let join = |xs: Vec<String>| xs.join(",");
        let mut m = BTreeMap::new();
        m.insert("scenario".into(), self.scenario.to_string());
        m.insert(
            "contact_frame".into(),
            join(self
                .contact_frame
                .iter()
                .map(|c| c.map_or("-".to_string(), |c| c.to_string()))
                .collect()),
        );
        m.insert("grasp_depth".into(), join(self.grasp_depth.iter().map(|d| format!("{d:.4}")).collect()));
        m.insert("rise_frames".into(), join(self.rise_frames.iter().map(|d| format!("{d:.3}")).collect()));
        m.insert("patch_row".into(), join(self.patch_row.iter().map(|d| format!("{d:.3}")).collect()));
        if let Some(r) = self.branch_patch {
            m.insert("branch_patch".into(), format!("{},{},{},{}", r.row, r.col, r.rows, r.cols));
            m.insert("ridge_gain".into(), format!("{:.4}", self.ridge_gain));
        }
        m.insert("noise_sd".into(), format!("{}", self.noise_sd));
        m.insert("baseline".into(), format!("{}", self.baseline));
        m.insert("leaf_blips".into(), self.leaf_blips.to_string());
        m.insert("leaf_amplitude".into(), format!("{}", self.leaf_amplitude));
        m.insert("crosstalk".into(), self.crosstalk.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m
    }
}

/// Normalized logistic ramp: exactly 0 before `start`, → 1 after `start + rise`.
fn ramp(t: f64, start: f64, rise: f64) -> f64 {
    if t < start {
        return 0.0;
    }
    let k = 8.0 / rise;
    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    let floor = logistic(-k * rise / 2.0);
    ((logistic(k * (t - start - rise / 2.0)) - floor) / (1.0 - floor)).clamp(0.0, 1.0)
}

struct Blip {
    finger: usize,
    row: f64,
    col: f64,
    start: usize,
    amplitude: f64,
}

const BLIP_PROFILE: [f64; 3] = [0.5, 1.0, 0.5];

/// Synthesizes the recording described by `spec`.
pub fn synthesize_grasp<T: Scalar>(spec: &ScenarioSpec) -> Result<GraspRecording<T>> {
    synthesize_with(spec, &OgdenParams::ninjaflex())
}

pub fn synthesize_with<T: Scalar>(spec: &ScenarioSpec, material: &OgdenParams<f64>) -> Result<GraspRecording<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stress_scale = REFERENCE_PRESSURE / material.uniaxial_nominal_stress(REFERENCE_STRETCH)?;

    // Spatial weights of each finger's fruit patch, in finger-local coordinates.
    let patch: Vec<[f64; FRAME_ROWS * FINGER_COLS]> = (0..FINGER_COUNT)
        .map(|f| {
            std::array::from_fn(|i| {
                let (r, c) = ((i / FINGER_COLS) as f64, (i % FINGER_COLS) as f64);
                let dr = (r - spec.patch_row[f]) / PATCH_SIGMA_ROWS;
                let dc = (c - 1.5) / PATCH_SIGMA_COLS;
                let hinge = if r < 2.0 { HINGE_FRACTION * (-0.5 * dc * dc).exp() } else { 0.0 };
                (-0.5 * (dr * dr + dc * dc)).exp() + hinge
            })
        })
        .collect();
    let ridge_weight = |r: usize, c: usize| -> f64 {
        match spec.branch_patch {
            Some(rect) if (rect.col..rect.col + rect.cols).contains(&c) => {
                let dr = (r as f64 - rect.centre_row()) / RIDGE_SIGMA_ROWS;
                (-0.5 * dr * dr).exp()
            }
            _ => 0.0,
        }
    };

    let blips: Vec<Blip> = (0..spec.leaf_blips)
        .map(|_| Blip {
            finger: rng.random_range(0..FINGER_COUNT),
            row: rng.random_range(0.0..FRAME_ROWS as f64),
            col: rng.random_range(0.0..FINGER_COLS as f64),
            start: rng.random_range(spec.phases.grasp..spec.phases.hold.max(spec.phases.grasp + 1)),
            amplitude: spec.leaf_amplitude * rng.random_range(0.5..1.0),
        })
        .collect();
    let noise = Normal::new(0.0, spec.noise_sd.max(f64::MIN_POSITIVE)).expect("finite sd");
    let release = spec.phases.release as f64;

    let mut frames = Vec::with_capacity(spec.frame_count);
    let mut load = vec![0.0f64; TAXEL_COUNT];
    for t in 0..spec.frame_count {
        let tf = t as f64;
        let mut fruit = [0.0; FINGER_COUNT];
        let mut ridge = 0.0;
        for f in 0..FINGER_COUNT {
            let Some(c) = spec.contact_frame[f] else { continue };
            let rise = spec.rise_frames[f];
            let hold = 1.0 - ramp(tf, release, rise / 2.0);
            let stretch = 1.0 + (spec.grasp_depth[f] - 1.0) * ramp(tf, c as f64, rise) * hold;
            fruit[f] = stress_scale * material.uniaxial_nominal_stress(stretch)?;
            if matches!(spec.scenario, GraspState::BranchInterference(b) if b.index() == f) {
                let peak = stress_scale * material.uniaxial_nominal_stress(spec.grasp_depth[f])?;
                ridge = spec.ridge_gain * peak * ramp(tf, c as f64, rise / 2.0) * hold;
            }
        }

        for (i, slot) in load.iter_mut().enumerate() {
            let (r, c) = (i / FRAME_COLS, i % FRAME_COLS);
            let f = c / FINGER_COLS;
            let lc = c % FINGER_COLS;
            let mut p = fruit[f] * patch[f][r * FINGER_COLS + lc];
            if ridge > 0.0 {
                p += ridge * ridge_weight(r, c);
            }
            for b in blips.iter().filter(|b| b.finger == f) {
                if let Some(k) = t.checked_sub(b.start).filter(|k| *k < BLIP_PROFILE.len()) {
                    let dr = r as f64 - b.row;
                    let dc = lc as f64 - b.col;
                    p += b.amplitude * BLIP_PROFILE[k] * (-0.5 * (dr * dr + dc * dc)).exp();
                }
            }
            *slot = p;
        }
        if spec.crosstalk {
            let mixed: Vec<f64> = (0..TAXEL_COUNT)
                .map(|i| {
                    let (r, c) = (i / FRAME_COLS, i % FRAME_COLS);
                    let mut n = 0.0;
                    if r > 0 { n += load[i - FRAME_COLS]; }
                    if r + 1 < FRAME_ROWS { n += load[i + FRAME_COLS]; }
                    if c > 0 { n += load[i - 1]; }
                    if c + 1 < FRAME_COLS { n += load[i + 1]; }
                    load[i] + CROSSTALK * n
                })
                .collect();
            load.copy_from_slice(&mixed);
        }

        let values = load
            .iter()
            .map(|&p| {
                let p = if p < DETECTION_FLOOR { 0.0 } else { p };
                let eps = if spec.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                let v = (spec.baseline + p + eps).clamp(0.0, 1.0);
                T::lit(v as f32 as f64)
            })
            .collect();
        frames.push(TaxelFrame::new(t as u64 * FRAME_INTERVAL_MS, values)?);
    }
    GraspRecording::new(frames, spec.phases, Some(spec.scenario), Some(spec.to_meta()))
}

/// Ranges the benchmark draws nuisance parameters from.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceRanges {
    /// Frames before the grasp command (inclusive range).
    pub approach_frames: (usize, usize),
    pub grasp_frames: usize,
    pub hold_frames: usize,
    pub release_frames: usize,
    /// Frames between the grasp command and fruit contact (inclusive).
    pub contact_delay: (usize, usize),
    /// Max per-finger onset jitter of a synchronized grasp (inclusive).
    pub onset_jitter: usize,
    pub depth: (f64, f64),
    /// Per-finger multiplicative spread of (λ − 1): factor in `[1 − s, 1 + s]`.
    pub depth_spread: f64,
    /// Probability that an off-centre fruit loads one finger harder and faster.
    pub dominant_prob: f64,
    /// Multiplier on (λ − 1) of the dominant finger.
    pub dominant_gain: (f64, f64),
    /// Multiplier on the dominant finger's rise time.
    pub dominant_rise: (f64, f64),
    pub rise: (f64, f64),
    pub patch_row: (f64, f64),
    pub ridge_gain: (f64, f64),
    /// Multiplier on (λ − 1) of the branch finger, which the branch holds
    /// off the fruit.
    pub branch_standoff: (f64, f64),
    /// Sensor arrays (along the finger) the branch ridge may sit on.
    pub ridge_arrays: (usize, usize),
    /// Frames by which the obstructed finger precedes the others (inclusive).
    pub obstruct_lag: (usize, usize),
    /// Probability that the other fingers never reach the fruit.
    pub obstruct_miss_prob: f64,
    pub noise_sd: (f64, f64),
    pub leaf_blips: (usize, usize),
    pub leaf_amplitude: f64,
    pub crosstalk: bool,
}

impl NuisanceRanges {
    /// The default benchmark difficulty.
    pub fn benchmark() -> Self {
        NuisanceRanges {
            approach_frames: (8, 12),
            grasp_frames: 30,
            hold_frames: 12,
            release_frames: 10,
            contact_delay: (3, 8),
            onset_jitter: 1,
            depth: (1.2, 1.45),
            depth_spread: 0.25,
            dominant_prob: 0.9,
            dominant_gain: (2.5, 6.0),
            dominant_rise: (0.3, 0.7),
            rise: (6.0, 10.0),
            patch_row: (14.0, 19.0),
            ridge_gain: (2.0, 4.0),
            branch_standoff: (0.8, 1.0),
            ridge_arrays: (1, 4),
            obstruct_lag: (4, 22),
            obstruct_miss_prob: 0.25,
            noise_sd: (0.01, 0.02),
            leaf_blips: (2, 5),
            leaf_amplitude: 0.12,
            crosstalk: false,
        }
    }

    /// Noise-free, jitter-free ranges: every class is separable.
    pub fn clean() -> Self {
        NuisanceRanges {
            onset_jitter: 0,
            depth: (1.25, 1.35),
            depth_spread: 0.0,
            dominant_prob: 0.0,
            branch_standoff: (1.0, 1.0),
            obstruct_lag: (12, 22),
            obstruct_miss_prob: 0.0,
            noise_sd: (0.0, 0.0),
            ..Self::benchmark()
        }
    }

    /// Ranges as manifest provenance entries.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(format!("range.{k}"), v);
        };
        put("approach_frames", format!("{}..={}", self.approach_frames.0, self.approach_frames.1));
        put("grasp_frames", self.grasp_frames.to_string());
        put("hold_frames", self.hold_frames.to_string());
        put("release_frames", self.release_frames.to_string());
        put("contact_delay", format!("{}..={}", self.contact_delay.0, self.contact_delay.1));
        put("onset_jitter", self.onset_jitter.to_string());
        put("depth", format!("{}..{}", self.depth.0, self.depth.1));
        put("depth_spread", self.depth_spread.to_string());
        put("dominant_prob", self.dominant_prob.to_string());
        put("dominant_gain", format!("{}..{}", self.dominant_gain.0, self.dominant_gain.1));
        put("dominant_rise", format!("{}..{}", self.dominant_rise.0, self.dominant_rise.1));
        put("rise", format!("{}..{}", self.rise.0, self.rise.1));
        put("patch_row", format!("{}..{}", self.patch_row.0, self.patch_row.1));
        put("ridge_gain", format!("{}..{}", self.ridge_gain.0, self.ridge_gain.1));
        put("branch_standoff", format!("{}..{}", self.branch_standoff.0, self.branch_standoff.1));
        put("ridge_arrays", format!("{}..={}", self.ridge_arrays.0, self.ridge_arrays.1));
        put("obstruct_lag", format!("{}..={}", self.obstruct_lag.0, self.obstruct_lag.1));
        put("obstruct_miss_prob", self.obstruct_miss_prob.to_string());
        put("noise_sd", format!("{}..{}", self.noise_sd.0, self.noise_sd.1));
        put("leaf_blips", format!("{}..={}", self.leaf_blips.0, self.leaf_blips.1));
        put("leaf_amplitude", self.leaf_amplitude.to_string());
        put("crosstalk", self.crosstalk.to_string());
        m
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn uniform_int(rng: &mut impl Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

/// Draws a spec for `scenario` from `ranges`.
///
/// `with_leaves` only matters for null grasps.
pub fn sample_spec(
    scenario: GraspState,
    with_leaves: bool,
    ranges: &NuisanceRanges,
    rng: &mut impl Rng,
) -> ScenarioSpec {
    let approach = uniform_int(rng, ranges.approach_frames);
    let phases = PhaseMarks {
        approach: 0,
        grasp: approach,
        hold: approach + ranges.grasp_frames,
        release: approach + ranges.grasp_frames + ranges.hold_frames,
    };
    let frame_count = phases.release + ranges.release_frames;
    let base_contact = phases.grasp + uniform_int(rng, ranges.contact_delay);
    let base_depth = uniform(rng, ranges.depth);
    let base_rise = uniform(rng, ranges.rise);

    let mut depth: [f64; FINGER_COUNT] = std::array::from_fn(|_| {
        let s = ranges.depth_spread;
        1.0 + (base_depth - 1.0) * uniform(rng, (1.0 - s, 1.0 + s))
    });
    let mut rise: [f64; FINGER_COUNT] = std::array::from_fn(|_| base_rise * uniform(rng, (0.9, 1.1)));
    let patch_row: [f64; FINGER_COUNT] = std::array::from_fn(|_| uniform(rng, ranges.patch_row));
    let mut contact: [Option<usize>; FINGER_COUNT] = std::array::from_fn(|_| {
        Some(base_contact + uniform_int(rng, (0, ranges.onset_jitter)))
    });

    if matches!(scenario, GraspState::Good | GraspState::BranchInterference(_))
        && rng.random::<f64>() < ranges.dominant_prob
    {
        let f = rng.random_range(0..FINGER_COUNT);
        depth[f] = 1.0 + (depth[f] - 1.0) * uniform(rng, ranges.dominant_gain);
        rise[f] *= uniform(rng, ranges.dominant_rise);
    }

    let mut branch_patch = None;
    let mut ridge_gain = 0.0;
    let mut leaf_blips = 0;
    match scenario {
        GraspState::Null => {
            contact = [None; FINGER_COUNT];
            if with_leaves {
                leaf_blips = uniform_int(rng, ranges.leaf_blips);
            }
        }
        GraspState::Good => {}
        GraspState::BranchInterference(f) => {
            let array = uniform_int(rng, ranges.ridge_arrays).min(ARRAYS_PER_FINGER - 1);
            branch_patch = Some(TaxelRect::array_band(f, array));
            ridge_gain = uniform(rng, ranges.ridge_gain);
            let b = f.index();
            depth[b] = 1.0 + (depth[b] - 1.0) * uniform(rng, ranges.branch_standoff);
        }
        GraspState::Obstructed(f) => {
            let lag = uniform_int(rng, ranges.obstruct_lag);
            let early = phases.grasp + uniform_int(rng, (1, 3));
            let miss = rng.random::<f64>() < ranges.obstruct_miss_prob;
            let latest = phases.hold - 1;
            for g in 0..FINGER_COUNT {
                contact[g] = if g == f.index() {
                    Some(early)
                } else if miss {
                    None
                } else {
                    let jitter = uniform_int(rng, (0, ranges.onset_jitter));
                    Some((early + lag + jitter).min(latest))
                };
            }
            // stopped against a stiff obstacle: shallow and abrupt
            depth[f.index()] = 1.0 + (base_depth - 1.0) * uniform(rng, (0.5, 0.9));
        }
    }

    ScenarioSpec {
        scenario,
        phases,
        frame_count,
        contact_frame: contact,
        grasp_depth: depth,
        rise_frames: rise,
        patch_row,
        branch_patch,
        ridge_gain,
        noise_sd: uniform(rng, ranges.noise_sd),
        baseline: 0.02,
        leaf_blips,
        leaf_amplitude: ranges.leaf_amplitude,
        crosstalk: ranges.crosstalk,
        seed: rng.random(),
    }
}

/// Per-recording RNG: ChaCha8 keyed by the dataset seed, one stream per index.
pub fn recording_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Class mix of a benchmark, in recording order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkMix {
    pub null_without_leaves: usize,
    pub null_with_leaves: usize,
    pub obstructed: usize,
    pub good: usize,
    pub branch_per_finger: usize,
}

impl BenchmarkMix {
    /// 30 null (15 with leaves), 26 obstructed, 48 good, 96 branch (24 per finger).
    pub const TABLE: BenchmarkMix = BenchmarkMix {
        null_without_leaves: 15,
        null_with_leaves: 15,
        obstructed: 26,
        good: 48,
        branch_per_finger: 24,
    };

    pub fn balanced(per_class: usize) -> Self {
        BenchmarkMix {
            null_without_leaves: per_class - per_class / 2,
            null_with_leaves: per_class / 2,
            obstructed: per_class,
            good: per_class,
            branch_per_finger: per_class.div_ceil(FINGER_COUNT),
        }
    }

    pub fn total(&self) -> usize {
        self.null_without_leaves
            + self.null_with_leaves
            + self.obstructed
            + self.good
            + self.branch_per_finger * FINGER_COUNT
    }

    /// `(scenario, with_leaves)` per recording index. Finger-carrying
    /// classes cycle through the fingers.
    pub fn layout(&self) -> Vec<(GraspState, bool)> {
        let mut out = Vec::with_capacity(self.total());
        out.extend(std::iter::repeat_n((GraspState::Null, false), self.null_without_leaves));
        out.extend(std::iter::repeat_n((GraspState::Null, true), self.null_with_leaves));
        out.extend((0..self.obstructed).map(|i| (GraspState::Obstructed(Finger::ALL[i % FINGER_COUNT]), false)));
        out.extend(std::iter::repeat_n((GraspState::Good, false), self.good));
        for _ in 0..self.branch_per_finger {
            for f in Finger::ALL {
                out.push((GraspState::BranchInterference(f), false));
            }
        }
        out
    }
}

/// Synthesizes a dataset with the given mix; recording `i` depends only on
/// `(seed, i)`, so generation runs in parallel and matches a serial run.
pub fn generate_dataset<T: Scalar>(
    seed: u64,
    mix: &BenchmarkMix,
    ranges: &NuisanceRanges,
) -> Result<Vec<GraspRecording<T>>> {
    mix.layout()
        .into_par_iter()
        .enumerate()
        .map(|(i, (state, leaves))| {
            let mut rng = recording_rng(seed, i);
            synthesize_grasp(&sample_spec(state, leaves, ranges, &mut rng))
        })
        .collect()
}

/// The 200-recording benchmark with the reference class mix.
pub fn generate_benchmark<T: Scalar>(seed: u64) -> Result<Vec<GraspRecording<T>>> {
    generate_dataset(seed, &BenchmarkMix::TABLE, &NuisanceRanges::benchmark())
}

/// Noise-free sweep with `per_class` recordings of each class.
pub fn scenario_sweep<T: Scalar>(seed: u64, per_class: usize) -> Result<Vec<GraspRecording<T>>> {
    let mix = BenchmarkMix {
        branch_per_finger: 0,
        ..BenchmarkMix::balanced(per_class)
    };
    let mut layout = mix.layout();
    layout.extend((0..per_class).map(|i| (GraspState::BranchInterference(Finger::ALL[i % FINGER_COUNT]), false)));
    let ranges = NuisanceRanges::clean();
    layout
        .into_par_iter()
        .enumerate()
        .map(|(i, (state, leaves))| {
            let mut rng = recording_rng(seed, i);
            synthesize_grasp(&sample_spec(state, leaves, &ranges, &mut rng))
        })
        .collect()
}
