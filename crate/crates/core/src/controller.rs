//! Gripper reaction state machine and the replay loop that drives it from
//! recorded grasp attempts.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::{classify, decide, DecisionInputs, EstimatorConfig};
use crate::frame::TaxelFrame;
use crate::grasp::GraspState;
use crate::layout::{Finger, FINGER_COUNT};
use crate::pipeline::TactilePipeline;
use crate::recording::{GraspRecording, PhaseMarks};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Idle,
    Approaching,
    Grasping,
    Holding,
    Detaching,
    Releasing,
    Faulted,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Idle,
        Mode::Approaching,
        Mode::Grasping,
        Mode::Holding,
        Mode::Detaching,
        Mode::Releasing,
        Mode::Faulted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Approaching => "approaching",
            Mode::Grasping => "grasping",
            Mode::Holding => "holding",
            Mode::Detaching => "detaching",
            Mode::Releasing => "releasing",
            Mode::Faulted => "faulted",
        }
    }

    /// Modes where a replayed cycle stops.
    pub fn ends_cycle(self) -> bool {
        matches!(self, Mode::Detaching | Mode::Releasing | Mode::Faulted)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControllerState {
    pub mode: Mode,
    pub retry_count: usize,
    pub finger_open: [bool; FINGER_COUNT],
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            mode: Mode::Idle,
            retry_count: 0,
            finger_open: [true; FINGER_COUNT],
        }
    }
}

impl ControllerState {
    pub fn in_mode(mode: Mode, retry_count: usize) -> Self {
        let closed = matches!(mode, Mode::Grasping | Mode::Holding | Mode::Detaching);
        ControllerState {
            mode,
            retry_count,
            finger_open: [!closed; FINGER_COUNT],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    CloseAll,
    OpenAll,
    OpenFinger(Finger),
    Detach,
    Abort,
    RequestReposition,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::CloseAll => f.write_str("close_all"),
            Action::OpenAll => f.write_str("open_all"),
            Action::OpenFinger(finger) => write!(f, "open_finger:{}", finger.index()),
            Action::Detach => f.write_str("detach"),
            Action::Abort => f.write_str("abort"),
            Action::RequestReposition => f.write_str("request_reposition"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Classified(GraspState),
    PhaseComplete,
    Timeout,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Classified(s) => write!(f, "classified:{s}"),
            Event::PhaseComplete => f.write_str("phase_complete"),
            Event::Timeout => f.write_str("timeout"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub max_retries: usize,
    /// Hold the grasp after opening a branch finger and classify again
    /// before detaching.
    pub recheck_after_release: bool,
    /// Frames after the close command without a classification before a
    /// timeout is raised.
    pub timeout_frames: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            max_retries: 2,
            recheck_after_release: false,
            timeout_frames: 50,
        }
    }
}

/// One transition. Pairs with no entry in the table leave the state
/// unchanged, emit nothing and log a warning.
pub fn step(state: ControllerState, event: Event, cfg: &ControllerConfig) -> (ControllerState, Vec<Action>) {
    use GraspState::*;
    let mut next = state;
    let actions = match (state.mode, event) {
        (Mode::Idle, Event::PhaseComplete) => {
            next.mode = Mode::Approaching;
            vec![]
        }
        (Mode::Approaching, Event::PhaseComplete) => {
            next.mode = Mode::Grasping;
            next.finger_open = [false; FINGER_COUNT];
            vec![Action::CloseAll]
        }
        (Mode::Grasping | Mode::Holding, Event::Classified(Good)) => {
            next.mode = Mode::Detaching;
            vec![Action::Detach]
        }
        (Mode::Grasping | Mode::Holding, Event::Classified(Null | Obstructed(_)) | Event::Timeout) => {
            if state.retry_count < cfg.max_retries {
                next.mode = Mode::Approaching;
                next.retry_count += 1;
                next.finger_open = [true; FINGER_COUNT];
                vec![Action::OpenAll, Action::RequestReposition]
            } else {
                next.mode = Mode::Faulted;
                vec![Action::Abort]
            }
        }
        (Mode::Grasping, Event::Classified(BranchInterference(f))) => {
            next.finger_open[f.index()] = true;
            if cfg.recheck_after_release {
                next.mode = Mode::Holding;
                vec![Action::OpenFinger(f)]
            } else {
                next.mode = Mode::Detaching;
                vec![Action::OpenFinger(f), Action::Detach]
            }
        }
        (Mode::Holding, Event::Classified(BranchInterference(f))) => {
            next.mode = Mode::Detaching;
            if state.finger_open[f.index()] {
                vec![Action::Detach]
            } else {
                next.finger_open[f.index()] = true;
                vec![Action::OpenFinger(f), Action::Detach]
            }
        }
        (Mode::Detaching, Event::PhaseComplete) => {
            next.mode = Mode::Releasing;
            next.finger_open = [true; FINGER_COUNT];
            vec![Action::OpenAll]
        }
        (Mode::Releasing, Event::PhaseComplete) => {
            next = ControllerState::default();
            vec![]
        }
        (mode, event) => {
            log::warn!("controller ignored {event} in mode {mode}");
            vec![]
        }
    };
    (next, actions)
}

/// Single-owner wrapper that applies events in arrival order.
#[derive(Debug, Clone, Default)]
pub struct Controller {
    state: ControllerState,
    cfg: ControllerConfig,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Self {
        Controller {
            state: ControllerState::default(),
            cfg,
        }
    }

    pub fn state(&self) -> ControllerState {
        self.state
    }

    pub fn handle(&mut self, event: Event) -> Vec<Action> {
        let (next, actions) = step(self.state, event, &self.cfg);
        self.state = next;
        actions
    }

    /// Drains an ordered event source, e.g. an `mpsc::Receiver<Event>`
    /// fed by a classification thread.
    pub fn drain<I: IntoIterator<Item = Event>>(&mut self, events: I) -> Vec<Action> {
        events.into_iter().flat_map(|e| self.handle(e)).collect()
    }
}

/// Frames of one grasp attempt. The marks may point past the end of a
/// truncated stream.
#[derive(Debug, Clone, Copy)]
pub struct AttemptStream<'a, T> {
    pub frames: &'a [TaxelFrame<T>],
    pub phases: PhaseMarks,
}

impl<'a, T: Scalar> From<&'a GraspRecording<T>> for AttemptStream<'a, T> {
    fn from(r: &'a GraspRecording<T>) -> Self {
        AttemptStream {
            frames: r.frames(),
            phases: *r.phases(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleEntry {
    pub attempt: usize,
    pub frame: usize,
    pub event: Event,
    pub state: ControllerState,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub entries: Vec<CycleEntry>,
    pub final_state: ControllerState,
    pub attempts_used: usize,
    /// The streams ran out before the controller reached an end mode.
    pub incomplete: bool,
}

impl CycleReport {
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.entries.iter().flat_map(|e| e.actions.iter().copied())
    }

    pub fn classifications(&self) -> impl Iterator<Item = (usize, usize, GraspState)> + '_ {
        self.entries.iter().filter_map(|e| match e.event {
            Event::Classified(s) => Some((e.attempt, e.frame, s)),
            _ => None,
        })
    }
}

impl fmt::Display for CycleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let actions: Vec<String> = e.actions.iter().map(Action::to_string).collect();
            writeln!(
                f,
                "attempt={} frame={} event={} mode={} retries={} actions={}",
                e.attempt,
                e.frame,
                e.event,
                e.state.mode,
                e.state.retry_count,
                if actions.is_empty() { "-".into() } else { actions.join(",") }
            )?;
        }
        writeln!(
            f,
            "final mode={} retries={} attempts={} complete={}",
            self.final_state.mode,
            self.final_state.retry_count,
            self.attempts_used,
            !self.incomplete
        )
    }
}

/// Replays attempts through pipeline, estimator and controller. Each retry
/// consumes the next recording.
pub fn run_cycle<T: Scalar>(
    attempts: &[GraspRecording<T>],
    estimator: &EstimatorConfig<T>,
    cfg: &ControllerConfig,
) -> Result<CycleReport> {
    run_streams(attempts.iter().map(AttemptStream::from), estimator, cfg)
}

pub fn run_streams<'a, T: Scalar, I>(
    attempts: I,
    estimator: &EstimatorConfig<T>,
    cfg: &ControllerConfig,
) -> Result<CycleReport>
where
    I: IntoIterator<Item = AttemptStream<'a, T>>,
{
    run_streams_with(attempts, estimator, cfg, |_| {})
}

/// Like [`run_streams`], calling `on_frame` before each frame enters the
/// pipeline (for pacing a replay).
pub fn run_streams_with<'a, T: Scalar, I, F>(
    attempts: I,
    estimator: &EstimatorConfig<T>,
    cfg: &ControllerConfig,
    mut on_frame: F,
) -> Result<CycleReport>
where
    I: IntoIterator<Item = AttemptStream<'a, T>>,
    F: FnMut(&TaxelFrame<T>),
{
    estimator.validate()?;
    let mut ctl = Controller::new(*cfg);
    let mut entries = Vec::new();
    let mut attempts_used = 0;

    for (attempt, stream) in attempts.into_iter().enumerate() {
        attempts_used = attempt + 1;
        let marks = stream.phases;
        let mut pipeline = TactilePipeline::new(estimator.pipeline_config())?;
        let mut fire = |ctl: &mut Controller, frame: usize, event: Event| {
            let actions = ctl.handle(event);
            entries.push(CycleEntry {
                attempt,
                frame,
                event,
                state: ctl.state(),
                actions,
            });
        };

        for i in 0..=stream.frames.len() {
            let mode = ctl.state().mode;
            if mode == Mode::Idle && i == marks.approach {
                fire(&mut ctl, i, Event::PhaseComplete);
            }
            if ctl.state().mode == Mode::Approaching && i == marks.grasp {
                fire(&mut ctl, i, Event::PhaseComplete);
            }
            if ctl.state().mode == Mode::Grasping && i >= marks.grasp {
                if i == marks.hold {
                    let event = classify_span(&pipeline, marks.grasp_span(), estimator)?;
                    fire(&mut ctl, i, event);
                } else if i - marks.grasp >= cfg.timeout_frames {
                    fire(&mut ctl, i, Event::Timeout);
                }
            }
            if ctl.state().mode == Mode::Holding && i == marks.hold + 1 {
                let event = recheck(&pipeline, marks.grasp_span(), ctl.state().finger_open, estimator)?;
                fire(&mut ctl, i, event);
            }
            let mode = ctl.state().mode;
            if mode.ends_cycle() || (mode == Mode::Approaching && attempt < ctl.state().retry_count) {
                break;
            }
            if let Some(frame) = stream.frames.get(i) {
                on_frame(frame);
                pipeline.push(frame);
            }
        }

        if ctl.state().mode != Mode::Approaching {
            break;
        }
    }

    let final_state = ctl.state();
    Ok(CycleReport {
        entries,
        final_state,
        attempts_used,
        incomplete: !final_state.mode.ends_cycle(),
    })
}

// An empty span yields no classification, which the controller sees as
// sensor silence.
fn classify_span<T: Scalar>(
    pipeline: &TactilePipeline<T>,
    span: Range<usize>,
    estimator: &EstimatorConfig<T>,
) -> Result<Event> {
    if span.is_empty() {
        return Ok(Event::Timeout);
    }
    let features = pipeline.features(span)?;
    Ok(Event::Classified(classify(&features, estimator)?))
}

/// Re-decides the grasp span as if only the still-closed fingers had
/// touched: each open finger takes the median peak and the earliest onset of
/// the closed ones.
fn recheck<T: Scalar>(
    pipeline: &TactilePipeline<T>,
    span: Range<usize>,
    open: [bool; FINGER_COUNT],
    estimator: &EstimatorConfig<T>,
) -> Result<Event> {
    if span.is_empty() || open.iter().all(|&o| o) {
        return Ok(Event::Timeout);
    }
    let features = pipeline.features(span)?;
    let onsets = features.onsets(estimator.onset_threshold);
    let closed: Vec<usize> = (0..FINGER_COUNT).filter(|&f| !open[f]).collect();
    let mut peaks: Vec<T> = closed.iter().map(|&f| features.per_finger_max[f]).collect();
    peaks.sort_by(|a, b| a.partial_cmp(b).expect("variances are not NaN"));
    let median = peaks[peaks.len() / 2];
    let first = closed.iter().filter_map(|&f| onsets[f]).min();
    let mut max = features.per_finger_max;
    let mut adjusted = onsets;
    for f in (0..FINGER_COUNT).filter(|&f| open[f]) {
        max[f] = median;
        adjusted[f] = first;
    }
    Ok(Event::Classified(decide(&DecisionInputs::new(&max, adjusted), estimator)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(i: usize) -> Finger {
        Finger::ALL[i]
    }

    #[test]
    fn good_grasp_detaches() {
        let s = ControllerState::in_mode(Mode::Grasping, 0);
        let (next, actions) = step(s, Event::Classified(GraspState::Good), &ControllerConfig::default());
        assert_eq!(next.mode, Mode::Detaching);
        assert_eq!(actions, vec![Action::Detach]);
    }

    #[test]
    fn null_grasp_retries() {
        let s = ControllerState::in_mode(Mode::Grasping, 0);
        let (next, actions) = step(s, Event::Classified(GraspState::Null), &ControllerConfig::default());
        assert_eq!(next.mode, Mode::Approaching);
        assert_eq!(next.retry_count, 1);
        assert_eq!(actions, vec![Action::OpenAll, Action::RequestReposition]);
    }

    #[test]
    fn branch_opens_the_named_finger() {
        let s = ControllerState::in_mode(Mode::Grasping, 0);
        let ev = Event::Classified(GraspState::BranchInterference(f(2)));
        let (next, actions) = step(s, ev, &ControllerConfig::default());
        assert_eq!(next.mode, Mode::Detaching);
        assert_eq!(actions, vec![Action::OpenFinger(f(2)), Action::Detach]);
        assert_eq!(next.finger_open, [false, false, true, false]);
    }

    #[test]
    fn exhausted_retries_fault() {
        let cfg = ControllerConfig::default();
        let s = ControllerState::in_mode(Mode::Grasping, cfg.max_retries);
        let (next, actions) = step(s, Event::Classified(GraspState::Obstructed(f(1))), &cfg);
        assert_eq!(next.mode, Mode::Faulted);
        assert_eq!(actions, vec![Action::Abort]);
        let (again, none) = step(next, Event::PhaseComplete, &cfg);
        assert_eq!(again, next);
        assert!(none.is_empty());
    }

    #[test]
    fn timeout_is_treated_like_null() {
        let cfg = ControllerConfig::default();
        let s = ControllerState::in_mode(Mode::Grasping, 1);
        assert_eq!(
            step(s, Event::Timeout, &cfg),
            step(s, Event::Classified(GraspState::Null), &cfg)
        );
    }

    #[test]
    fn recheck_holds_before_detaching() {
        let cfg = ControllerConfig {
            recheck_after_release: true,
            ..Default::default()
        };
        let s = ControllerState::in_mode(Mode::Grasping, 0);
        let (held, a) = step(s, Event::Classified(GraspState::BranchInterference(f(3))), &cfg);
        assert_eq!((held.mode, a), (Mode::Holding, vec![Action::OpenFinger(f(3))]));
        let (same, a) = step(held, Event::Classified(GraspState::BranchInterference(f(3))), &cfg);
        assert_eq!((same.mode, a), (Mode::Detaching, vec![Action::Detach]));
        let (other, a) = step(held, Event::Classified(GraspState::BranchInterference(f(0))), &cfg);
        assert_eq!(
            (other.mode, a),
            (Mode::Detaching, vec![Action::OpenFinger(f(0)), Action::Detach])
        );
    }

    #[test]
    fn full_cycle_returns_to_idle() {
        let mut ctl = Controller::new(ControllerConfig::default());
        let actions = ctl.drain([
            Event::PhaseComplete,
            Event::PhaseComplete,
            Event::Classified(GraspState::Good),
            Event::PhaseComplete,
            Event::PhaseComplete,
        ]);
        assert_eq!(actions, vec![Action::CloseAll, Action::Detach, Action::OpenAll]);
        assert_eq!(ctl.state(), ControllerState::default());
    }

    #[test]
    fn events_from_another_thread_apply_in_order() {
        let (tx, rx) = std::sync::mpsc::channel();
        let producer = std::thread::spawn(move || {
            for e in [Event::PhaseComplete, Event::PhaseComplete, Event::Timeout, Event::PhaseComplete] {
                tx.send(e).unwrap();
            }
        });
        producer.join().unwrap();
        let mut ctl = Controller::new(ControllerConfig::default());
        let actions = ctl.drain(rx);
        assert_eq!(
            actions,
            vec![Action::CloseAll, Action::OpenAll, Action::RequestReposition, Action::CloseAll]
        );
        assert_eq!(ctl.state().mode, Mode::Grasping);
    }
}
