use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TaxelFrame;
use crate::grasp::GraspState;
use crate::scalar::Scalar;

/// Stages of one picking cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Approach,
    Grasp,
    Hold,
    Release,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Approach, Phase::Grasp, Phase::Hold, Phase::Release];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Approach => "approach",
            Phase::Grasp => "grasp",
            Phase::Hold => "hold",
            Phase::Release => "release",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Start frame of each phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMarks {
    pub approach: usize,
    pub grasp: usize,
    pub hold: usize,
    pub release: usize,
}

impl PhaseMarks {
    pub fn start(&self, phase: Phase) -> usize {
        match phase {
            Phase::Approach => self.approach,
            Phase::Grasp => self.grasp,
            Phase::Hold => self.hold,
            Phase::Release => self.release,
        }
    }

    /// Frames of the grasp phase, `[grasp, hold)`.
    pub fn grasp_span(&self) -> Range<usize> {
        self.grasp..self.hold
    }

    /// The phase frame `index` falls in.
    pub fn phase_at(&self, index: usize) -> Phase {
        if index >= self.release {
            Phase::Release
        } else if index >= self.hold {
            Phase::Hold
        } else if index >= self.grasp {
            Phase::Grasp
        } else {
            Phase::Approach
        }
    }

    pub fn validate(&self, frame_count: usize) -> Result<()> {
        let marks = [self.approach, self.grasp, self.hold, self.release];
        if marks.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument(format!(
                "phase marks must satisfy approach <= grasp <= hold <= release, got {marks:?}"
            )));
        }
        if self.release >= frame_count {
            return Err(Error::Argument(format!(
                "phase mark {} beyond last frame of a {frame_count}-frame recording",
                self.release
            )));
        }
        Ok(())
    }
}

/// Time-ordered frames of one grasp attempt, with phase marks and an
/// optional ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspRecording<T> {
    frames: Vec<TaxelFrame<T>>,
    phases: PhaseMarks,
    label: Option<GraspState>,
    meta: Option<BTreeMap<String, String>>,
}

impl<T: Scalar> GraspRecording<T> {
    pub fn new(
        frames: Vec<TaxelFrame<T>>,
        phases: PhaseMarks,
        label: Option<GraspState>,
        meta: Option<BTreeMap<String, String>>,
    ) -> Result<Self> {
        phases.validate(frames.len())?;
        if let Some(w) = frames
            .windows(2)
            .position(|w| w[0].timestamp_ms() >= w[1].timestamp_ms())
        {
            return Err(Error::Argument(format!(
                "timestamps not strictly increasing at frame {}",
                w + 1
            )));
        }
        Ok(GraspRecording {
            frames,
            phases,
            label,
            meta,
        })
    }

    pub fn frames(&self) -> &[TaxelFrame<T>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn phases(&self) -> &PhaseMarks {
        &self.phases
    }

    pub fn label(&self) -> Option<GraspState> {
        self.label
    }

    pub fn meta(&self) -> Option<&BTreeMap<String, String>> {
        self.meta.as_ref()
    }

    pub fn with_label(mut self, label: Option<GraspState>) -> Self {
        self.label = label;
        self
    }
}
