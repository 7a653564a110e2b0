use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Finger;

/// Grasp outcome observed through the tactile arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraspState {
    /// Nothing (or only leaves) between the fingers.
    Null,
    /// All four fingers hold the fruit.
    Good,
    /// A branch is caught between this finger and the fruit.
    BranchInterference(Finger),
    /// This finger was stopped early by an obstacle.
    Obstructed(Finger),
}

/// Finger-free class of a [`GraspState`], in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GraspClass {
    Null,
    Obstructed,
    Good,
    Branch,
}

impl GraspClass {
    pub const ALL: [GraspClass; 4] = [
        GraspClass::Null,
        GraspClass::Obstructed,
        GraspClass::Good,
        GraspClass::Branch,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GraspClass::Null => "null",
            GraspClass::Obstructed => "obstructed",
            GraspClass::Good => "good",
            GraspClass::Branch => "branch",
        }
    }
}

impl fmt::Display for GraspClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl GraspState {
    pub fn class(&self) -> GraspClass {
        match self {
            GraspState::Null => GraspClass::Null,
            GraspState::Good => GraspClass::Good,
            GraspState::BranchInterference(_) => GraspClass::Branch,
            GraspState::Obstructed(_) => GraspClass::Obstructed,
        }
    }

    pub fn finger(&self) -> Option<Finger> {
        match self {
            GraspState::BranchInterference(f) | GraspState::Obstructed(f) => Some(*f),
            GraspState::Null | GraspState::Good => None,
        }
    }

    pub fn from_parts(class: GraspClass, finger: Option<Finger>) -> Result<Self> {
        match (class, finger) {
            (GraspClass::Null, None) => Ok(GraspState::Null),
            (GraspClass::Good, None) => Ok(GraspState::Good),
            (GraspClass::Branch, Some(f)) => Ok(GraspState::BranchInterference(f)),
            (GraspClass::Obstructed, Some(f)) => Ok(GraspState::Obstructed(f)),
            (c, Some(_)) => Err(Error::Argument(format!("{c} grasp carries no finger"))),
            (c, None) => Err(Error::Argument(format!("{c} grasp requires a finger"))),
        }
    }
}

/// Text form used by manifests and prediction files: `null`, `good`,
/// `branch:<f>`, `obstructed:<f>`.
impl fmt::Display for GraspState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.finger() {
            Some(finger) => write!(f, "{}:{}", self.class(), finger),
            None => f.write_str(self.class().name()),
        }
    }
}

impl FromStr for GraspClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "null" => Ok(GraspClass::Null),
            "good" => Ok(GraspClass::Good),
            "branch" | "branch_interference" => Ok(GraspClass::Branch),
            "obstructed" => Ok(GraspClass::Obstructed),
            other => Err(Error::Format(format!("unknown grasp state `{other}`"))),
        }
    }
}

impl FromStr for GraspState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (class, finger) = match s.split_once(':') {
            Some((c, f)) => {
                let idx: usize = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("bad finger index in `{s}`")))?;
                (c.parse()?, Some(Finger::new(idx)?))
            }
            None => (s.parse()?, None),
        };
        GraspState::from_parts(class, finger).map_err(|e| Error::Format(e.to_string()))
    }
}
