//! Sensor geometry of the four-finger gripper.
//!
//! Each finger carries six 4×4 piezoresistive arrays stacked along its
//! length, giving a 24×4 finger image. The four finger images sit side by
//! side to form the 24×16 global frame. Row 0 is the proximal (hinge) end of
//! every finger, row 23 the tip.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FINGER_COUNT: usize = 4;
pub const ARRAYS_PER_FINGER: usize = 6;
/// Taxels along one side of a square array.
pub const ARRAY_SIDE: usize = 4;
pub const TAXELS_PER_ARRAY: usize = ARRAY_SIDE * ARRAY_SIDE;

pub const FRAME_ROWS: usize = ARRAYS_PER_FINGER * ARRAY_SIDE;
pub const FRAME_COLS: usize = FINGER_COUNT * ARRAY_SIDE;
pub const TAXEL_COUNT: usize = FRAME_ROWS * FRAME_COLS;
pub const FINGER_COLS: usize = ARRAY_SIDE;
pub const TAXELS_PER_FINGER: usize = FRAME_ROWS * FINGER_COLS;

/// Nominal spacing between consecutive frames.
pub const FRAME_INTERVAL_MS: u64 = 60;

/// Index of one of the four independently actuated fingers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Finger(u8);

impl Finger {
    pub const ALL: [Finger; FINGER_COUNT] = [Finger(0), Finger(1), Finger(2), Finger(3)];

    pub fn new(index: usize) -> Result<Self> {
        if index < FINGER_COUNT {
            Ok(Finger(index as u8))
        } else {
            Err(Error::Argument(format!(
                "finger index {index} out of range 0..{FINGER_COUNT}"
            )))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u8> for Finger {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Finger::new(value as usize)
    }
}

impl From<Finger> for u8 {
    fn from(f: Finger) -> u8 {
        f.0
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Mapping between fingers, frame columns and the flattened taxel index.
///
/// The flattened (reshaped) index of taxel `(row, col)` is `16·row + col`,
/// the same row-major order used in the dataset payload.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FingerLayout;

impl FingerLayout {
    pub fn finger_count(&self) -> usize {
        FINGER_COUNT
    }

    pub fn arrays_per_finger(&self) -> usize {
        ARRAYS_PER_FINGER
    }

    pub fn taxels_per_array(&self) -> usize {
        TAXELS_PER_ARRAY
    }

    /// Frame columns owned by `finger`: `[4f, 4f+3]`.
    pub fn column_span(&self, finger: Finger) -> Range<usize> {
        let start = finger.index() * FINGER_COLS;
        start..start + FINGER_COLS
    }

    pub fn finger_of_column(&self, col: usize) -> Finger {
        debug_assert!(col < FRAME_COLS);
        Finger((col / FINGER_COLS) as u8)
    }

    #[inline]
    pub fn taxel_index(&self, row: usize, col: usize) -> usize {
        row * FRAME_COLS + col
    }

    #[inline]
    pub fn taxel_position(&self, taxel: usize) -> (usize, usize) {
        (taxel / FRAME_COLS, taxel % FRAME_COLS)
    }

    pub fn finger_of_taxel(&self, taxel: usize) -> Finger {
        self.finger_of_column(taxel % FRAME_COLS)
    }

    /// Flattened indices of the 96 taxels belonging to `finger`, ascending.
    pub fn taxels_of(&self, finger: Finger) -> impl Iterator<Item = usize> {
        let cols = self.column_span(finger);
        (0..FRAME_ROWS).flat_map(move |r| cols.clone().map(move |c| r * FRAME_COLS + c))
    }

    /// Sensor array (0..6) along the finger that contains frame row `row`.
    pub fn array_of_row(&self, row: usize) -> usize {
        row / ARRAY_SIDE
    }
}
