//! Normalized taxel frames and the raw-reading calibration that produces them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{
    Finger, FingerLayout, FINGER_COLS, FINGER_COUNT, FRAME_COLS, FRAME_ROWS, TAXEL_COUNT,
};
use crate::scalar::Scalar;

/// One 24×16 pressure snapshot, row-major, values normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxelFrame<T> {
    timestamp_ms: u64,
    values: Vec<T>,
}

impl<T: Scalar> TaxelFrame<T> {
    pub fn new(timestamp_ms: u64, values: Vec<T>) -> Result<Self> {
        check_len(values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::Argument(format!(
                "taxel {i} value {v} outside the normalized range [0, 1]"
            )));
        }
        Ok(TaxelFrame {
            timestamp_ms,
            values,
        })
    }

    pub fn filled(timestamp_ms: u64, value: T) -> Result<Self> {
        Self::new(timestamp_ms, vec![value; TAXEL_COUNT])
    }

    /// Builds a frame from `f(row, col)`.
    pub fn from_fn(timestamp_ms: u64, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(TAXEL_COUNT);
        for r in 0..FRAME_ROWS {
            for c in 0..FRAME_COLS {
                values.push(f(r, c));
            }
        }
        Self::new(timestamp_ms, values)
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.timestamp_ms
    }

    /// Flattened values; taxel `(r, c)` is at `16·r + c`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * FRAME_COLS + col]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// The 24×4 sub-image of one finger, row-major.
    pub fn finger_slice(&self, finger: Finger) -> FingerImage<T> {
        let cols = FingerLayout.column_span(finger);
        let mut values = Vec::with_capacity(FRAME_ROWS * FINGER_COLS);
        for r in 0..FRAME_ROWS {
            values.extend_from_slice(&self.values[r * FRAME_COLS + cols.start..r * FRAME_COLS + cols.end]);
        }
        FingerImage { values }
    }

    /// Reassembles a frame from its four finger slices, side by side.
    pub fn from_finger_slices(timestamp_ms: u64, slices: &[FingerImage<T>]) -> Result<Self> {
        if slices.len() != FINGER_COUNT {
            return Err(Error::Structural(format!(
                "expected {FINGER_COUNT} finger slices, got {}",
                slices.len()
            )));
        }
        Self::from_fn(timestamp_ms, |r, c| slices[c / FINGER_COLS].get(r, c % FINGER_COLS))
    }
}

/// Convenience wrapper for [`TaxelFrame::finger_slice`] taking a raw index.
pub fn finger_slice<T: Scalar>(frame: &TaxelFrame<T>, finger: usize) -> Result<FingerImage<T>> {
    Ok(frame.finger_slice(Finger::new(finger)?))
}

/// 24×4 image of a single finger, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerImage<T> {
    values: Vec<T>,
}

impl<T: Scalar> FingerImage<T> {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * FINGER_COLS + col]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }
}

/// How raw readings are mapped onto `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Each taxel against its own rest reading.
    #[default]
    PerTaxel,
    /// All taxels against the mean rest reading.
    Global,
}

/// Rest readings and the raw value corresponding to the 20 N full scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile<T> {
    baseline: Vec<T>,
    full_scale: T,
    mode: NormalizationMode,
}

impl<T: Scalar> CalibrationProfile<T> {
    pub fn new(baseline: Vec<T>, full_scale: T) -> Result<Self> {
        check_len(baseline.len())?;
        if let Some((i, b)) = baseline.iter().enumerate().find(|(_, b)| !(**b < full_scale)) {
            return Err(Error::Calibration(format!(
                "full scale {full_scale} does not exceed baseline {b} of taxel {i}"
            )));
        }
        Ok(CalibrationProfile {
            baseline,
            full_scale,
            mode: NormalizationMode::PerTaxel,
        })
    }

    /// Baseline 0 and full scale 1: normalization is the identity on `[0, 1]`.
    pub fn identity() -> Self {
        CalibrationProfile {
            baseline: vec![T::zero(); TAXEL_COUNT],
            full_scale: T::one(),
            mode: NormalizationMode::PerTaxel,
        }
    }

    pub fn with_mode(mut self, mode: NormalizationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> NormalizationMode {
        self.mode
    }

    pub fn baseline(&self) -> &[T] {
        &self.baseline
    }

    pub fn full_scale(&self) -> T {
        self.full_scale
    }

    /// `clamp((raw − baseline) / (full_scale − baseline), 0, 1)` per taxel.
    pub fn normalize(&self, timestamp_ms: u64, raw: &[T]) -> Result<TaxelFrame<T>> {
        check_len(raw.len())?;
        let global = match self.mode {
            NormalizationMode::PerTaxel => None,
            NormalizationMode::Global => {
                Some(self.baseline.iter().copied().sum::<T>() / T::of_usize(TAXEL_COUNT))
            }
        };
        let values = raw
            .iter()
            .zip(&self.baseline)
            .map(|(&x, &b)| {
                let b = global.unwrap_or(b);
                ((x - b) / (self.full_scale - b)).max(T::zero()).min(T::one())
            })
            .collect();
        Ok(TaxelFrame {
            timestamp_ms,
            values,
        })
    }
}

pub fn normalize_frame<T: Scalar>(
    timestamp_ms: u64,
    raw: &[T],
    cal: &CalibrationProfile<T>,
) -> Result<TaxelFrame<T>> {
    cal.normalize(timestamp_ms, raw)
}

fn check_len(len: usize) -> Result<()> {
    if len != TAXEL_COUNT {
        return Err(Error::Structural(format!(
            "expected a {FRAME_ROWS}x{FRAME_COLS} matrix ({TAXEL_COUNT} values), got {len} values"
        )));
    }
    Ok(())
}
