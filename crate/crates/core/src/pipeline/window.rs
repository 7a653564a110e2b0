//! Trailing-window mean and population variance.
//!
//! At the start of a stream the window holds only the samples seen so far,
//! so output has the same length as input.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fixed-capacity ring of the most recent samples.
#[derive(Debug, Clone)]
struct Ring<T> {
    buf: Vec<T>,
    next: usize,
    len: usize,
}

impl<T: Scalar> Ring<T> {
    fn new(capacity: usize) -> Self {
        Ring {
            buf: vec![T::zero(); capacity],
            next: 0,
            len: 0,
        }
    }

    fn push(&mut self, x: T) {
        self.buf[self.next] = x;
        self.next = (self.next + 1) % self.buf.len();
        self.len = (self.len + 1).min(self.buf.len());
    }

    fn window(&self) -> &[T] {
        // Order does not matter for mean and variance.
        &self.buf[..self.len]
    }

    fn clear(&mut self) {
        self.next = 0;
        self.len = 0;
    }
}

// Both statistics work on deviations from the first sample, so a constant
// window yields exactly its value and exactly zero variance.
#[inline]
pub(crate) fn mean_of<T: Scalar>(xs: &[T]) -> T {
    let x0 = xs[0];
    x0 + xs.iter().map(|&x| x - x0).sum::<T>() / T::of_usize(xs.len())
}

/// Two-pass population variance, `(1/n)·Σ(x − x̄)²`.
#[inline]
pub(crate) fn population_variance<T: Scalar>(xs: &[T]) -> T {
    let x0 = xs[0];
    let n = T::of_usize(xs.len());
    let mean_dev = xs.iter().map(|&x| x - x0).sum::<T>() / n;
    let ss: T = xs
        .iter()
        .map(|&x| {
            let d = x - x0 - mean_dev;
            d * d
        })
        .sum();
    ss / n
}

/// Streaming trailing mean over `window` samples.
#[derive(Debug, Clone)]
pub struct RollingMean<T> {
    ring: Ring<T>,
}

impl<T: Scalar> RollingMean<T> {
    pub fn new(window: usize) -> Result<Self> {
        if window < 1 {
            return Err(Error::Config("moving average window must be >= 1".into()));
        }
        Ok(RollingMean {
            ring: Ring::new(window),
        })
    }

    pub fn push(&mut self, x: T) -> T {
        self.ring.push(x);
        mean_of(self.ring.window())
    }

    pub fn reset(&mut self) {
        self.ring.clear();
    }
}

/// Streaming trailing population variance over `window` samples.
///
/// Each update recomputes the window with a two-pass sum, so results match
/// the batch definition to rounding and are immune to cancellation drift.
#[derive(Debug, Clone)]
pub struct RollingVariance<T> {
    ring: Ring<T>,
}

impl<T: Scalar> RollingVariance<T> {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::Config("moving variance window must be >= 2".into()));
        }
        Ok(RollingVariance {
            ring: Ring::new(window),
        })
    }

    pub fn push(&mut self, x: T) -> T {
        self.ring.push(x);
        population_variance(self.ring.window())
    }

    pub fn reset(&mut self) {
        self.ring.clear();
    }
}

/// `out[t] = mean(series[t−w+1 ..= t])`, using the available prefix for `t < w−1`.
pub fn moving_average<T: Scalar>(series: &[T], window: usize) -> Result<Vec<T>> {
    let mut acc = RollingMean::new(window)?;
    Ok(series.iter().map(|&x| acc.push(x)).collect())
}

/// `out[t] = (1/n)·Σ(vⱼ − v̄)²` over the `n` most recent values (prefix windows at the start).
pub fn moving_variance<T: Scalar>(series: &[T], window: usize) -> Result<Vec<T>> {
    let mut acc = RollingVariance::new(window)?;
    Ok(series.iter().map(|&x| acc.push(x)).collect())
}
