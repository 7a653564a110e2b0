use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One bin of a one-sided power spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBin<T> {
    pub frequency_hz: T,
    pub power: T,
}

/// One-sided power spectrum of the mean-removed series.
///
/// Bin `k` sits at `k / (N·dt)`. Powers are `|X_k|²/N`, doubled for bins
/// that stand in for their negative-frequency mirror, so the bin powers sum
/// to the time-domain energy `Σ (x − x̄)²`.
pub fn power_spectrum<T: Scalar>(series: &[T], sample_interval_s: T) -> Result<Vec<SpectralBin<T>>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Argument(format!(
            "power spectrum needs at least 2 samples, got {n}"
        )));
    }
    if !(sample_interval_s > T::zero()) {
        return Err(Error::Argument("sample interval must be positive".into()));
    }
    let mean = series.iter().copied().sum::<T>() / T::of_usize(n);
    let mut buf: Vec<Complex<T>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, T::zero()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let nt = T::of_usize(n);
    let two = T::lit(2.0);
    let bins = n / 2 + 1;
    Ok((0..bins)
        .map(|k| {
            let mirrored = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            let p = buf[k].norm_sqr() / nt;
            SpectralBin {
                frequency_hz: T::of_usize(k) / (nt * sample_interval_s),
                power: if mirrored { p * two } else { p },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_series_has_no_power() {
        let out = power_spectrum(&[0.7f64; 16], 0.06).unwrap();
        assert!(out.iter().all(|b| b.power.abs() < 1e-24));
    }

    #[test]
    fn sinusoid_concentrates_in_its_bin() {
        let n = 64;
        let k = 5;
        let xs: Vec<f64> = (0..n)
            .map(|t| (2.0 * PI * k as f64 * t as f64 / n as f64).sin())
            .collect();
        let out = power_spectrum(&xs, 0.06).unwrap();
        let (best, _) = out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.power.total_cmp(&b.1.power))
            .unwrap();
        assert_eq!(best, k);
        let rest: f64 = out.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, b)| b.power).sum();
        assert!(rest < 1e-20);
        assert!((out[k].frequency_hz - k as f64 / (n as f64 * 0.06)).abs() < 1e-12);
    }

    #[test]
    fn parseval_on_odd_and_even_lengths() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for n in [2usize, 7, 64, 101] {
            let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let energy: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            let spectral: f64 = power_spectrum(&xs, 1.0).unwrap().iter().map(|b| b.power).sum();
            assert!((energy - spectral).abs() <= 1e-6 * energy.max(1e-300), "n={n}");
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(power_spectrum(&[1.0f64], 1.0), Err(Error::Argument(_))));
    }
}
