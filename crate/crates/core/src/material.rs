//! Ogden hyperelastic model of the finger skin (TPU).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One `(μ, α)` pair of the Ogden strain-energy series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OgdenTerm<T> {
    pub mu: T,
    pub alpha: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgdenParams<T> {
    terms: Vec<OgdenTerm<T>>,
}

impl<T: Scalar> OgdenParams<T> {
    pub fn new(terms: Vec<OgdenTerm<T>>) -> Result<Self> {
        if terms.iter().any(|t| t.alpha == T::zero()) {
            return Err(Error::Argument("Ogden exponent alpha must be nonzero".into()));
        }
        let shear: T = terms.iter().map(|t| t.mu * t.alpha).sum();
        if !(shear > T::zero()) {
            return Err(Error::Argument(format!(
                "Ogden parameters give non-positive ground-state shear (sum mu*alpha = {shear})"
            )));
        }
        Ok(OgdenParams { terms })
    }

    /// Three-term fit of NinjaFlex TPU.
    pub fn ninjaflex() -> Self {
        let term = |mu: f64, alpha: f64| OgdenTerm {
            mu: T::lit(mu),
            alpha: T::lit(alpha),
        };
        OgdenParams {
            terms: vec![
                term(0.03829, 4.1352),
                term(24.4601, 0.2123),
                term(24.4613, 0.2122),
            ],
        }
    }

    pub fn terms(&self) -> &[OgdenTerm<T>] {
        &self.terms
    }

    /// Ground-state shear modulus, `½ Σ μᵢαᵢ`.
    pub fn shear_modulus(&self) -> T {
        self.terms.iter().map(|t| t.mu * t.alpha).sum::<T>() / T::lit(2.0)
    }

    /// Nominal (first Piola–Kirchhoff) stress under incompressible uniaxial
    /// stretch `λ`: `P(λ) = Σ (2μᵢ/αᵢ)(λ^(αᵢ−1) − λ^(−αᵢ/2−1))`.
    pub fn uniaxial_nominal_stress(&self, stretch: T) -> Result<T> {
        if !(stretch > T::zero()) {
            return Err(Error::Argument(format!("stretch must be > 0, got {stretch}")));
        }
        let one = T::one();
        let two = T::lit(2.0);
        Ok(self
            .terms
            .iter()
            .map(|t| {
                two * t.mu / t.alpha
                    * (stretch.powf(t.alpha - one) - stretch.powf(-t.alpha / two - one))
            })
            .sum())
    }
}

impl<T: Scalar> Default for OgdenParams<T> {
    fn default() -> Self {
        Self::ninjaflex()
    }
}

pub fn ogden_uniaxial_nominal_stress<T: Scalar>(stretch: T, params: &OgdenParams<T>) -> Result<T> {
    params.uniaxial_nominal_stress(stretch)
}
