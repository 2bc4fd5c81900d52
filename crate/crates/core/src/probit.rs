//! Standard-normal probability functions used by the pairwise likelihoods.
//!
//! Φ is evaluated through `erfc`, which keeps full relative accuracy in the
//! lower tail down to z ≈ −37. Below that the lower tail is written as
//! `φ(z) · R(−z)` where `R` is the Mills ratio, computed from Laplace's
//! continued fraction, so `log Φ` and `φ/Φ` stay finite and monotone for any
//! finite argument.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

/// Lower edge of the range where `erfc` still resolves Φ(z) without underflow.
pub const ERFC_TAIL_LIMIT: f64 = -37.0;

const CONTINUED_FRACTION_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ProbitError {
    #[error("probit argument must be finite, got {0}")]
    NonFinite(f64),
}

fn check(z: f64) -> Result<f64, ProbitError> {
    if z.is_finite() {
        Ok(z)
    } else {
        Err(ProbitError::NonFinite(z))
    }
}

/// Density of the standard normal distribution.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Φ(z), the standard normal CDF.
pub fn std_normal_cdf(z: f64) -> Result<f64, ProbitError> {
    check(z).map(cdf)
}

/// log Φ(z), accurate across the whole lower tail.
pub fn log_std_normal_cdf(z: f64) -> Result<f64, ProbitError> {
    check(z).map(log_cdf)
}

/// φ(z)/Φ(z). This is the negated derivative of `−log Φ(z)`.
pub fn inverse_mills(z: f64) -> Result<f64, ProbitError> {
    check(z).map(inv_mills)
}

pub(crate) fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub(crate) fn log_cdf(z: f64) -> f64 {
    if z < ERFC_TAIL_LIMIT {
        -0.5 * z * z - 0.5 * (2.0 * PI).ln() + mills_ratio(-z).ln()
    } else if z < 0.0 {
        cdf(z).ln()
    } else {
        // log(1 − Φ(−z)) without cancellation
        (-0.5 * libm::erfc(z * FRAC_1_SQRT_2)).ln_1p()
    }
}

pub(crate) fn inv_mills(z: f64) -> f64 {
    if z < ERFC_TAIL_LIMIT {
        mills_ratio(-z).recip()
    } else {
        std_normal_pdf(z) / cdf(z)
    }
}

/// Mills ratio `Φ(−t)/φ(t)` for large positive `t`, by backward evaluation of
/// `1/(t + 1/(t + 2/(t + 3/(t + …))))`.
fn mills_ratio(t: f64) -> f64 {
    let mut tail = 0.0;
    for k in (1..=CONTINUED_FRACTION_TERMS).rev() {
        tail = k as f64 / (t + tail);
    }
    1.0 / (t + tail)
}
