//! Closed forms for Gaussian expectations of `e^{αG + βG̃ + γ} ∧ 1`.
//!
//! `G`, `G̃`, `Ĝ` are independent standard normals. These identities are what
//! turn the Metropolis acceptance into `Γ` and `𝒢` in the large-dimension
//! limit.

use std::f64::consts::PI;

use super::normal::{exp_times_upper_tail, normal_cdf};
use super::{gee_coef, MomentPair, ScalingParams};
use crate::error::{Error, Result};

/// `e^{γ + s/2} Φ(-(γ + s)/√s)` for `s > 0`, merged exponent `-γ²/(2s)`.
fn shifted_tail(gamma: f64, s: f64) -> f64 {
    let t = (gamma + s) / s.sqrt();
    exp_times_upper_tail(gamma + 0.5 * s, -gamma * gamma / (2.0 * s), t)
}

/// `E[G (e^{αG+βG̃+γ} ∧ 1)] = (α/l²) 𝒢((α²+β²)/l², -2γ/l²)`.
///
/// The value does not depend on `l`; `s` only parametrises the `𝒢` route.
/// Zero whenever `α = 0`.
pub fn gaussian_exp_first(alpha: f64, beta: f64, gamma: f64, s: ScalingParams) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let l2 = s.l2();
    let p = MomentPair { a: (alpha * alpha + beta * beta) / l2, b: -2.0 * gamma / l2 };
    alpha / l2 * gee_coef(p, s)
}

/// `E[G² (e^{αG+βG̃+γ} ∧ 1)]`.
pub fn gaussian_exp_second(alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    let s = alpha * alpha + beta * beta;
    if s == 0.0 {
        return Err(Error::Degenerate("gaussian_exp_second needs (α, β) ≠ (0, 0)".into()));
    }
    let a2 = alpha * alpha;
    let tail = shifted_tail(gamma, s);
    let gauss = (-gamma * gamma / (2.0 * s)).exp() / (2.0 * PI * s).sqrt();
    Ok((1.0 + a2) * tail + normal_cdf(gamma / s.sqrt()) - a2 * gauss)
}

/// `E[G Ĝ (e^{αG+βG̃+δĜ+γ} ∧ 1)]`.
pub fn gaussian_exp_cross(alpha: f64, beta: f64, delta: f64, gamma: f64) -> Result<f64> {
    let s = alpha * alpha + beta * beta + delta * delta;
    if s == 0.0 {
        return Err(Error::Degenerate("gaussian_exp_cross needs (α, β, δ) ≠ 0".into()));
    }
    if alpha == 0.0 || delta == 0.0 {
        return Ok(0.0);
    }
    let gauss = (-gamma * gamma / (2.0 * s)).exp() / (2.0 * PI * s).sqrt();
    Ok(alpha * delta * (shifted_tail(gamma, s) - gauss))
}

/// `E[𝒢(a, αG + β)] = 𝒢(a + l²α²/4, β)` for finite `a ≥ 0`.
pub fn gee_gaussian_smoothing(a: f64, alpha: f64, beta: f64, s: ScalingParams) -> Result<f64> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidParameter(format!("a must be finite and nonnegative, got {a}")));
    }
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
    }
    let p = MomentPair::new(a + 0.25 * s.l2() * alpha * alpha, beta)?;
    Ok(gee_coef(p, s))
}
