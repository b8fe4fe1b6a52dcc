//! Audit of the explicit increment bound
//! `E[(X_t - X_s)²] ≤ 2l²[(t-s) + (l² sup(V'')⁺ ∨ 2/π)(t-s)²]`.

use std::f64::consts::FRAC_2_PI;

use super::mean_se;
use crate::error::{Error, Result};
use crate::limit::EnsembleRun;

/// Right-hand side of the increment bound.
pub fn increment_bound_rhs(l: f64, v2_sup: f64, dt: f64) -> f64 {
    let c = (l * l * v2_sup.max(0.0)).max(FRAC_2_PI);
    2.0 * l * l * (dt + c * dt * dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBoundRow {
    pub s: f64,
    pub t: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    /// `lhs ≤ rhs + 3·se`.
    pub pass: bool,
}

/// Checks the bound for every pair `s ≤ t` of snapshots, using the
/// displacement of each particle between the two snapshots.
pub fn moment_bound_check(run: &EnsembleRun, l: f64, v2_sup: f64) -> Result<Vec<MomentBoundRow>> {
    let snaps = &run.snapshots;
    if snaps.is_empty() {
        return Err(Error::InsufficientData("no snapshots to audit".into()));
    }
    let n = snaps[0].particles.len();
    if snaps.iter().any(|s| s.particles.len() != n) {
        return Err(Error::InsufficientData("particle identity is not tracked across snapshots".into()));
    }
    let mut rows = Vec::new();
    for (i, a) in snaps.iter().enumerate() {
        for b in &snaps[i..] {
            let d2: Vec<f64> = a.particles.iter().zip(&b.particles).map(|(x, y)| (y - x) * (y - x)).collect();
            let (lhs, se) = mean_se(&d2);
            let se = if se.is_nan() { 0.0 } else { se };
            let rhs = increment_bound_rhs(l, v2_sup, b.t - a.t);
            rows.push(MomentBoundRow { s: a.t, t: b.t, lhs, lhs_se: se, rhs, pass: lhs <= rhs + 3.0 * se });
        }
    }
    Ok(rows)
}
