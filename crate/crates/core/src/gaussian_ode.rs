//! Second-moment ODE of the limit process for `V(x) = x²/2`.
//!
//! With `m(t) = E[X_t²]` the moment pair is `(m, 1)` and
//! `m' = Γ(m, 1) - 2 m 𝒢(m, 1)`, whose unique fixed point is `m = 1`.

use crate::closed_forms::{gamma_coef, gee_coef, MomentPair, ScalingParams};
use crate::error::{Error, Result};

/// Right-hand side `Γ(m,1) - 2m𝒢(m,1)` for `m ≥ 0`.
pub fn gaussian_rhs(m: f64, s: ScalingParams) -> f64 {
    let m = m.max(0.0);
    let p = MomentPair { a: m, b: 1.0 };
    gamma_coef(p, s) - 2.0 * m * gee_coef(p, s)
}

/// Piecewise-linear curve `t ↦ m(t)` on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurve {
    pub grid: Vec<(f64, f64)>,
    /// Sup-norm difference between the solution at `dt` and at `dt/2` on the
    /// common grid; zero when not computed.
    pub err_estimate: f64,
}

impl MomentCurve {
    pub fn new(grid: Vec<(f64, f64)>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Empty("moment curve"));
        }
        if grid.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::GridMismatch("moment curve times must increase strictly".into()));
        }
        Ok(Self { grid, err_estimate: 0.0 })
    }

    pub fn start(&self) -> f64 {
        self.grid[0].0
    }

    pub fn end(&self) -> f64 {
        self.grid[self.grid.len() - 1].0
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let g = &self.grid;
        let tol = 1e-12 * self.end().abs().max(1.0);
        if t < self.start() - tol || t > self.end() + tol {
            return None;
        }
        let j = g.partition_point(|&(s, _)| s <= t);
        if j == 0 {
            return Some(g[0].1);
        }
        if j == g.len() {
            return Some(g[j - 1].1);
        }
        let (t0, m0) = g[j - 1];
        let (t1, m1) = g[j];
        if t - t0 <= tol {
            return Some(m0);
        }
        Some(m0 + (m1 - m0) * (t - t0) / (t1 - t0))
    }
}

fn rk4_step(m: f64, h: f64, s: ScalingParams) -> f64 {
    let k1 = gaussian_rhs(m, s);
    let k2 = gaussian_rhs(m + 0.5 * h * k1, s);
    let k3 = gaussian_rhs(m + 0.5 * h * k2, s);
    let k4 = gaussian_rhs(m + h * k3, s);
    m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn rk4_path(m0: f64, s: ScalingParams, steps: usize, h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut m = m0;
    out.push(m);
    for _ in 0..steps {
        m = rk4_step(m, h, s);
        out.push(m);
    }
    out
}

/// Classical RK4 on `[0, horizon]` with step `dt` (rounded so that the grid
/// ends exactly at `horizon`), plus a step-halving error estimate.
pub fn integrate_moment_ode(m0: f64, l: f64, horizon: f64, dt: f64) -> Result<MomentCurve> {
    let s = ScalingParams::new(l)?;
    if !(m0.is_finite() && m0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("m0 must be finite and nonnegative, got {m0}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter("horizon must be nonnegative and dt positive".into()));
    }
    let steps = ((horizon / dt) - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return MomentCurve::new(vec![(0.0, m0)]);
    }
    let h = horizon / steps as f64;
    let coarse = rk4_path(m0, s, steps, h);
    let fine = rk4_path(m0, s, 2 * steps, 0.5 * h);
    let err = coarse.iter().enumerate().map(|(i, &c)| (c - fine[2 * i]).abs()).fold(0.0, f64::max);
    let grid =
        coarse.into_iter().enumerate().map(|(i, m)| (if i == steps { horizon } else { i as f64 * h }, m)).collect();
    let mut curve = MomentCurve::new(grid)?;
    curve.err_estimate = err;
    Ok(curve)
}
