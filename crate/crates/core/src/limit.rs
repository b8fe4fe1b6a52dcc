//! Interacting-particle approximation of the nonlinear limit diffusion
//!
//! ```text
//! dX_t = Γ(a_t, b_t)^{1/2} dB_t - 𝒢(a_t, b_t) V'(X_t) dt,
//! a_t = E[V'(X_t)²],  b_t = E[V''(X_t)],
//! ```
//!
//! by Euler–Maruyama with the law replaced by the empirical measure of the
//! particles and the coefficients frozen over each step.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::chain::InitialDistribution;
use crate::closed_forms::{gamma_coef, gee_coef, normal_quantile, MomentPair, ScalingParams};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::{derive_seed, stream_rng, StreamRng};

/// Particles per work unit. Each chunk owns one random stream, so results do
/// not depend on the number of threads.
pub const CHUNK: usize = 4096;

/// Largest admissible time step.
pub const DT_CAP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub horizon: f64,
    pub l: f64,
    pub seed: u64,
    pub init: InitialDistribution,
    /// Place the initial particles at the quantiles `(i + 1/2)/N` of the
    /// initial law (in shuffled order) instead of drawing them i.i.d.
    pub stratified_init: bool,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter("n_particles must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= DT_CAP) {
            return Err(Error::InvalidParameter(format!("dt must lie in (0, {DT_CAP}], got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be nonnegative, got {}", self.horizon)));
        }
        ScalingParams::new(self.l)?;
        self.init.validate()
    }

    /// Number of Euler steps; the last one is shortened to end at `horizon`.
    pub fn steps(&self) -> u64 {
        ((self.horizon / self.dt) - 1e-9).ceil().max(0.0) as u64
    }

    /// Time after `k` steps.
    pub fn time_of(&self, k: u64) -> f64 {
        (k as f64 * self.dt).min(self.horizon)
    }

    /// First step index whose time reaches `t`.
    pub fn step_of(&self, t: f64) -> u64 {
        (((t / self.dt) - 1e-9).ceil().max(0.0) as u64).min(self.steps())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPoint {
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

/// Particle cloud at time `t` with the moment pairs seen so far.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: Vec<f64>,
    /// `V'` at the current particles.
    grad: Vec<f64>,
    pub t: f64,
    pub k: u64,
    pub moment_history: Vec<MomentPoint>,
    rngs: Vec<StreamRng>,
}

/// Fills `grad` with `V'` and returns the chunk sums of `V'²` and `V''`.
fn chunk_sums(xs: &[f64], grad: &mut [f64], p: &Potential) -> (f64, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    for (x, g) in xs.iter().zip(grad.iter_mut()) {
        let (d1, d2) = p.v1_v2(*x);
        *g = d1;
        a += d1 * d1;
        b += d2;
    }
    (a, b)
}

/// Per-chunk partial sums reduced in chunk order, so the result does not
/// depend on the thread count.
fn reduce_moments(parts: &[(f64, f64)], n: usize) -> MomentPair {
    let (a, b) = parts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    MomentPair { a: a / n as f64, b: b / n as f64 }
}

/// Quantile placement `(i + 1/2)/N` of the initial law, or `None` when no
/// closed-form quantile is available.
fn stratified_positions(init: &InitialDistribution, p: &Potential, n: usize) -> Option<Vec<f64>> {
    let u = |i: usize| (i as f64 + 0.5) / n as f64;
    match *init {
        InitialDistribution::IidNormal { mean, sd } => {
            Some((0..n).map(|i| mean + sd * normal_quantile(u(i))).collect())
        }
        InitialDistribution::IidUniform { lo, hi } => Some((0..n).map(|i| lo + (hi - lo) * u(i)).collect()),
        InitialDistribution::Point { x0 } => Some(vec![x0; n]),
        InitialDistribution::Stationary { .. } => {
            (0..n).map(|i| p.exact_stationary(u(i), normal_quantile(u(i)))).collect()
        }
    }
}

impl ParticleEnsemble {
    /// Initial cloud for `cfg`.
    pub fn initial(cfg: &EnsembleConfig, p: &Potential) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_particles;
        let chunks = n.div_ceil(CHUNK);
        let mut rngs: Vec<StreamRng> = (0..chunks as u64).map(|c| stream_rng(cfg.seed, c)).collect();
        let strat = if cfg.stratified_init { stratified_positions(&cfg.init, p, n) } else { None };
        let particles = match strat {
            Some(mut xs) => {
                let mut shuffle = stream_rng(derive_seed(cfg.seed, 0x5348_5546), 0);
                xs.shuffle(&mut shuffle);
                xs
            }
            None => {
                let parts: Vec<Vec<f64>> = rngs
                    .par_iter_mut()
                    .enumerate()
                    .map(|(c, rng)| {
                        let len = CHUNK.min(n - c * CHUNK);
                        cfg.init.sample(p, len, rng)
                    })
                    .collect::<Result<_>>()?;
                parts.concat()
            }
        };
        Self::from_particles(particles, p, rngs)
    }

    fn from_particles(particles: Vec<f64>, p: &Potential, rngs: Vec<StreamRng>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Empty("particles"));
        }
        let mut grad = vec![0.0; particles.len()];
        let parts: Vec<(f64, f64)> =
            particles.par_chunks(CHUNK).zip(grad.par_chunks_mut(CHUNK)).map(|(xs, gs)| chunk_sums(xs, gs, p)).collect();
        let m = reduce_moments(&parts, particles.len());
        Ok(Self { particles, grad, t: 0.0, k: 0, moment_history: vec![MomentPoint { t: 0.0, a: m.a, b: m.b }], rngs })
    }

    /// Ensemble with given particles and its own streams derived from `seed`.
    pub fn with_particles(particles: Vec<f64>, p: &Potential, seed: u64) -> Result<Self> {
        let rngs = (0..particles.len().div_ceil(CHUNK) as u64).map(|c| stream_rng(seed, c)).collect();
        Self::from_particles(particles, p, rngs)
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    /// Moment pair of the current cloud.
    pub fn moments(&self) -> MomentPair {
        let m = self.moment_history[self.moment_history.len() - 1];
        MomentPair { a: m.a, b: m.b }
    }

    /// `x ← x + √(Γ h) ξ - 𝒢 V'(x) h` with `(Γ, 𝒢)` supplied by the caller.
    pub fn step_with_coefficients(&mut self, p: &Potential, gamma: f64, gee: f64, h: f64) -> Result<()> {
        let sd = (gamma * h).sqrt();
        let drift = gee * h;
        let parts: Vec<(f64, f64)> = self
            .particles
            .par_chunks_mut(CHUNK)
            .zip(self.grad.par_chunks_mut(CHUNK))
            .zip(self.rngs.par_iter_mut())
            .map(|((xs, gs), rng)| {
                for (x, g) in xs.iter_mut().zip(gs.iter()) {
                    let xi: f64 = rng.sample(StandardNormal);
                    *x += sd * xi - drift * g;
                }
                chunk_sums(xs, gs, p)
            })
            .collect();
        let m = reduce_moments(&parts, self.particles.len());
        self.k += 1;
        self.t += h;
        self.moment_history.push(MomentPoint { t: self.t, a: m.a, b: m.b });
        Ok(())
    }

    /// One Euler step of length `h` with coefficients frozen at the current
    /// empirical moments.
    pub fn step(&mut self, p: &Potential, s: ScalingParams, h: f64) -> Result<()> {
        let m = self.moments();
        self.step_with_coefficients(p, gamma_coef(m, s), gee_coef(m, s), h)
    }
}

/// One Euler step of `cfg.dt` (or less, if the horizon is closer).
pub fn ensemble_step(e: &mut ParticleEnsemble, p: &Potential, cfg: &EnsembleConfig) -> Result<()> {
    let s = ScalingParams::new(cfg.l)?;
    let h = cfg.time_of(e.k + 1) - cfg.time_of(e.k);
    if h <= 0.0 {
        return Err(Error::InvalidParameter("ensemble already at horizon".into()));
    }
    e.step(p, s, h)?;
    e.t = cfg.time_of(e.k);
    if let Some(last) = e.moment_history.last_mut() {
        last.t = e.t;
    }
    Ok(())
}

/// Particle vector at one recorded time; index `i` is the same particle in
/// every snapshot of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSnapshot {
    pub t: f64,
    pub particles: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub snapshots: Vec<EnsembleSnapshot>,
    pub history: Vec<MomentPoint>,
}

impl EnsembleRun {
    pub fn snapshot(&self, t: f64) -> Option<&EnsembleSnapshot> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    /// Moment pair at the history point closest to `t`.
    pub fn moments_at(&self, t: f64) -> Option<MomentPoint> {
        let h = &self.history;
        let j = h.partition_point(|m| m.t < t);
        let cands = [j.checked_sub(1), Some(j)];
        cands
            .into_iter()
            .flatten()
            .filter_map(|i| h.get(i))
            .min_by(|x, y| (x.t - t).abs().total_cmp(&(y.t - t).abs()))
            .copied()
    }
}

fn check_record_times(cfg: &EnsembleConfig, record_times: &[f64]) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for &t in record_times {
        if !(t.is_finite() && t >= 0.0 && t <= cfg.horizon + 1e-12 && t > prev) {
            return Err(Error::InvalidParameter(format!(
                "record times must increase strictly within [0, {}], got {t}",
                cfg.horizon
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Runs the particle system to `cfg.horizon`, snapshotting at each recorded
/// time (rounded up to the step grid).
pub fn run_ensemble(cfg: &EnsembleConfig, p: &Potential, record_times: &[f64]) -> Result<EnsembleRun> {
    check_record_times(cfg, record_times)?;
    let mut e = ParticleEnsemble::initial(cfg, p)?;
    let stops: Vec<u64> = record_times.iter().map(|&t| cfg.step_of(t)).collect();
    let mut snapshots = Vec::with_capacity(record_times.len());
    let mut next = 0;
    let total = cfg.steps();
    loop {
        while next < stops.len() && stops[next] == e.k {
            snapshots.push(EnsembleSnapshot { t: record_times[next], particles: e.particles.clone() });
            next += 1;
        }
        if e.k >= total {
            break;
        }
        ensemble_step(&mut e, p, cfg)?;
    }
    Ok(EnsembleRun { snapshots, history: e.moment_history })
}

/// Polynomial factor of a taper test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaperKind {
    Linear,
    Square,
    Sine,
}

/// Smooth compactly supported test functions for the martingale problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `(1 - (x/R)²)³ q(x)` on `|x| < R`, zero outside; twice continuously
    /// differentiable.
    Taper {
        kind: TaperKind,
        radius: f64,
    },
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            Self::Constant(c) => format!("constant:{c}"),
            Self::Taper { kind, radius } => {
                let q = match kind {
                    TaperKind::Linear => "x",
                    TaperKind::Square => "x2",
                    TaperKind::Sine => "sin",
                };
                format!("taper_{q}:{radius}")
            }
        }
    }

    /// `(φ, φ', φ'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match *self {
            Self::Constant(c) => (c, 0.0, 0.0),
            Self::Taper { kind, radius } => {
                if x.abs() >= radius {
                    return (0.0, 0.0, 0.0);
                }
                let r2 = radius * radius;
                let w = 1.0 - x * x / r2;
                let psi = w * w * w;
                let dpsi = -6.0 * x / r2 * w * w;
                let ddpsi = -6.0 / r2 * w * w + 24.0 * x * x / (r2 * r2) * w;
                let (q, dq, ddq) = match kind {
                    TaperKind::Linear => (x, 1.0, 0.0),
                    TaperKind::Square => (x * x, 2.0 * x, 2.0),
                    TaperKind::Sine => (x.sin(), x.cos(), -x.sin()),
                };
                (psi * q, dpsi * q + psi * dq, ddpsi * q + 2.0 * dpsi * dq + psi * ddq)
            }
        }
    }
}

/// Radius covering a fraction `mass` of the particles in absolute value.
pub fn taper_radius(particles: &[f64], mass: f64) -> Result<f64> {
    if particles.is_empty() {
        return Err(Error::Empty("particles"));
    }
    let mut abs: Vec<f64> = particles.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let idx = ((mass * abs.len() as f64).ceil() as usize).clamp(1, abs.len()) - 1;
    Ok(abs[idx])
}

/// Martingale-problem defect with its standard error over particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectEstimate {
    pub defect: f64,
    pub se: f64,
}

/// Estimates `E[φ(X_t) - φ(X_s) - ∫ₛᵗ L_{P_r}φ(X_r) dr]` where
/// `L_μφ = ½Γ φ'' - 𝒢 V' φ'`. The integral uses the trapezoid rule over the
/// snapshots in `[s, t]` with coefficients read from the moment history.
pub fn martingale_defect(
    run: &EnsembleRun,
    p: &Potential,
    sp: ScalingParams,
    phi: TestFunction,
    s: f64,
    t: f64,
) -> Result<DefectEstimate> {
    if !(s < t) {
        return Err(Error::InvalidParameter(format!("need s < t, got s={s}, t={t}")));
    }
    let first = run.snapshot(s).ok_or_else(|| Error::GridMismatch(format!("no snapshot at s={s}")))?;
    run.snapshot(t).ok_or_else(|| Error::GridMismatch(format!("no snapshot at t={t}")))?;
    let tol = 1e-9 * t.abs().max(1.0);
    let window: Vec<&EnsembleSnapshot> = run.snapshots.iter().filter(|sn| sn.t >= s - tol && sn.t <= t + tol).collect();
    let n = first.particles.len();
    let mut integral = vec![0.0; n];
    let gen = |sn: &EnsembleSnapshot| -> Result<Vec<f64>> {
        let m = run.moments_at(sn.t).ok_or_else(|| Error::GridMismatch(format!("no moments at t={}", sn.t)))?;
        let mp = MomentPair { a: m.a, b: m.b };
        let (g, ge) = (gamma_coef(mp, sp), gee_coef(mp, sp));
        Ok(sn
            .particles
            .iter()
            .map(|&x| {
                let (_, d1, d2) = phi.eval(x);
                0.5 * g * d2 - ge * p.v1(x) * d1
            })
            .collect())
    };
    let mut prev = gen(window[0])?;
    for pair in window.windows(2) {
        let cur = gen(pair[1])?;
        let h = pair[1].t - pair[0].t;
        for i in 0..n {
            integral[i] += 0.5 * h * (prev[i] + cur[i]);
        }
        prev = cur;
    }
    let last = window[window.len() - 1];
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for ((x1, x0), int) in last.particles.iter().zip(&first.particles).zip(&integral) {
        let d = phi.eval(*x1).0 - phi.eval(*x0).0 - int;
        sum += d;
        sum2 += d * d;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(DefectEstimate { defect: mean, se: (var / nf).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_ode::integrate_moment_ode;

    fn cfg(n: usize, dt: f64, horizon: f64, init: InitialDistribution) -> EnsembleConfig {
        EnsembleConfig { n_particles: n, dt, horizon, l: 2.38, seed: 3, init, stratified_init: false }
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn config_validation() {
        let init = InitialDistribution::Point { x0: 0.0 };
        assert!(cfg(10, 0.02, 1.0, init.clone()).validate().is_err());
        assert!(cfg(0, 0.01, 1.0, init.clone()).validate().is_err());
        assert!(cfg(10, 0.01, -1.0, init.clone()).validate().is_err());
        let c = cfg(10, 0.01, 0.035, init);
        assert_eq!(c.steps(), 4);
        assert_eq!(c.time_of(4), 0.035);
        assert_eq!(c.step_of(0.02), 2);
    }

    #[test]
    fn horizon_zero_returns_initial_cloud() {
        let c = cfg(100, 0.01, 0.0, InitialDistribution::IidNormal { mean: 0.0, sd: 1.0 });
        let p = Potential::gaussian(1.0).unwrap();
        let run = run_ensemble(&c, &p, &[0.0]).unwrap();
        let e0 = ParticleEnsemble::initial(&c, &p).unwrap();
        assert_eq!(run.snapshots[0].particles, e0.particles);
        assert_eq!(run.history.len(), 1);
    }

    #[test]
    fn flat_potential_is_pure_diffusion() {
        let p = Potential::flat();
        let c = cfg(40_000, 0.01, 1.0, InitialDistribution::Point { x0: 0.0 });
        let run = run_ensemble(&c, &p, &[1.0]).unwrap();
        let (m, v) = mean_var(&run.snapshots[0].particles);
        let l2 = 2.38f64 * 2.38;
        assert!(m.abs() < 4.0 * (l2 / 40_000.0).sqrt());
        // Var of sample variance ≈ 2σ⁴/N.
        assert!((v - l2).abs() < 4.0 * l2 * (2.0f64 / 40_000.0).sqrt(), "{v}");
        assert!(run.history.iter().all(|m| m.a == 0.0 && m.b == 0.0));
    }

    #[test]
    fn forced_infinite_a_coefficients_give_scaled_brownian_motion() {
        let p = Potential::gaussian(1.0).unwrap();
        let l = 2.38f64;
        let x0: Vec<f64> = (0..40_000).map(|i| (f64::from(i) * 0.1).sin()).collect();
        let s = ScalingParams::new(l).unwrap();
        let inf = MomentPair { a: f64::INFINITY, b: 1.0 };
        let (g, ge) = (gamma_coef(inf, s), gee_coef(inf, s));
        assert_eq!((g, ge), (0.5 * l * l, 0.0));
        let mut e = ParticleEnsemble::with_particles(x0.clone(), &p, 1).unwrap();
        for _ in 0..100 {
            e.step_with_coefficients(&p, g, ge, 0.01).unwrap();
        }
        let inc: Vec<f64> = e.particles.iter().zip(&x0).map(|(x, y)| x - y).collect();
        let (m, v) = mean_var(&inc);
        assert!(m.abs() < 0.05);
        assert!((v - 0.5 * l * l).abs() < 4.0 * 0.5 * l * l * (2.0f64 / 40_000.0).sqrt(), "{v}");
    }

    #[test]
    fn stationary_gaussian_keeps_unit_moments() {
        let p = Potential::gaussian(1.0).unwrap();
        let mut c = cfg(20_000, 0.005, 1.0, InitialDistribution::Stationary { burnin: 0 });
        c.stratified_init = true;
        let run = run_ensemble(&c, &p, &[]).unwrap();
        assert!((run.history[0].a - 1.0).abs() < 1e-3);
        assert!(run.history.iter().all(|m| (m.a - 1.0).abs() < 0.05 && m.b == 1.0));
    }

    #[test]
    fn matches_moment_ode_at_moderate_size() {
        let p = Potential::gaussian(1.0).unwrap();
        let mut c = cfg(20_000, 0.002, 2.0, InitialDistribution::IidNormal { mean: 0.0, sd: 2.0 });
        c.stratified_init = true;
        let run = run_ensemble(&c, &p, &[]).unwrap();
        let ode = integrate_moment_ode(4.0, 2.38, 2.0, 0.002).unwrap();
        let sup = run.history.iter().map(|m| (m.a - ode.value_at(m.t).unwrap()).abs()).fold(0.0, f64::max);
        assert!(sup < 0.08, "{sup}");
    }

    #[test]
    fn stratified_placement() {
        let p = Potential::logcosh();
        let xs = stratified_positions(&InitialDistribution::Stationary { burnin: 0 }, &p, 4).unwrap();
        assert!((xs[0] + xs[3]).abs() < 1e-14 && (xs[1] + xs[2]).abs() < 1e-14);
        let pert = Potential::perturbed_gaussian(0.3).unwrap();
        assert!(stratified_positions(&InitialDistribution::Stationary { burnin: 0 }, &pert, 4).is_none());
        let u = stratified_positions(&InitialDistribution::IidUniform { lo: 0.0, hi: 1.0 }, &p, 2).unwrap();
        assert_eq!(u, vec![0.25, 0.75]);
    }

    #[test]
    fn same_seed_same_run() {
        let p = Potential::logcosh();
        let c = cfg(9000, 0.01, 0.2, InitialDistribution::Point { x0: 2.0 });
        let a = run_ensemble(&c, &p, &[0.1, 0.2]).unwrap();
        let b = run_ensemble(&c, &p, &[0.1, 0.2]).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn taper_derivatives() {
        let h = 1e-5;
        for kind in [TaperKind::Linear, TaperKind::Square, TaperKind::Sine] {
            let f = TestFunction::Taper { kind, radius: 3.0 };
            for i in -35..=35 {
                let x = f64::from(i) * 0.1;
                let (_, d1, d2) = f.eval(x);
                let fd1 = (f.eval(x + h).0 - f.eval(x - h).0) / (2.0 * h);
                let fd2 = (f.eval(x + h).1 - f.eval(x - h).1) / (2.0 * h);
                // φ''' jumps at ±R, so the second-order difference is only O(h) there.
                assert!((fd1 - d1).abs() < 1e-6 && (fd2 - d2).abs() < 5e-5, "{kind:?} x={x}");
            }
            assert_eq!(f.eval(3.0), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn taper_radius_quantile() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(taper_radius(&xs, 0.999).unwrap(), 999.0);
        assert_eq!(taper_radius(&xs, 1.0).unwrap(), 1000.0);
    }

    #[test]
    fn constant_test_function_has_zero_defect() {
        let p = Potential::gaussian(1.0).unwrap();
        let c = cfg(1000, 0.01, 0.2, InitialDistribution::IidNormal { mean: 0.0, sd: 1.0 });
        let run = run_ensemble(&c, &p, &[0.0, 0.1, 0.2]).unwrap();
        let d = martingale_defect(&run, &p, ScalingParams::new(2.38).unwrap(), TestFunction::Constant(2.0), 0.0, 0.2)
            .unwrap();
        assert_eq!(d.defect, 0.0);
        assert!(martingale_defect(&run, &p, ScalingParams::new(2.38).unwrap(), TestFunction::Constant(2.0), 0.0, 0.15)
            .is_err());
    }

    #[test]
    fn heat_equation_balance_on_flat_potential() {
        // With V ≡ 0 the generator is ½ l² ∂²; from a point mass the law at r
        // is N(0, l² r), so the defect should vanish up to MC and trapezoid
        // error.
        let p = Potential::flat();
        let l = 1.0;
        let c = EnsembleConfig {
            n_particles: 50_000,
            dt: 0.005,
            horizon: 1.0,
            l,
            seed: 8,
            init: InitialDistribution::Point { x0: 0.0 },
            stratified_init: false,
        };
        let times: Vec<f64> = (0..=20).map(|i| f64::from(i) * 0.05).collect();
        let run = run_ensemble(&c, &p, &times).unwrap();
        let phi = TestFunction::Taper { kind: TaperKind::Square, radius: 3.5 };
        let d = martingale_defect(&run, &p, ScalingParams::new(l).unwrap(), phi, 0.0, 1.0).unwrap();
        assert!(d.defect.abs() <= 3.0 * (d.se + 5.0 * c.dt), "{d:?}");
    }
}
