//! The random walk Metropolis chain on a product target in dimension `n`.
//!
//! One step proposes `Y = X + (l/√n) G` with `G ~ N(0, I_n)` and accepts all
//! coordinates together when `ln U ≤ Σᵢ V(Xᵢ) - V(Yᵢ)`.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::closed_forms::{MomentPair, ScalingParams};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::rng::{open_unit, stream_rng, StreamRng};

/// Law of the initial positions; coordinates are i.i.d. or all equal.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDistribution {
    IidNormal {
        mean: f64,
        sd: f64,
    },
    IidUniform {
        lo: f64,
        hi: f64,
    },
    /// Draws from `e^{-V}/Z`, exactly when a sampler exists and otherwise by
    /// a one-dimensional Metropolis run of `burnin` steps per coordinate.
    Stationary {
        burnin: usize,
    },
    Point {
        x0: f64,
    },
}

impl fmt::Display for InitialDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IidNormal { mean, sd } => write!(f, "normal:{mean},{sd}"),
            Self::IidUniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Stationary { burnin } => write!(f, "stationary:{burnin}"),
            Self::Point { x0 } => write!(f, "point:{x0}"),
        }
    }
}

const DEFAULT_BURNIN: usize = 2000;

impl InitialDistribution {
    /// Parses `normal:MEAN,SD`, `uniform:LO,HI`, `stationary[:BURNIN]` or
    /// `point:X0`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n.trim(), r),
            None => (spec.trim(), ""),
        };
        let nums = || -> Result<Vec<f64>> {
            if rest.trim().is_empty() {
                return Ok(Vec::new());
            }
            rest.split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad init parameter `{t}`")))
                })
                .collect()
        };
        let bad = || Error::InvalidParameter(format!("cannot parse init `{spec}`"));
        let init = match name {
            "normal" => match nums()?[..] {
                [mean, sd] => Self::IidNormal { mean, sd },
                _ => return Err(bad()),
            },
            "uniform" => match nums()?[..] {
                [lo, hi] => Self::IidUniform { lo, hi },
                _ => return Err(bad()),
            },
            "stationary" => {
                let burnin = if rest.trim().is_empty() {
                    DEFAULT_BURNIN
                } else {
                    rest.trim().parse::<usize>().map_err(|_| bad())?
                };
                Self::Stationary { burnin }
            }
            "point" => match nums()?[..] {
                [x0] => Self::Point { x0 },
                _ => return Err(bad()),
            },
            _ => return Err(bad()),
        };
        init.validate()?;
        Ok(init)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::IidNormal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            Self::IidUniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Self::Stationary { .. } => true,
            Self::Point { x0 } => x0.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid initial distribution {self}")))
        }
    }

    /// `n` initial coordinates drawn from `rng`.
    pub fn sample(&self, p: &Potential, n: usize, rng: &mut StreamRng) -> Result<Vec<f64>> {
        match *self {
            Self::IidNormal { mean, sd } => {
                Ok((0..n).map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal)).collect())
            }
            Self::IidUniform { lo, hi } => Ok((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()),
            Self::Point { x0 } => Ok(vec![x0; n]),
            Self::Stationary { burnin } => {
                if p.is_flat() {
                    return Err(Error::InvalidParameter("flat potential has no stationary law".into()));
                }
                (0..n).map(|_| stationary_draw(p, burnin, rng)).collect()
            }
        }
    }
}

fn stationary_draw(p: &Potential, burnin: usize, rng: &mut StreamRng) -> Result<f64> {
    let u = open_unit(rng).min(1.0 - f64::EPSILON);
    let g: f64 = rng.sample(StandardNormal);
    if let Some(x) = p.exact_stationary(u, g) {
        return Ok(x);
    }
    if p.v2_sup <= 0.0 {
        return Err(Error::InvalidParameter(format!("no stationary sampler for {}", p.name)));
    }
    let step = 2.38 / p.v2_sup.sqrt();
    let mut x = 0.0;
    let mut vx = p.v(x);
    for _ in 0..burnin {
        let y = x + step * rng.sample::<f64, _>(StandardNormal);
        let vy = p.v(y);
        if open_unit(rng).ln() <= vx - vy {
            x = y;
            vx = vy;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n: usize,
    pub l: f64,
    pub steps: u64,
    pub seed: u64,
    pub init: InitialDistribution,
    /// Number of leading coordinates stored in snapshots.
    pub keep_components: usize,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("dimension n must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        ScalingParams::new(self.l)?;
        self.init.validate()
    }

    pub fn scaling(&self) -> Result<ScalingParams> {
        ScalingParams::new(self.l)
    }
}

/// Outcome of one Metropolis step. The moments refer to the configuration
/// before the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub accepted: bool,
    pub log_ratio: f64,
    /// `min(1, e^{log_ratio})`, the conditional acceptance probability.
    pub accept_prob: f64,
    pub a_emp: f64,
    pub b_emp: f64,
}

/// Positions, step counter and the stream that drives the chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    positions: Vec<f64>,
    v_cur: Vec<f64>,
    proposal: Vec<f64>,
    v_prop: Vec<f64>,
    noise: Vec<f64>,
    pub k: u64,
    rng: StreamRng,
}

impl ChainState {
    pub fn new(positions: Vec<f64>, p: &Potential, rng: StreamRng) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("chain positions"));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("initial positions must be finite".into()));
        }
        let n = positions.len();
        let v_cur = positions.iter().map(|&x| p.v(x)).collect();
        Ok(Self { positions, v_cur, proposal: vec![0.0; n], v_prop: vec![0.0; n], noise: vec![0.0; n], k: 0, rng })
    }

    /// Initial state for replica `replica` of `cfg`: the replica's stream
    /// first draws the initial positions, then drives the steps.
    pub fn initial(cfg: &ChainConfig, p: &Potential, replica: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(cfg.seed, replica);
        let x0 = cfg.init.sample(p, cfg.n, &mut rng)?;
        Self::new(x0, p, rng)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn dim(&self) -> usize {
        self.positions.len()
    }

    fn draw_noise(&mut self) -> f64 {
        for g in self.noise.iter_mut() {
            *g = self.rng.sample(StandardNormal);
        }
        open_unit(&mut self.rng)
    }

    /// Core update from the noise currently in `self.noise`.
    fn apply(&mut self, p: &Potential, l: f64, u: f64) -> (bool, f64) {
        let scale = l / (self.dim() as f64).sqrt();
        let mut log_ratio = 0.0;
        for i in 0..self.positions.len() {
            let y = self.positions[i] + scale * self.noise[i];
            let vy = p.v(y);
            self.proposal[i] = y;
            self.v_prop[i] = vy;
            log_ratio += self.v_cur[i] - vy;
        }
        let accepted = u.ln() <= log_ratio;
        if accepted {
            std::mem::swap(&mut self.positions, &mut self.proposal);
            std::mem::swap(&mut self.v_cur, &mut self.v_prop);
        }
        self.k += 1;
        (accepted, log_ratio)
    }

    fn record(accepted: bool, log_ratio: f64, pre: MomentPair) -> StepRecord {
        StepRecord { accepted, log_ratio, accept_prob: accept_prob(log_ratio), a_emp: pre.a, b_emp: pre.b }
    }

    /// One step with noise drawn from the state's stream: `n` normals in
    /// coordinate order, then the uniform.
    pub fn step(&mut self, p: &Potential, l: f64) -> StepRecord {
        let pre = empirical_moments(&self.positions, p).expect("nonempty state");
        let u = self.draw_noise();
        let (acc, lr) = self.apply(p, l, u);
        Self::record(acc, lr, pre)
    }

    /// One step with caller-supplied normals and uniform `u ∈ (0, 1]`.
    pub fn step_with_noise(&mut self, p: &Potential, l: f64, normals: &[f64], u: f64) -> Result<StepRecord> {
        if normals.len() != self.dim() {
            return Err(Error::InvalidParameter(format!("expected {} normals, got {}", self.dim(), normals.len())));
        }
        let pre = empirical_moments(&self.positions, p)?;
        self.noise.copy_from_slice(normals);
        let (acc, lr) = self.apply(p, l, u);
        Ok(Self::record(acc, lr, pre))
    }

    /// Same transition as [`step`](Self::step) without the moment bookkeeping.
    fn advance(&mut self, p: &Potential, l: f64) -> (bool, f64) {
        let u = self.draw_noise();
        let (acc, lr) = self.apply(p, l, u);
        (acc, accept_prob(lr))
    }
}

fn accept_prob(log_ratio: f64) -> f64 {
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// `(mean V'(xᵢ)², mean V''(xᵢ))`.
pub fn empirical_moments(xs: &[f64], p: &Potential) -> Result<MomentPair> {
    if xs.is_empty() {
        return Err(Error::Empty("positions"));
    }
    let (mut a, mut b) = (0.0, 0.0);
    for &x in xs {
        let d = p.v1(x);
        a += d * d;
        b += p.v2(x);
    }
    let n = xs.len() as f64;
    Ok(MomentPair { a: a / n, b: b / n })
}

/// Step index `⌊n t⌋` for a recorded time.
pub fn step_index(n: usize, t: f64) -> u64 {
    let x = n as f64 * t;
    // Guard against products such as 0.7 * 10 = 6.999...
    (x + 1e-9 * x.abs().max(1.0)).floor() as u64
}

/// Chain state read at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub k: u64,
    /// Leading `keep_components` coordinates.
    pub positions: Vec<f64>,
    pub a_emp: f64,
    pub b_emp: f64,
    /// Mean conditional acceptance probability over a window of `⌈n/10⌉`
    /// steps around step `k + 1`.
    pub acc_window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub replica: u64,
    pub snapshots: Vec<Snapshot>,
    pub accepted: u64,
    pub steps: u64,
}

impl Trajectory {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.steps as f64
    }
}

/// Inclusive 1-based step range of the acceptance window centred at `k + 1`.
pub fn acceptance_window(n: usize, k: u64, steps: u64) -> (u64, u64) {
    let w = (n as u64).div_ceil(10).max(1).min(steps);
    let centre = (k + 1).min(steps);
    let mut start = centre.saturating_sub(w / 2).max(1);
    let end = (start + w - 1).min(steps);
    if end - start + 1 < w {
        start = end + 1 - w;
    }
    (start, end)
}

fn check_times(cfg: &ChainConfig, record_times: &[f64]) -> Result<Vec<u64>> {
    let mut prev = f64::NEG_INFINITY;
    let mut ks = Vec::with_capacity(record_times.len());
    for &t in record_times {
        if !(t.is_finite() && t >= 0.0 && t >= prev) {
            return Err(Error::InvalidParameter(format!("record times must be sorted and nonnegative, got {t}")));
        }
        prev = t;
        let k = step_index(cfg.n, t);
        if k > cfg.steps {
            return Err(Error::InvalidParameter(format!("record time {t} needs step {k}, beyond {} steps", cfg.steps)));
        }
        ks.push(k);
    }
    Ok(ks)
}

/// Runs one replica for `cfg.steps` steps and snapshots it at `⌊n t⌋` for
/// every recorded `t`.
pub fn run_chain(cfg: &ChainConfig, p: &Potential, record_times: &[f64], replica: u64) -> Result<Trajectory> {
    let ks = check_times(cfg, record_times)?;
    let mut state = ChainState::initial(cfg, p, replica)?;
    let keep = cfg.keep_components.min(cfg.n);
    let mut probs = Vec::with_capacity(cfg.steps as usize);
    let mut accepted = 0u64;
    let mut pending: Vec<(f64, u64, Vec<f64>, MomentPair)> = Vec::with_capacity(ks.len());
    let mut next = 0;
    let take = |state: &ChainState, next: &mut usize, pending: &mut Vec<_>| -> Result<()> {
        while *next < ks.len() && ks[*next] == state.k {
            let m = empirical_moments(state.positions(), p)?;
            pending.push((record_times[*next], state.k, state.positions()[..keep].to_vec(), m));
            *next += 1;
        }
        Ok(())
    };
    take(&state, &mut next, &mut pending)?;
    for _ in 0..cfg.steps {
        let (acc, prob) = state.advance(p, cfg.l);
        accepted += u64::from(acc);
        probs.push(prob);
        take(&state, &mut next, &mut pending)?;
    }
    let snapshots = pending
        .into_iter()
        .map(|(t, k, positions, m)| {
            let (s, e) = acceptance_window(cfg.n, k, cfg.steps);
            let win = &probs[(s - 1) as usize..e as usize];
            let acc_window = win.iter().sum::<f64>() / win.len() as f64;
            Snapshot { t, k, positions, a_emp: m.a, b_emp: m.b, acc_window }
        })
        .collect();
    Ok(Trajectory { replica, snapshots, accepted, steps: cfg.steps })
}

/// Independent replicas `0..replicas`, in replica order.
pub fn run_replicas(cfg: &ChainConfig, p: &Potential, record_times: &[f64], replicas: u64) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    check_times(cfg, record_times)?;
    (0..replicas).into_par_iter().map(|r| run_chain(cfg, p, record_times, r)).collect()
}
