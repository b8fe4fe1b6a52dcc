//! Monte Carlo counterparts of the Gaussian expectation identities.
//!
//! Samples are drawn in antithetic pairs `(Z, -Z)` and grouped into fixed-size
//! blocks, each with its own random stream, so an estimate depends only on
//! `(samples, seed)` and not on the number of worker threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{
    gaussian_exp_cross, gaussian_exp_first, gaussian_exp_second, gee_coef, gee_gaussian_smoothing, MomentPair,
    ScalingParams,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, StreamRng};

/// Antithetic pairs per block.
const BLOCK_PAIRS: u64 = 1 << 16;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

impl McEstimate {
    pub fn z_score(&self, exact: f64) -> f64 {
        if self.se > 0.0 {
            (self.mean - exact) / self.se
        } else if self.mean == exact {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Running (count, mean, M2) for one block, merged with Chan's update.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }
}

/// Estimates `E[f]` from `samples` draws, where `pair` returns the mean of one
/// antithetic pair.
pub fn antithetic_mean<F>(samples: u64, seed: u64, pair: F) -> Result<McEstimate>
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    let pairs = samples / 2;
    if pairs < 2 {
        return Err(Error::InvalidParameter(format!("need at least 4 samples, got {samples}")));
    }
    let blocks = pairs.div_ceil(BLOCK_PAIRS);
    let parts: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let len = BLOCK_PAIRS.min(pairs - b * BLOCK_PAIRS);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(pair(&mut rng));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = total.m2 / (total.n - 1.0);
    Ok(McEstimate { mean: total.mean, se: (var / total.n).sqrt() })
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

fn capped_exp(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// MC estimate of `E[G (e^{αG+βG̃+γ} ∧ 1)]`.
pub fn mc_exp_first(alpha: f64, beta: f64, gamma: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    antithetic_mean(samples, seed, |rng| {
        let (g, h) = (normal(rng), normal(rng));
        let u = alpha * g + beta * h;
        0.5 * (g * capped_exp(u + gamma) - g * capped_exp(gamma - u))
    })
}

/// MC estimate of `E[G² (e^{αG+βG̃+γ} ∧ 1)]`.
pub fn mc_exp_second(alpha: f64, beta: f64, gamma: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    antithetic_mean(samples, seed, |rng| {
        let (g, h) = (normal(rng), normal(rng));
        let u = alpha * g + beta * h;
        0.5 * g * g * (capped_exp(u + gamma) + capped_exp(gamma - u))
    })
}

/// MC estimate of `E[G Ĝ (e^{αG+βG̃+δĜ+γ} ∧ 1)]`.
pub fn mc_exp_cross(alpha: f64, beta: f64, delta: f64, gamma: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    antithetic_mean(samples, seed, |rng| {
        let (g, h, k) = (normal(rng), normal(rng), normal(rng));
        let u = alpha * g + beta * h + delta * k;
        0.5 * g * k * (capped_exp(u + gamma) + capped_exp(gamma - u))
    })
}

/// MC estimate of `E[𝒢(a, αG + β)]`.
pub fn mc_gee_smoothing(
    a: f64,
    alpha: f64,
    beta: f64,
    s: ScalingParams,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    MomentPair::new(a, beta)?;
    antithetic_mean(samples, seed, |rng| {
        let g = normal(rng);
        let up = gee_coef(MomentPair { a, b: beta + alpha * g }, s);
        let dn = gee_coef(MomentPair { a, b: beta - alpha * g }, s);
        0.5 * (up + dn)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identity {
    First,
    Second,
    Cross,
    Smoothing,
}

impl Identity {
    pub const ALL: [Identity; 4] = [Identity::First, Identity::Second, Identity::Cross, Identity::Smoothing];

    pub fn name(self) -> &'static str {
        match self {
            Identity::First => "exp_first",
            Identity::Second => "exp_second",
            Identity::Cross => "exp_cross",
            Identity::Smoothing => "gee_smoothing",
        }
    }
}

/// One closed form against its MC estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub identity: Identity,
    pub params: Vec<(&'static str, f64)>,
    pub closed_form: f64,
    pub mc: McEstimate,
}

impl IdentityCheck {
    pub fn z_score(&self) -> f64 {
        self.mc.z_score(self.closed_form)
    }

    /// Parameters as `name=value` pairs joined by `;`.
    pub fn params_string(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Coefficient bounded away from zero with a random sign.
fn signed(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    let v = uniform(rng, lo, hi);
    if rng.random::<bool>() {
        v
    } else {
        -v
    }
}

/// Evaluates one identity at a random parameter draw.
pub fn check_identity(identity: Identity, draw: u64, samples: u64, seed: u64) -> Result<IdentityCheck> {
    let tag = match identity {
        Identity::First => 1,
        Identity::Second => 2,
        Identity::Cross => 3,
        Identity::Smoothing => 4,
    };
    let label = derive_seed(seed, (tag << 32) | draw);
    let mut prng = stream_rng(label, u64::MAX);
    let mc_seed = derive_seed(label, 1);
    let (params, closed_form, mc) = match identity {
        Identity::First => {
            let alpha = signed(&mut prng, 0.1, 1.5);
            let beta = uniform(&mut prng, -1.5, 1.5);
            let gamma = uniform(&mut prng, -2.0, 1.0);
            let l = uniform(&mut prng, 0.5, 3.0);
            let cf = gaussian_exp_first(alpha, beta, gamma, ScalingParams::new(l)?);
            let mc = mc_exp_first(alpha, beta, gamma, samples, mc_seed)?;
            (vec![("alpha", alpha), ("beta", beta), ("gamma", gamma), ("l", l)], cf, mc)
        }
        Identity::Second => {
            let alpha = uniform(&mut prng, -1.5, 1.5);
            let beta = signed(&mut prng, 0.1, 1.5);
            let gamma = uniform(&mut prng, -2.0, 1.0);
            let cf = gaussian_exp_second(alpha, beta, gamma)?;
            let mc = mc_exp_second(alpha, beta, gamma, samples, mc_seed)?;
            (vec![("alpha", alpha), ("beta", beta), ("gamma", gamma)], cf, mc)
        }
        Identity::Cross => {
            let alpha = signed(&mut prng, 0.1, 1.5);
            let beta = uniform(&mut prng, -1.5, 1.5);
            let delta = signed(&mut prng, 0.1, 1.5);
            let gamma = uniform(&mut prng, -2.0, 1.0);
            let cf = gaussian_exp_cross(alpha, beta, delta, gamma)?;
            let mc = mc_exp_cross(alpha, beta, delta, gamma, samples, mc_seed)?;
            (vec![("alpha", alpha), ("beta", beta), ("delta", delta), ("gamma", gamma)], cf, mc)
        }
        Identity::Smoothing => {
            let a = uniform(&mut prng, 0.0, 3.0);
            let alpha = uniform(&mut prng, -2.0, 2.0);
            let beta = uniform(&mut prng, -2.0, 2.0);
            let l = uniform(&mut prng, 0.5, 3.0);
            let s = ScalingParams::new(l)?;
            let cf = gee_gaussian_smoothing(a, alpha, beta, s)?;
            let mc = mc_gee_smoothing(a, alpha, beta, s, samples, mc_seed)?;
            (vec![("a", a), ("alpha", alpha), ("beta", beta), ("l", l)], cf, mc)
        }
    };
    Ok(IdentityCheck { identity, params, closed_form, mc })
}

/// `draws` random parameter sets for each of the four identities.
pub fn identity_suite(draws: u64, samples: u64, seed: u64) -> Result<Vec<IdentityCheck>> {
    let mut out = Vec::with_capacity(4 * draws as usize);
    for id in Identity::ALL {
        for d in 0..draws {
            out.push(check_identity(id, d, samples, seed)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(l: f64) -> ScalingParams {
        ScalingParams::new(l).unwrap()
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (f64::from(i) * 0.37).sin()).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - whole.mean).abs() < 1e-14);
        assert!((m.m2 - whole.m2).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_deterministic() {
        let a = mc_exp_first(0.5, 0.5, 0.0, 200_000, 9).unwrap();
        let b = mc_exp_first(0.5, 0.5, 0.0, 200_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_examples_agree_with_closed_forms() {
        let n = 2_000_000;
        let e = mc_exp_first(0.5, 0.5, 0.0, n, 11).unwrap();
        assert!(e.z_score(gaussian_exp_first(0.5, 0.5, 0.0, sp(1.0))).abs() < 3.0);
        let e = mc_exp_second(0.3, 0.4, -0.2, n, 12).unwrap();
        assert!(e.z_score(gaussian_exp_second(0.3, 0.4, -0.2).unwrap()).abs() < 3.0);
        let e = mc_exp_second(0.0, 1.0, 0.0, n, 13).unwrap();
        assert!(e.z_score(0.761_578_291_865_123_4).abs() < 3.0);
        let e = mc_exp_cross(0.3, 0.2, 0.3, 0.1, n, 14).unwrap();
        assert!(e.z_score(gaussian_exp_cross(0.3, 0.2, 0.3, 0.1).unwrap()).abs() < 3.0);
        let e = mc_gee_smoothing(0.5, 2.0, -1.0, sp(1.0), 1_000_000, 15).unwrap();
        assert!(e.z_score(gee_gaussian_smoothing(0.5, 2.0, -1.0, sp(1.0)).unwrap()).abs() < 3.0);
    }

    #[test]
    fn zero_alpha_mc_is_centered() {
        let e = mc_exp_first(0.0, 1.0, -0.3, 100_000, 3).unwrap();
        assert!(e.mean.abs() < 4.0 * e.se);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(mc_exp_second(0.1, 0.1, 0.0, 3, 0).is_err());
    }

    #[test]
    fn suite_reports_params() {
        let rows = identity_suite(2, 20_000, 5).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.mc.se > 0.0 && r.closed_form.is_finite()));
        assert!(rows[0].params_string().starts_with("alpha="));
    }
}
