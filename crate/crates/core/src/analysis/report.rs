//! Time-indexed comparison of chain replicas against the limit ensemble.

use super::{mean_se, wasserstein1_1d, ChainTable};
use crate::closed_forms::{acc_rate, gamma_coef, MomentPair, ScalingParams};
use crate::error::{Error, Result};
use crate::limit::EnsembleRun;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    /// W₁ between component 1 across replicas and the limit particles; NaN
    /// when the limit marginal is not available.
    pub w1_chain_vs_limit: f64,
    pub acc_emp: f64,
    pub acc_pred: f64,
    pub a_chain: f64,
    pub a_limit: f64,
    pub b_chain: f64,
    pub b_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
}

impl ComparisonReport {
    pub fn sup_acc_error(&self) -> f64 {
        self.rows.iter().map(|r| (r.acc_emp - r.acc_pred).abs()).fold(0.0, f64::max)
    }
}

/// Per chain time: replica-averaged windowed acceptance against
/// `acc(a(t), b(t))` from the limit moments. Also fills the moment columns.
/// The W₁ column is left as NaN.
pub fn acceptance_curve(chain: &ChainTable, limit: &EnsembleRun, s: ScalingParams) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(chain.times.len());
    for (i, &t) in chain.times.iter().enumerate() {
        let m = limit
            .moments_at(t)
            .filter(|m| (m.t - t).abs() <= 1e-6 * t.abs().max(1.0))
            .ok_or_else(|| Error::GridMismatch(format!("limit has no moments at t={t}")))?;
        let pts = &chain.points[i];
        let acc: Vec<f64> = pts.iter().map(|p| p.acc_window).collect();
        let a: Vec<f64> = pts.iter().map(|p| p.a_emp).collect();
        let b: Vec<f64> = pts.iter().map(|p| p.b_emp).collect();
        let mp = MomentPair { a: m.a, b: m.b };
        let acc_pred = acc_rate(mp, s);
        debug_assert!((acc_pred - gamma_coef(mp, s) / s.l2()).abs() <= 1e-15);
        rows.push(ReportRow {
            t,
            w1_chain_vs_limit: f64::NAN,
            acc_emp: mean_se(&acc).0,
            acc_pred,
            a_chain: mean_se(&a).0,
            a_limit: m.a,
            b_chain: mean_se(&b).0,
            b_limit: m.b,
        });
    }
    Ok(rows)
}

/// Full comparison: acceptance and moment columns for every chain time, and
/// W₁ wherever the limit run has a snapshot at that time.
pub fn build_report(
    chain: &ChainTable,
    limit: &EnsembleRun,
    s: ScalingParams,
    metadata: Vec<(String, String)>,
) -> Result<ComparisonReport> {
    let mut rows = acceptance_curve(chain, limit, s)?;
    for (i, row) in rows.iter_mut().enumerate() {
        if let Some(snap) = limit.snapshot(row.t) {
            row.w1_chain_vs_limit = wasserstein1_1d(&chain.component(i, 0)?, &snap.particles)?;
        }
    }
    Ok(ComparisonReport { metadata, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{run_replicas, ChainConfig, InitialDistribution};
    use crate::limit::{run_ensemble, EnsembleConfig};
    use crate::potentials::Potential;

    #[test]
    fn flat_potential_acceptance_is_one() {
        let p = Potential::flat();
        let ccfg = ChainConfig {
            n: 20,
            l: 1.0,
            steps: 40,
            seed: 1,
            init: InitialDistribution::Point { x0: 0.0 },
            keep_components: 1,
        };
        let trs = run_replicas(&ccfg, &p, &[0.0, 1.0, 2.0], 4).unwrap();
        let chain = ChainTable::from_trajectories(&trs).unwrap();
        let ecfg = EnsembleConfig {
            n_particles: 500,
            dt: 0.01,
            horizon: 2.0,
            l: 1.0,
            seed: 1,
            init: InitialDistribution::Point { x0: 0.0 },
            stratified_init: false,
        };
        let run = run_ensemble(&ecfg, &p, &[0.0, 1.0, 2.0]).unwrap();
        let rep = build_report(&chain, &run, ScalingParams::new(1.0).unwrap(), vec![]).unwrap();
        for r in &rep.rows {
            assert_eq!((r.acc_emp, r.acc_pred), (1.0, 1.0));
            assert!(r.w1_chain_vs_limit.is_finite());
        }
        assert_eq!(rep.rows[0].w1_chain_vs_limit, 0.0);
    }

    #[test]
    fn missing_limit_time_is_an_error() {
        let p = Potential::gaussian(1.0).unwrap();
        let ccfg = ChainConfig {
            n: 10,
            l: 1.0,
            steps: 30,
            seed: 1,
            init: InitialDistribution::Point { x0: 0.0 },
            keep_components: 1,
        };
        let trs = run_replicas(&ccfg, &p, &[3.0], 2).unwrap();
        let chain = ChainTable::from_trajectories(&trs).unwrap();
        let ecfg = EnsembleConfig {
            n_particles: 10,
            dt: 0.01,
            horizon: 1.0,
            l: 1.0,
            seed: 1,
            init: InitialDistribution::Point { x0: 0.0 },
            stratified_init: false,
        };
        let run = run_ensemble(&ecfg, &p, &[]).unwrap();
        assert!(matches!(
            acceptance_curve(&chain, &run, ScalingParams::new(1.0).unwrap()),
            Err(Error::GridMismatch(_))
        ));
    }
}
