//! Statistics comparing the finite-dimensional chain with the limit process.

mod chaos;
mod ks;
mod moment_bound;
mod report;
mod wasserstein;

pub use chaos::{chaos_diagnostic, ChaosRow};
pub use ks::{kolmogorov_q, ks_test, KsResult};
pub use moment_bound::{increment_bound_rhs, moment_bound_check, MomentBoundRow};
pub use report::{acceptance_curve, build_report, ComparisonReport, ReportRow};
pub use wasserstein::{wasserstein1_1d, wasserstein1_bootstrap, wasserstein1_sorted};

use crate::chain::Trajectory;
use crate::error::{Error, Result};

/// State of one replica at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaPoint {
    pub positions: Vec<f64>,
    pub a_emp: f64,
    pub b_emp: f64,
    pub acc_window: f64,
}

/// Chain output regrouped by time: `points[i][r]` is replica `r` at
/// `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub times: Vec<f64>,
    pub points: Vec<Vec<ReplicaPoint>>,
}

impl ChainTable {
    pub fn from_trajectories(trs: &[Trajectory]) -> Result<Self> {
        let first = trs.first().ok_or(Error::Empty("trajectories"))?;
        let times: Vec<f64> = first.snapshots.iter().map(|s| s.t).collect();
        let mut points = vec![Vec::with_capacity(trs.len()); times.len()];
        for tr in trs {
            if tr.snapshots.len() != times.len() || tr.snapshots.iter().zip(&times).any(|(s, &t)| s.t != t) {
                return Err(Error::GridMismatch(format!("replica {} has a different time grid", tr.replica)));
            }
            for (i, s) in tr.snapshots.iter().enumerate() {
                points[i].push(ReplicaPoint {
                    positions: s.positions.clone(),
                    a_emp: s.a_emp,
                    b_emp: s.b_emp,
                    acc_window: s.acc_window,
                });
            }
        }
        Ok(Self { times, points })
    }

    pub fn replicas(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Component `c` (0-based) across replicas at time index `i`.
    pub fn component(&self, i: usize, c: usize) -> Result<Vec<f64>> {
        self.points[i]
            .iter()
            .map(|p| {
                p.positions
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::InsufficientData(format!("component {} not stored", c + 1)))
            })
            .collect()
    }

    /// Restriction to the first `r` replicas.
    pub fn head(&self, r: usize) -> Self {
        Self { times: self.times.clone(), points: self.points.iter().map(|v| v[..r.min(v.len())].to_vec()).collect() }
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
