//! Asymptotic independence of the leading chain components across replicas.

use super::{mean_se, ChainTable};
use crate::error::{Error, Result};

/// Cross-component statistics at one time. The cross fields are `None` when
/// fewer than two components are examined.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosRow {
    pub t: f64,
    pub mean1: f64,
    pub var1: f64,
    /// Mean off-diagonal correlation of `(X¹, ..., Xʲ)`.
    pub corr_value: Option<f64>,
    /// Mean off-diagonal correlation of `((X¹)², ..., (Xʲ)²)`.
    pub corr_square: Option<f64>,
    /// Standard error of `corr_square` from disjoint replica batches.
    pub corr_square_se: Option<f64>,
    /// Largest `|C(u,v) - uv|` of the empirical copula over component pairs
    /// and a 9×9 grid.
    pub copula_dev: Option<f64>,
}

const BATCHES: usize = 10;

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn mean_offdiag(cols: &[Vec<f64>]) -> f64 {
    let j = cols.len();
    let mut s = 0.0;
    for a in 0..j {
        for b in a + 1..j {
            s += pearson(&cols[a], &cols[b]);
        }
    }
    s / (j * (j - 1) / 2) as f64
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut r = vec![0.0; x.len()];
    let n1 = x.len() as f64 + 1.0;
    for (k, &i) in idx.iter().enumerate() {
        r[i] = (k as f64 + 1.0) / n1;
    }
    r
}

fn copula_deviation(cols: &[Vec<f64>]) -> f64 {
    let us: Vec<Vec<f64>> = cols.iter().map(|c| ranks(c)).collect();
    let n = cols[0].len() as f64;
    let grid: Vec<f64> = (1..=9).map(|k| f64::from(k) / 10.0).collect();
    let mut worst = 0.0f64;
    for a in 0..us.len() {
        for b in a + 1..us.len() {
            for &g1 in &grid {
                for &g2 in &grid {
                    let c = us[a].iter().zip(&us[b]).filter(|(x, y)| **x <= g1 && **y <= g2).count() as f64 / n;
                    worst = worst.max((c - g1 * g2).abs());
                }
            }
        }
    }
    worst
}

/// Per recorded time, correlation and copula statistics of the first `j`
/// stored components across replicas.
pub fn chaos_diagnostic(table: &ChainTable, j: usize) -> Result<Vec<ChaosRow>> {
    if j == 0 || j > 5 {
        return Err(Error::InvalidParameter(format!("j must lie in 1..=5, got {j}")));
    }
    let r = table.replicas();
    if r < 2 * BATCHES {
        return Err(Error::InsufficientData(format!("need at least {} replicas, got {r}", 2 * BATCHES)));
    }
    let mut rows = Vec::with_capacity(table.times.len());
    for (i, &t) in table.times.iter().enumerate() {
        let cols: Vec<Vec<f64>> = (0..j).map(|c| table.component(i, c)).collect::<Result<_>>()?;
        let (mean1, _) = mean_se(&cols[0]);
        let var1 = cols[0].iter().map(|x| (x - mean1) * (x - mean1)).sum::<f64>() / (r as f64 - 1.0);
        let mut row =
            ChaosRow { t, mean1, var1, corr_value: None, corr_square: None, corr_square_se: None, copula_dev: None };
        if j >= 2 {
            let sq: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|x| x * x).collect()).collect();
            let size = r / BATCHES;
            let batch: Vec<f64> = (0..BATCHES)
                .map(|b| {
                    let part: Vec<Vec<f64>> = sq.iter().map(|c| c[b * size..(b + 1) * size].to_vec()).collect();
                    mean_offdiag(&part)
                })
                .collect();
            let (_, se) = mean_se(&batch);
            row.corr_value = Some(mean_offdiag(&cols));
            row.corr_square = Some(mean_offdiag(&sq));
            row.corr_square_se = Some(se);
            row.copula_dev = Some(copula_deviation(&cols));
        }
        rows.push(row);
    }
    Ok(rows)
}
