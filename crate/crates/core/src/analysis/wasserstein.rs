//! Wasserstein-1 distance between one-dimensional samples.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// W₁ between two sorted samples.
///
/// Equal sizes use the order-statistics formula `mean |x_(i) - y_(i)|`;
/// otherwise `∫|F - G|` is integrated exactly between merged breakpoints.
pub fn wasserstein1_sorted(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::Empty("wasserstein sample"));
    }
    if xs.len() == ys.len() {
        let s: f64 = xs.iter().zip(ys).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / xs.len() as f64);
    }
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = xs[0].min(ys[0]);
    let mut total = 0.0;
    while i < xs.len() || j < ys.len() {
        let next = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / nx - j as f64 / ny).abs() * (next - prev);
        while i < xs.len() && xs[i] <= next {
            i += 1;
        }
        while j < ys.len() && ys[j] <= next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

/// W₁ between the empirical laws of `xs` and `ys`.
pub fn wasserstein1_1d(xs: &[f64], ys: &[f64]) -> Result<f64> {
    wasserstein1_sorted(&sorted(xs), &sorted(ys))
}

/// W₁ with a bootstrap standard error that resamples `xs` only, holding the
/// reference sample `ys` fixed.
pub fn wasserstein1_bootstrap(xs: &[f64], ys: &[f64], reps: usize, seed: u64) -> Result<(f64, f64)> {
    let ys = sorted(ys);
    let w = wasserstein1_sorted(&sorted(xs), &ys)?;
    if reps < 2 {
        return Ok((w, f64::NAN));
    }
    let mut rng = stream_rng(seed, 0);
    let n = xs.len();
    let mut buf = vec![0.0; n];
    let mut vals = Vec::with_capacity(reps);
    for _ in 0..reps {
        for b in buf.iter_mut() {
            *b = xs[rng.random_range(0..n)];
        }
        buf.sort_by(f64::total_cmp);
        vals.push(wasserstein1_sorted(&buf, &ys)?);
    }
    let m = vals.iter().sum::<f64>() / reps as f64;
    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (reps as f64 - 1.0);
    Ok((w, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let xs = [0.3, -1.0, 2.5];
        assert_eq!(wasserstein1_1d(&xs, &xs).unwrap(), 0.0);
        assert_eq!(wasserstein1_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein1_1d(&[0.0, 0.0], &[3.0, 1.0]).unwrap(), 2.0);
        assert!(wasserstein1_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn unequal_sizes() {
        // δ₀ against uniform mass on {0, 1}: half the mass moves by 1.
        assert!((wasserstein1_1d(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        // Duplicating every point leaves the law unchanged.
        let xs = [0.1, 0.7, -0.4];
        let ys = [0.2, 0.2, 0.9, 0.9, -1.0, -1.0];
        let a = wasserstein1_1d(&xs, &[0.2, 0.9, -1.0]).unwrap();
        let b = wasserstein1_1d(&xs, &ys).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn shift_equals_distance() {
        let xs: Vec<f64> = (0..100).map(|i| f64::from(i).sin()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + 0.25).collect();
        assert!((wasserstein1_1d(&xs, &ys).unwrap() - 0.25).abs() < 1e-14);
        let mut zs = ys.clone();
        zs.extend_from_slice(&ys);
        assert!((wasserstein1_1d(&xs, &zs).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let xs: Vec<f64> = (0..200).map(|i| (f64::from(i) * 0.77).sin()).collect();
        let ys: Vec<f64> = (0..500).map(|i| (f64::from(i) * 0.31).cos()).collect();
        let a = wasserstein1_bootstrap(&xs, &ys, 50, 4).unwrap();
        assert_eq!(a, wasserstein1_bootstrap(&xs, &ys, 50, 4).unwrap());
        assert!(a.1 > 0.0);
    }
}
