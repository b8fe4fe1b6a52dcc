//! One-sample Kolmogorov–Smirnov test.

use crate::error::{Error, Result};

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = f64::from(k);
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `D = sup |F_n - F|` and its asymptotic p-value with Stephens' small-sample
/// correction `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::Empty("ks sample"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let i = i as f64;
        d = d.max((i + 1.0) / n - f).max(f - i / n);
    }
    let sn = n.sqrt();
    Ok(KsResult { statistic: d, p_value: kolmogorov_q((sn + 0.12 + 0.11 / sn) * d) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::normal_cdf;

    #[test]
    fn q_reference_values() {
        // Standard Kolmogorov critical values.
        assert!((kolmogorov_q(1.358_098_8) - 0.05).abs() < 1e-6);
        assert!((kolmogorov_q(1.627_624_1) - 0.01).abs() < 1e-6);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn statistic_of_single_point() {
        let r = ks_test(&[0.0], normal_cdf).unwrap();
        assert_eq!(r.statistic, 0.5);
    }

    #[test]
    fn quantile_grid_passes_and_shift_fails() {
        let n = 400;
        let xs: Vec<f64> =
            (0..n).map(|i| crate::closed_forms::normal_quantile((f64::from(i) + 0.5) / f64::from(n))).collect();
        assert!(ks_test(&xs, normal_cdf).unwrap().p_value > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.5).collect();
        assert!(ks_test(&shifted, normal_cdf).unwrap().p_value < 1e-6);
    }
}
