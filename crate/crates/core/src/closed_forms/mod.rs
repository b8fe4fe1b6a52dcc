//! Coefficients of the limiting diffusion and the Gaussian expectation
//! identities behind them.
//!
//! With proposal variance `l²/n`, the mean-field limit of one coordinate of
//! the random walk Metropolis chain is driven by two maps of the moment pair
//! `(a, b) = (E[V'(X)²], E[V''(X)])`:
//!
//! ```text
//! Γ(a,b) = l² Φ(-l b / (2√a)) + 𝒢(a,b)                 a ∈ (0, ∞)
//! 𝒢(a,b) = l² e^{l²(a-b)/2} Φ(l (b/(2√a) - √a))         a ∈ (0, ∞)
//! ```
//!
//! with `Γ = l²/2, 𝒢 = 0` at `a = +∞` and `Γ = l² e^{-l² b⁺/2}`,
//! `𝒢 = 1{b>0} l² e^{-l² b/2}` at `a = 0`. `Γ` is the diffusion coefficient,
//! `𝒢` multiplies the drift `-V'(x)`, and `Γ/l²` is the limiting acceptance
//! rate.

mod gaussian;
mod normal;
pub mod oracle;

pub use gaussian::{gaussian_exp_cross, gaussian_exp_first, gaussian_exp_second, gee_gaussian_smoothing};
pub use normal::{
    exp_times_upper_tail, log_normal_cdf, normal_cdf, normal_pdf, normal_quantile, scaled_upper_tail, LN_SQRT_2PI,
};

use crate::error::{Error, Result};

/// Nonzero `a` below this is treated as the `a → 0⁺` limit in `Γ`.
const A_DENORMAL: f64 = 1e-300;

/// Proposal scale constant `l`; the proposal variance in dimension `n` is
/// `l²/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    l: f64,
}

impl ScalingParams {
    pub fn new(l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParameter(format!("l must be positive and finite, got {l}")));
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn l2(&self) -> f64 {
        self.l * self.l
    }
}

/// The pair `(a, b) = (⟨μ, V'²⟩, ⟨μ, V''⟩)`. `a` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    pub a: f64,
    pub b: f64,
}

impl MomentPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a.is_nan() || a < 0.0 || a == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!("a must lie in [0, +inf], got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::InvalidParameter(format!("b must be finite, got {b}")));
        }
        Ok(Self { a, b })
    }
}

/// `𝒢(a, b)` evaluated with the exponent merged analytically:
/// `l² e^{l²(a-b)/2} Φ(-t)` with `t = l(√a - b/(2√a))`, and
/// `l²(a-b)/2 - t²/2 = -l² b² / (8a)`.
pub fn gee_coef(p: MomentPair, s: ScalingParams) -> f64 {
    let (a, b, l2) = (p.a, p.b, s.l2());
    if a == f64::INFINITY {
        return 0.0;
    }
    if a == 0.0 {
        return if b > 0.0 { l2 * (-0.5 * l2 * b).exp() } else { 0.0 };
    }
    let sa = a.sqrt();
    let t = s.l() * (sa - b / (2.0 * sa));
    let c = 0.5 * l2 * (a - b);
    let d = -l2 * b * b / (8.0 * a);
    (l2 * exp_times_upper_tail(c, d, t)).clamp(0.0, l2)
}

/// `Γ(a, b)`, always in `[0, l²]`.
pub fn gamma_coef(p: MomentPair, s: ScalingParams) -> f64 {
    let (a, b, l2) = (p.a, p.b, s.l2());
    if a == f64::INFINITY {
        return 0.5 * l2;
    }
    if a < A_DENORMAL {
        return l2 * (-0.5 * l2 * b.max(0.0)).exp();
    }
    let first = l2 * normal_cdf(-s.l() * b / (2.0 * a.sqrt()));
    (first + gee_coef(p, s)).clamp(0.0, l2)
}

/// Limiting mean acceptance probability `Γ(a,b)/l²`.
pub fn acc_rate(p: MomentPair, s: ScalingParams) -> f64 {
    gamma_coef(p, s) / s.l2()
}

/// Speed of the stationary limit diffusion, `h(l) = 2 l² Φ(-l√I/2)`.
pub fn h_of_l(l: f64, i_fisher: f64) -> f64 {
    2.0 * l * l * normal_cdf(-0.5 * l * i_fisher.sqrt())
}

/// Maximiser of `h` over `l` by golden-section search on a bracket that
/// scales with `1/√I`.
pub fn argmax_h(i_fisher: f64, tol: f64) -> f64 {
    let inv_golden = (5f64.sqrt() - 1.0) / 2.0;
    let scale = 1.0 / i_fisher.sqrt();
    let (mut lo, mut hi) = (0.1 * scale, 10.0 * scale);
    let mut x1 = hi - inv_golden * (hi - lo);
    let mut x2 = lo + inv_golden * (hi - lo);
    let (mut f1, mut f2) = (h_of_l(x1, i_fisher), h_of_l(x2, i_fisher));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_golden * (hi - lo);
            f2 = h_of_l(x2, i_fisher);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_golden * (hi - lo);
            f1 = h_of_l(x1, i_fisher);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(l: f64) -> ScalingParams {
        ScalingParams::new(l).unwrap()
    }

    fn mp(a: f64, b: f64) -> MomentPair {
        MomentPair::new(a, b).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(ScalingParams::new(0.0).is_err());
        assert!(ScalingParams::new(f64::NAN).is_err());
        assert!(ScalingParams::new(f64::INFINITY).is_err());
        assert!(MomentPair::new(-1.0, 0.0).is_err());
        assert!(MomentPair::new(f64::NAN, 0.0).is_err());
        assert!(MomentPair::new(1.0, f64::INFINITY).is_err());
        assert!(MomentPair::new(f64::INFINITY, 3.0).is_ok());
    }

    #[test]
    fn gamma_branch_values() {
        assert_eq!(gamma_coef(mp(f64::INFINITY, 3.0), sp(1.0)), 0.5);
        assert_eq!(gamma_coef(mp(0.0, -1.0), sp(2.0)), 4.0);
        // 2 l² Φ(-1.19) at l = 2.38, mpmath reference.
        let g = gamma_coef(mp(1.0, 1.0), sp(2.38));
        assert!(rel(g, 1.325_732_383_106_594) < 1e-13, "{g}");
    }

    #[test]
    fn gee_branch_values() {
        assert_eq!(gee_coef(mp(f64::INFINITY, -2.0), sp(1.5)), 0.0);
        assert_eq!(gee_coef(mp(0.0, 0.0), sp(1.0)), 0.0);
        assert_eq!(gee_coef(mp(0.0, -0.5), sp(1.0)), 0.0);
        assert!(rel(gee_coef(mp(0.0, 2.0), sp(1.5)), 2.25 * (-2.25f64).exp()) < 1e-15);
        let g = gee_coef(mp(1.0, 1.0), sp(2.38));
        assert!(rel(g, 0.662_866_191_553_297) < 1e-13, "{g}");
    }

    #[test]
    fn acc_rate_values() {
        let a = acc_rate(mp(1.0, 1.0), sp(2.38));
        assert!((a - 0.234_046_392_046_217_44).abs() < 1e-14);
        for l in [0.3, 1.0, 7.0] {
            assert_eq!(acc_rate(mp(f64::INFINITY, 0.7), sp(l)), 0.5);
            assert_eq!(acc_rate(mp(0.0, -5.0), sp(l)), 1.0);
        }
    }

    #[test]
    fn generic_values_match_high_precision() {
        // (a, b, l, Γ, 𝒢) from mpmath at 40 digits.
        let cases = [
            (4.0, 1.0, 2.38, 1.994_850_627_433_490_2, 0.431_919_548_910_778_7),
            (0.25, 1.0, 2.38, 0.646_888_843_794_740_6, 0.597_855_990_306_604_6),
            (1e6, -3.0, 5.0, 12.576_795_628_545_232, 0.001_994_652_229_773_590_7),
            (1e6, 50.0, 5.0, 11.258_523_617_083_676, 0.001_979_237_836_498_173_5),
            (1e-4, 0.5, 1.0, 0.778_839_724_084_075_6, 0.778_839_724_084_075_6),
            (3.0, -2.0, 0.5, 0.211_361_636_090_035_27, 0.057_965_385_175_591_2),
            (100.0, 1.0, 2.38, 2.658_504_913_220_894_8, 0.094_584_050_575_376_08),
            (2500.0, 1.0, 2.38, 2.797_409_314_601_259_7, 0.018_986_731_550_580_97),
        ];
        for (a, b, l, g, ge) in cases {
            let p = mp(a, b);
            assert!(rel(gamma_coef(p, sp(l)), g) < 1e-12, "Γ({a},{b};{l})");
            assert!(rel(gee_coef(p, sp(l)), ge) < 1e-12, "𝒢({a},{b};{l})");
        }
    }

    #[test]
    fn h_values() {
        let h = h_of_l(2.38, 1.0);
        assert!(rel(h, 1.325_732_383_106_594) < 1e-13);
        assert!(h_of_l(1e-6, 1.0) < 1e-11);
        let best = argmax_h(1.0, 1e-6);
        assert!((best - 2.381_202_496_685_54).abs() < 1e-5, "{best}");
        let best4 = argmax_h(4.0, 1e-6);
        assert!((best4 - 2.381_202_496_685_54 / 2.0).abs() < 1e-5);
    }

    #[test]
    fn stationary_identity_grid() {
        for l in [0.5, 1.0, 2.38, 5.0] {
            for i in [0.25, 1.0, 4.0] {
                let p = mp(i, i);
                let g = gamma_coef(p, sp(l));
                let ge = gee_coef(p, sp(l));
                let h = h_of_l(l, i);
                assert!((g - 2.0 * ge).abs() <= 1e-12, "l={l} I={i}");
                assert!((g - h).abs() <= 1e-12, "l={l} I={i}");
            }
        }
    }

    #[test]
    fn discontinuity_of_gee_and_continuity_of_gamma_at_origin() {
        for l in [0.5, 1.0, 2.38] {
            let s = sp(l);
            assert_eq!(gee_coef(mp(0.0, 0.0), s), 0.0);
            assert!((gee_coef(mp(0.0, 1e-12), s) - l * l).abs() < 1e-9);
            assert!((gamma_coef(mp(0.0, 1e-12), s) - l * l).abs() < 1e-9);
            assert!((gamma_coef(mp(0.0, -1e-12), s) - l * l).abs() < 1e-9);
            assert!((gamma_coef(mp(1e-14, 0.0), s) - l * l).abs() < 1e-6);
        }
    }

    #[test]
    fn denormal_a_is_finite() {
        for b in [-3.0, -1e-9, 0.0, 1e-9, 2.0] {
            let p = mp(1e-310, b);
            let g = gamma_coef(p, sp(2.0));
            let ge = gee_coef(p, sp(2.0));
            assert!(g.is_finite() && ge.is_finite(), "b={b}");
            assert!(ge <= g + 1e-12);
        }
    }

    #[test]
    fn positivity_floor_on_compact_b() {
        for l in [0.5, 1.0, 2.38, 5.0] {
            let mut min = f64::INFINITY;
            for i in 0..=400 {
                let a = if i == 400 { f64::INFINITY } else { 1e-6 * 1.05f64.powi(i) };
                for j in 0..=40 {
                    let b = -2.0 + 4.0 * f64::from(j) / 40.0;
                    min = min.min(gamma_coef(mp(a, b), sp(l)));
                }
            }
            let at_zero = gamma_coef(mp(0.0, 2.0), sp(l));
            assert!(min.min(at_zero) > 0.0, "l={l}");
        }
    }

    #[test]
    fn gamma_non_increasing_in_b() {
        for l in [0.5, 2.38, 5.0] {
            for a in [1e-3, 0.1, 1.0, 10.0, 1e4] {
                let mut prev = f64::INFINITY;
                for j in 0..=2000 {
                    let b = -50.0 + 0.05 * f64::from(j);
                    let g = gamma_coef(mp(a, b), sp(l));
                    assert!(g <= prev + 1e-13, "a={a} b={b}");
                    prev = g;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ordering_and_bounds(
            a_exp in -8.0f64..6.0,
            pick in 0u8..10,
            b in -50.0f64..50.0,
            li in 0usize..4,
        ) {
            let l = [0.5, 1.0, 2.38, 5.0][li];
            let a = match pick {
                0 => 0.0,
                1 => f64::INFINITY,
                _ => 10f64.powf(a_exp),
            };
            let p = mp(a, b);
            let s = sp(l);
            let g = gamma_coef(p, s);
            let ge = gee_coef(p, s);
            prop_assert!(ge >= -1e-12);
            prop_assert!(ge <= g + 1e-12);
            prop_assert!(g <= l * l + 1e-12);
        }

        #[test]
        fn gee_tail_bound(a_exp in -8.0f64..6.0, b in -50.0f64..50.0, l in 0.3f64..6.0) {
            let a = 10f64.powf(a_exp);
            let s = sp(l);
            let lhs = a.sqrt() * gee_coef(mp(a, b), s);
            let rhs = (l * l * b.max(0.0).sqrt()).max(2.0 * l / (2.0 * std::f64::consts::PI).sqrt());
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "lhs={} rhs={}", lhs, rhs);
        }
    }
}
