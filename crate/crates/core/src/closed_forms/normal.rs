//! Standard normal distribution function in forms that stay accurate in the
//! far tails.
//!
//! `Φ` is evaluated through `erfc`. Beyond `|x| > 8` the lower tail is carried
//! by the Mills ratio `Φ(-t)/φ(t)`, computed from Laplace's continued
//! fraction, so that `log Φ(x)` and products `e^c Φ(-t)` remain finite and
//! accurate long after `Φ` itself underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln(√(2π))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Switch-over point between the `erfc` route and the continued fraction.
const TAIL_SWITCH: f64 = 8.0;

/// Depth of the backward continued-fraction evaluation. Twenty terms already
/// reach full double precision at `t = 8`.
const CF_DEPTH: u32 = 40;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cumulative distribution function `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Mills ratio `Φ(-t)/φ(t)` for `t ≥ 8` via Laplace's continued fraction
/// `1/(t + 1/(t + 2/(t + 3/(t + ...))))`.
fn mills_ratio_cf(t: f64) -> f64 {
    let mut f = t;
    for k in (1..=CF_DEPTH).rev() {
        f = t + f64::from(k) / f;
    }
    1.0 / f
}

/// Scaled upper tail `e^{t²/2} Φ(-t)`.
///
/// For `t ≥ 8` this equals the Mills ratio divided by `√(2π)` and decays like
/// `1/(t√(2π))`; it never underflows. For very negative `t` it overflows, as
/// does the exact value.
pub fn scaled_upper_tail(t: f64) -> f64 {
    if t >= TAIL_SWITCH {
        mills_ratio_cf(t) / (2.0 * PI).sqrt()
    } else {
        (0.5 * t * t).exp() * normal_cdf(-t)
    }
}

/// `ln Φ(x)`.
///
/// Below `x = -8` the value is `-x²/2 - ln√(2π) + ln R(-x)` with `R` the Mills
/// ratio, which stays finite for any finite `x`. For positive `x` the small
/// upper tail is routed through `ln_1p`.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < -TAIL_SWITCH {
        let t = -x;
        -0.5 * t * t - LN_SQRT_2PI + mills_ratio_cf(t).ln()
    } else if x > 0.0 {
        (-normal_cdf(-x)).ln_1p()
    } else {
        normal_cdf(x).ln()
    }
}

/// `e^c Φ(-t)`, where the caller also supplies `d = c - t²/2`.
///
/// For `t ≥ 0` the product is `e^d` times the scaled tail, which avoids the
/// overflow-times-underflow of the naive form; callers compute `d`
/// analytically so no cancellation occurs when `c` and `t²/2` are both huge.
/// For `t < 0`, `Φ(-t) ≥ 1/2` and the direct product is used.
pub fn exp_times_upper_tail(c: f64, d: f64, t: f64) -> f64 {
    if t >= 0.0 {
        d.exp() * scaled_upper_tail(t)
    } else {
        c.exp() * normal_cdf(-t)
    }
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`: Acklam's rational
/// approximation followed by one Halley step on `Φ`.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] =
        [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    let x = if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Reference values computed with mpmath at 40 significant digits.
    const CDF_REF: &[(f64, f64)] = &[
        (-8.0, 6.220_960_574_271_784_1e-16),
        (-7.5, 3.190_891_672_910_896_2e-14),
        (-5.0, 2.866_515_718_791_939_1e-7),
        (-2.5, 0.006_209_665_325_776_135),
        (-1.19, 0.117_023_196_023_108_73),
        (-1.0, 0.158_655_253_931_457_05),
        (-0.3, 0.382_088_577_811_047_37),
        (0.7, 0.758_036_347_776_926_97),
        (1.5, 0.933_192_798_731_141_93),
        (3.0, 0.998_650_101_968_369_9),
        (6.0, 0.999_999_999_013_412_4),
        (8.0, 0.999_999_999_999_999_4),
    ];

    #[test]
    fn cdf_matches_high_precision_reference() {
        for &(x, want) in CDF_REF {
            let got = normal_cdf(x);
            assert!(rel(got, want) <= 1e-14, "Φ({x}) = {got:e}, want {want:e}");
        }
    }

    #[test]
    fn cdf_edge_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(40.0) - 1.0).abs() <= 1e-15);
        let deep = normal_cdf(-40.0);
        assert!((0.0..1e-300).contains(&deep));
        assert_eq!(normal_cdf(-1e10), 0.0);
    }

    #[test]
    fn log_cdf_reference() {
        let cases = [
            (0.0, -0.693_147_180_559_945_3),
            (-7.9, -34.206_228_170_981_716),
            (-8.0, -35.013_437_159_914_55),
            (-8.5, -39.197_396_428_217_67),
            (-10.0, -53.231_285_150_512_47),
            (-20.0, -203.917_155_371_097_26),
            (-40.0, -804.608_442_013_753_8),
            (-300.0, -45_006.622_732_118_66),
            (5.0, -2.866_516_129_637_636e-7),
        ];
        for (x, want) in cases {
            let got = log_normal_cdf(x);
            assert!(rel(got, want) <= 1e-13, "ln Φ({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn log_cdf_continuous_across_switch() {
        let below = log_normal_cdf(-8.0 - 1e-9);
        let above = log_normal_cdf(-8.0 + 1e-9);
        assert!((below - above).abs() < 1e-7);
    }

    #[test]
    fn mills_branch_agrees_with_erfc_branch_at_switch() {
        let t: f64 = 8.0;
        let direct = (0.5 * t * t).exp() * normal_cdf(-t);
        assert!(rel(mills_ratio_cf(t) / (2.0 * PI).sqrt(), direct) < 1e-13);
    }

    #[test]
    fn exp_times_tail_survives_underflow() {
        // e^{c} Φ(-t) with c = t²/2 - 3: Φ(-60) underflows, the product does not.
        let t = 60.0;
        let v = exp_times_upper_tail(0.5 * t * t - 3.0, -3.0, t);
        let want = (-3.0f64).exp() * mills_ratio_cf(t) / (2.0 * PI).sqrt();
        assert!(v.is_finite() && v > 0.0);
        assert!(rel(v, want) < 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        // mpmath references.
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((normal_quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-12);
        assert_eq!(normal_quantile(0.5), 0.0);
        for i in 1..1000 {
            let p = f64::from(i) / 1000.0;
            let x = normal_quantile(p);
            assert!(rel(normal_cdf(x), p) < 1e-14, "p={p}");
            assert!((x + normal_quantile(1.0 - p)).abs() < 1e-13);
        }
        assert!(normal_quantile(1.5).is_nan());
    }
}
