//! One-dimensional potentials `V` with analytic derivatives, curvature
//! bounds, and quadrature for the normaliser `Z = ∫e^{-V}` and the constant
//! `I = ∫(V')² e^{-V} / Z`.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied `V`, `V'`, `V''`, `V'''`.
#[derive(Clone)]
pub struct CustomFns {
    pub v: ScalarFn,
    pub v1: ScalarFn,
    pub v2: ScalarFn,
    pub v3: ScalarFn,
}

#[derive(Clone)]
pub enum PotentialKind {
    /// `V = x²/(2s²)`
    Gaussian {
        s: f64,
    },
    /// `V = ln cosh x`
    LogCosh,
    /// `V = x²/2 + ε cos x`, `|ε| < 1`
    PerturbedGaussian {
        eps: f64,
    },
    /// `V ≡ 0`; `e^{-V}` is not integrable.
    Flat,
    Custom(CustomFns),
}

impl fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { s } => write!(f, "Gaussian {{ s: {s} }}"),
            Self::LogCosh => write!(f, "LogCosh"),
            Self::PerturbedGaussian { eps } => write!(f, "PerturbedGaussian {{ eps: {eps} }}"),
            Self::Flat => write!(f, "Flat"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A potential together with bounds on its second and third derivatives.
#[derive(Clone, Debug)]
pub struct Potential {
    kind: PotentialKind,
    pub name: String,
    pub v2_inf: f64,
    pub v2_sup: f64,
    pub v3_sup_abs: f64,
}

/// Sup of `|d/dx sech² x| = 2 sech² x |tanh x|`, attained at `tanh² = 1/3`.
const LOGCOSH_V3_SUP: f64 = 0.769_800_358_919_501_2;

fn ln_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - LN_2
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

impl Potential {
    pub fn gaussian(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!("gaussian scale must be positive, got {s}")));
        }
        let c = 1.0 / (s * s);
        Ok(Self {
            kind: PotentialKind::Gaussian { s },
            name: format!("gaussian:{s}"),
            v2_inf: c,
            v2_sup: c,
            v3_sup_abs: 0.0,
        })
    }

    pub fn logcosh() -> Self {
        Self {
            kind: PotentialKind::LogCosh,
            name: "logcosh".into(),
            v2_inf: 0.0,
            v2_sup: 1.0,
            v3_sup_abs: LOGCOSH_V3_SUP,
        }
    }

    pub fn perturbed_gaussian(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("perturbation must satisfy |eps| < 1, got {eps}")));
        }
        Ok(Self {
            kind: PotentialKind::PerturbedGaussian { eps },
            name: format!("perturbed_gaussian:{eps}"),
            v2_inf: 1.0 - eps.abs(),
            v2_sup: 1.0 + eps.abs(),
            v3_sup_abs: eps.abs(),
        })
    }

    pub fn flat() -> Self {
        Self { kind: PotentialKind::Flat, name: "flat".into(), v2_inf: 0.0, v2_sup: 0.0, v3_sup_abs: 0.0 }
    }

    /// Registers arbitrary derivative oracles. The curvature bounds are taken
    /// on trust.
    pub fn custom(name: impl Into<String>, fns: CustomFns, v2_inf: f64, v2_sup: f64, v3_sup_abs: f64) -> Result<Self> {
        if !(v2_inf <= v2_sup && v2_inf.is_finite() && v2_sup.is_finite() && v3_sup_abs >= 0.0) {
            return Err(Error::InvalidParameter("inconsistent curvature bounds".into()));
        }
        Ok(Self { kind: PotentialKind::Custom(fns), name: name.into(), v2_inf, v2_sup, v3_sup_abs })
    }

    /// Builtin by name with positional parameters.
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        let arity = |k: usize| -> Result<()> {
            if params.len() > k {
                Err(Error::InvalidParameter(format!("`{name}` takes at most {k} parameter(s)")))
            } else {
                Ok(())
            }
        };
        match name {
            "gaussian" => {
                arity(1)?;
                Self::gaussian(params.first().copied().unwrap_or(1.0))
            }
            "logcosh" => {
                arity(0)?;
                Ok(Self::logcosh())
            }
            "perturbed_gaussian" => {
                arity(1)?;
                let eps = params
                    .first()
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter("perturbed_gaussian needs eps".into()))?;
                Self::perturbed_gaussian(eps)
            }
            "flat" => {
                arity(0)?;
                Ok(Self::flat())
            }
            other => Err(Error::UnknownPotential(other.into())),
        }
    }

    /// Parses `name[:p1[,p2...]]`, e.g. `gaussian:1.0`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = match spec.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (spec.trim(), None),
        };
        let params = match rest {
            None => Vec::new(),
            Some(r) => r
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad potential parameter `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Self::builtin(name, &params)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, PotentialKind::Flat)
    }

    #[inline]
    pub fn v(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { s } => 0.5 * x * x / (s * s),
            PotentialKind::LogCosh => ln_cosh(x),
            PotentialKind::PerturbedGaussian { eps } => 0.5 * x * x + eps * x.cos(),
            PotentialKind::Flat => 0.0,
            PotentialKind::Custom(f) => (f.v)(x),
        }
    }

    #[inline]
    pub fn v1(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { s } => x / (s * s),
            PotentialKind::LogCosh => x.tanh(),
            PotentialKind::PerturbedGaussian { eps } => x - eps * x.sin(),
            PotentialKind::Flat => 0.0,
            PotentialKind::Custom(f) => (f.v1)(x),
        }
    }

    #[inline]
    pub fn v2(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { s } => 1.0 / (s * s),
            PotentialKind::LogCosh => sech2(x),
            PotentialKind::PerturbedGaussian { eps } => 1.0 - eps * x.cos(),
            PotentialKind::Flat => 0.0,
            PotentialKind::Custom(f) => (f.v2)(x),
        }
    }

    /// `(V'(x), V''(x))` with shared work where the potential allows it.
    #[inline]
    pub fn v1_v2(&self, x: f64) -> (f64, f64) {
        match &self.kind {
            PotentialKind::LogCosh => {
                let e = (-2.0 * x.abs()).exp();
                let d = 1.0 + e;
                ((1.0 - e) / d * x.signum(), 4.0 * e / (d * d))
            }
            PotentialKind::PerturbedGaussian { eps } => {
                let (sin, cos) = x.sin_cos();
                (x - eps * sin, 1.0 - eps * cos)
            }
            _ => (self.v1(x), self.v2(x)),
        }
    }

    #[inline]
    pub fn v3(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Gaussian { .. } | PotentialKind::Flat => 0.0,
            PotentialKind::LogCosh => -2.0 * sech2(x) * x.tanh(),
            PotentialKind::PerturbedGaussian { eps } => eps * x.sin(),
            PotentialKind::Custom(f) => (f.v3)(x),
        }
    }

    /// Exact draw from `e^{-V}/Z` from a uniform `u ∈ (0, 1)` and a standard
    /// normal `g`, when a closed-form sampler exists.
    pub fn exact_stationary(&self, u: f64, g: f64) -> Option<f64> {
        match self.kind {
            PotentialKind::Gaussian { s } => Some(s * g),
            // The law with density 1/(π cosh x) has cdf (2/π) atan(e^x).
            PotentialKind::LogCosh => Some((0.5 * PI * u).tan().ln()),
            _ => None,
        }
    }
}

/// Normaliser and `I` for a potential with integrable `e^{-V}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub z: f64,
    pub i_fisher: f64,
    pub abs_err_estimate: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

const MAX_DEPTH: u32 = 40;

/// 15-point Kronrod rule and embedded 7-point Gauss rule for a vector
/// integrand on `[a, b]`.
fn gk15<const K: usize>(f: &impl Fn(f64) -> [f64; K], a: f64, b: f64) -> ([f64; K], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kr = [0.0; K];
    let mut ga = [0.0; K];
    let fc = f(c);
    for k in 0..K {
        kr[k] = WGK[7] * fc[k];
        ga[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let (fl, fr) = (f(c - dx), f(c + dx));
        for k in 0..K {
            let s = fl[k] + fr[k];
            kr[k] += WGK[j] * s;
            if j % 2 == 1 {
                ga[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0f64;
    for k in 0..K {
        kr[k] *= h;
        err = err.max((kr[k] - ga[k] * h).abs());
    }
    (kr, err)
}

fn adaptive<const K: usize>(
    f: &impl Fn(f64) -> [f64; K],
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Result<([f64; K], f64)> {
    let (v, err) = gk15(f, a, b);
    if err <= tol {
        return Ok((v, err));
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!("panel [{a}, {b}] error {err:e} above {tol:e}")));
    }
    let m = 0.5 * (a + b);
    let (l, el) = adaptive(f, a, m, 0.5 * tol, depth + 1)?;
    let (r, er) = adaptive(f, m, b, 0.5 * tol, depth + 1)?;
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = l[k] + r[k];
    }
    Ok((out, el + er))
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` with absolute
/// tolerance `tol`; returns `(value, error estimate)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let (v, e) = adaptive(&|x| [f(x)], a, b, tol, 0)?;
    Ok((v[0], e))
}

/// `Z` and `I` by quadrature on `[-W, W]`.
///
/// Fails if `e^{-V(±W)} ≥ tol·e^{-V(0)}`, if the quadrature error exceeds
/// `tol`, or if `∫(V')²e^{-V}` and `∫V''e^{-V}` differ by more than `10·tol`
/// relative to `Z`.
pub fn compute_z_and_i(p: &Potential, halfwidth: f64, tol: f64) -> Result<QuadratureResult> {
    if !(halfwidth.is_finite() && halfwidth > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter("halfwidth and tol must be positive".into()));
    }
    let v0 = p.v(0.0);
    for w in [-halfwidth, halfwidth] {
        let ratio = (v0 - p.v(w)).exp();
        if !(ratio < tol) {
            return Err(Error::TailMass(format!("e^(-V({w}))/e^(-V(0)) = {ratio:e} is not below {tol:e}")));
        }
    }
    // Weights are shifted by e^{V(0)} to keep them O(1).
    let f = |x: f64| {
        let w = (v0 - p.v(x)).exp();
        let d = p.v1(x);
        [w, d * d * w, p.v2(x) * w]
    };
    let ([z0, sq, curv], err) = adaptive(&f, -halfwidth, halfwidth, tol, 0)?;
    if !(z0 > 0.0) {
        return Err(Error::Quadrature("normaliser is not positive".into()));
    }
    let i_fisher = sq / z0;
    let i_curv = curv / z0;
    if (i_fisher - i_curv).abs() > 10.0 * tol {
        return Err(Error::IdentityMismatch(format!("∫(V')²e^(-V)/Z = {i_fisher}, ∫V''e^(-V)/Z = {i_curv}")));
    }
    Ok(QuadratureResult { z: z0 * (-v0).exp(), i_fisher, abs_err_estimate: err })
}

/// Smallest power-of-two halfwidth, starting at 8, that passes the tail test.
pub fn default_halfwidth(p: &Potential, tol: f64) -> Result<f64> {
    let v0 = p.v(0.0);
    let mut w = 8.0;
    while w <= 1e6 {
        if (v0 - p.v(w)).exp() < tol && (v0 - p.v(-w)).exp() < tol {
            return Ok(w);
        }
        w *= 2.0;
    }
    Err(Error::TailMass(format!("{} has no finite truncation at tol {tol:e}", p.name)))
}

/// `I` for a potential using an automatically chosen halfwidth.
pub fn fisher_constant(p: &Potential, tol: f64) -> Result<f64> {
    Ok(compute_z_and_i(p, default_halfwidth(p, tol)?, tol)?.i_fisher)
}
