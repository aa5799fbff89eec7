//! Deterministic kernels `f(u, s)` and their sections `s ↦ f(u, s)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::expr::Expr;
use crate::levy_core::{ControlMeasure, ParamFn};
use crate::quad::{integrate_pieces, Estimate, QuadOptions, QuadValue};
use crate::special::gamma_fn;

/// Semicontinuity of `u ↦ f(u, s)`. Continuous kernels report `Upper`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityClass {
    Lower,
    Upper,
    Neither,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    Zero,
    /// `e^{-(u-s)} 1{s ≤ u}`
    Ou,
    /// `e^{-(u-s)} (u-s)^α 1{s ≤ u}`, `α > -1`
    Gamma { alpha: f64 },
    /// `(u-s)_+^α − (-s)_+^α`, `α ∈ (0, 1/2)`
    Fractional { alpha: f64 },
    /// Expression in `u` and `s`.
    ///
    /// A stationary custom kernel is `g(u − s)` with `g(t)` read off the
    /// expression at `u = t, s = 0`; `breaks` and `singular` are then lags,
    /// otherwise they are values of `s`.
    Custom {
        expr: Expr,
        stationary: bool,
        continuity: ContinuityClass,
        breaks: Vec<f64>,
        singular: Vec<f64>,
    },
}

/// A kernel together with a constant multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Result<Self> {
        let k = Self { family, scale: 1.0 };
        k.validate()?;
        Ok(k)
    }

    pub fn zero() -> Self {
        Self {
            family: KernelFamily::Zero,
            scale: 1.0,
        }
    }

    pub fn ou() -> Self {
        Self {
            family: KernelFamily::Ou,
            scale: 1.0,
        }
    }

    pub fn gamma(alpha: f64) -> Result<Self> {
        Self::new(KernelFamily::Gamma { alpha })
    }

    pub fn fractional(alpha: f64) -> Result<Self> {
        Self::new(KernelFamily::Fractional { alpha })
    }

    /// Stationary kernel `g(u − s)` from an expression in `u` and `s`.
    pub fn custom_stationary(expr: Expr, lag_breaks: Vec<f64>) -> Self {
        Self {
            family: KernelFamily::Custom {
                expr,
                stationary: true,
                continuity: ContinuityClass::Neither,
                breaks: lag_breaks,
                singular: Vec::new(),
            },
            scale: 1.0,
        }
    }

    pub fn custom(expr: Expr, continuity: ContinuityClass, s_breaks: Vec<f64>) -> Self {
        Self {
            family: KernelFamily::Custom {
                expr,
                stationary: false,
                continuity,
                breaks: s_breaks,
                singular: Vec::new(),
            },
            scale: 1.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            family: self.family.clone(),
            scale: self.scale * c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() {
            return invalid("kernel scale must be finite");
        }
        match &self.family {
            KernelFamily::Gamma { alpha } if !(*alpha > -1.0 && alpha.is_finite()) => {
                invalid(format!("gamma kernel needs α > −1, got {alpha}"))
            }
            KernelFamily::Fractional { alpha } if !(*alpha > 0.0 && *alpha < 0.5) => {
                invalid(format!("fractional kernel needs α ∈ (0, 1/2), got {alpha}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            KernelFamily::Zero => "zero",
            KernelFamily::Ou => "ou",
            KernelFamily::Gamma { .. } => "gamma",
            KernelFamily::Fractional { .. } => "fractional",
            KernelFamily::Custom { .. } => "custom",
        }
    }

    pub fn is_stationary(&self) -> bool {
        match &self.family {
            KernelFamily::Zero | KernelFamily::Ou | KernelFamily::Gamma { .. } => true,
            KernelFamily::Fractional { .. } => false,
            KernelFamily::Custom { stationary, .. } => *stationary,
        }
    }

    /// `g(t)` of a stationary kernel, unscaled.
    fn lag_value(&self, t: f64) -> f64 {
        match &self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::Ou => {
                if t >= 0.0 {
                    (-t).exp()
                } else {
                    0.0
                }
            }
            KernelFamily::Gamma { alpha } => {
                if t > 0.0 {
                    (-t).exp() * t.powf(*alpha)
                } else if t == 0.0 && *alpha == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Custom { expr, .. } => expr.eval(0.0, t, 0.0),
            KernelFamily::Fractional { .. } => unreachable!("fractional kernels are not stationary"),
        }
    }

    /// `f(u, s)`.
    pub fn eval(&self, u: f64, s: f64) -> f64 {
        let v = match &self.family {
            KernelFamily::Fractional { alpha } => {
                let a = if u > s { (u - s).powf(*alpha) } else { 0.0 };
                let b = if s < 0.0 { (-s).powf(*alpha) } else { 0.0 };
                a - b
            }
            KernelFamily::Custom {
                expr,
                stationary: false,
                ..
            } => expr.eval(s, u, 0.0),
            _ => self.lag_value(u - s),
        };
        self.scale * v
    }

    /// `f(u, anchor − t)`, exact in the lag when `u == anchor`.
    pub fn eval_lag(&self, u: f64, anchor: f64, t: f64) -> f64 {
        if self.is_stationary() {
            let lag = if u == anchor { t } else { (u - anchor) + t };
            return self.scale * self.lag_value(lag);
        }
        match &self.family {
            KernelFamily::Fractional { alpha } => {
                // u − s = (u − anchor) + t and −s = t − anchor
                let lag = if u == anchor { t } else { (u - anchor) + t };
                let a = if lag > 0.0 { lag.powf(*alpha) } else { 0.0 };
                let b = if t > anchor { (t - anchor).powf(*alpha) } else { 0.0 };
                self.scale * (a - b)
            }
            _ => self.eval(u, anchor - t),
        }
    }

    /// Whether `(u, s)` lies in the support of the kernel.
    pub fn support_predicate(&self, u: f64, s: f64) -> bool {
        match &self.family {
            KernelFamily::Zero => false,
            KernelFamily::Ou => s <= u,
            KernelFamily::Gamma { .. } => s < u || (s == u && self.eval(u, s) != 0.0),
            KernelFamily::Fractional { .. } => s < u.max(0.0),
            KernelFamily::Custom { .. } => self.eval(u, s) != 0.0,
        }
    }

    pub fn continuity_class(&self) -> ContinuityClass {
        match &self.family {
            KernelFamily::Zero => ContinuityClass::Upper,
            KernelFamily::Ou => ContinuityClass::Upper,
            KernelFamily::Gamma { alpha } if *alpha < 0.0 => ContinuityClass::Lower,
            KernelFamily::Gamma { .. } | KernelFamily::Fractional { .. } => ContinuityClass::Upper,
            KernelFamily::Custom { continuity, .. } => *continuity,
        }
    }

    /// Closed-form `ĝ(ξ) = (2π)^{-1/2} ∫ g(t) e^{itξ} dt` when known.
    pub fn fourier_closed_form(&self, xi: f64) -> Option<Complex64> {
        match &self.family {
            KernelFamily::Zero => Some(Complex64::new(0.0, 0.0)),
            KernelFamily::Ou => Some(gamma_kernel_fourier(0.0, xi) * self.scale),
            KernelFamily::Gamma { alpha } => Some(gamma_kernel_fourier(*alpha, xi) * self.scale),
            _ => None,
        }
    }

    /// Points `s` where `f(u, ·)` has kinks or jumps.
    pub fn s_breaks(&self, u: f64) -> Vec<f64> {
        match &self.family {
            KernelFamily::Zero => Vec::new(),
            KernelFamily::Ou | KernelFamily::Gamma { .. } => vec![u],
            KernelFamily::Fractional { .. } => vec![u, 0.0],
            KernelFamily::Custom {
                stationary, breaks, ..
            } => {
                if *stationary {
                    breaks.iter().map(|b| u - b).collect()
                } else {
                    breaks.clone()
                }
            }
        }
    }

    /// Points `s` where `f(u, ·)` is unbounded or has unbounded derivative.
    pub fn s_singular(&self, u: f64) -> Vec<f64> {
        match &self.family {
            KernelFamily::Gamma { alpha } if *alpha < 0.0 => vec![u],
            KernelFamily::Fractional { .. } => vec![u, 0.0],
            KernelFamily::Custom {
                stationary,
                singular,
                ..
            } => {
                if *stationary {
                    singular.iter().map(|b| u - b).collect()
                } else {
                    singular.clone()
                }
            }
            _ => Vec::new(),
        }
    }

    /// Range of `s` outside which `f(u, ·)` vanishes.
    pub fn s_support(&self, u: f64) -> (f64, f64) {
        match &self.family {
            KernelFamily::Zero => (0.0, 0.0),
            KernelFamily::Ou | KernelFamily::Gamma { .. } => (f64::NEG_INFINITY, u),
            KernelFamily::Fractional { .. } => (f64::NEG_INFINITY, u.max(0.0)),
            KernelFamily::Custom { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// `Γ(α+1)/√(2π) · (1 − iξ)^{−α−1}` on the principal branch.
pub fn gamma_kernel_fourier(alpha: f64, xi: f64) -> Complex64 {
    let base = Complex64::new(1.0, -xi);
    base.powf(-alpha - 1.0) * (gamma_fn(alpha + 1.0) / (2.0 * PI).sqrt())
}

/// A function of one real variable `t`, standing for a function of `s`
/// through `s = anchor + sign · t`, with the structural hints quadrature
/// needs.
#[derive(Clone)]
pub struct Profile {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lo: f64,
    pub hi: f64,
    pub anchor: f64,
    pub sign: f64,
    pub breaks: Vec<f64>,
    pub singular: Vec<f64>,
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Profile")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("anchor", &self.anchor)
            .field("sign", &self.sign)
            .field("breaks", &self.breaks)
            .field("singular", &self.singular)
            .finish()
    }
}

impl Profile {
    /// A plain function of `s` on `[lo, hi]`.
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lo: f64, hi: f64) -> Self {
        Self {
            f: Arc::new(f),
            lo,
            hi,
            anchor: 0.0,
            sign: 1.0,
            breaks: Vec::new(),
            singular: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self::from_fn(|_| 0.0, 0.0, 0.0)
    }

    pub fn with_breaks(mut self, b: Vec<f64>) -> Self {
        self.breaks = b;
        self
    }

    pub fn with_singular(mut self, s: Vec<f64>) -> Self {
        self.singular = s;
        self
    }

    /// `s ↦ f(u, s)` in the lag `t = u − s`.
    pub fn section(kernel: &KernelSpec, u: f64) -> Self {
        Self::combination(kernel, &[u], &[1.0])
    }

    /// `s ↦ Σ_j θ_j f(u_j, s)`, parametrised by `t = u_0 − s`.
    pub fn combination(kernel: &KernelSpec, us: &[f64], thetas: &[f64]) -> Self {
        if us.is_empty() || matches!(kernel.family, KernelFamily::Zero) || kernel.scale == 0.0 {
            return Self::zero();
        }
        let anchor = us[0];
        let to_t = |s: f64| anchor - s;
        let mut breaks = Vec::new();
        let mut singular = Vec::new();
        let mut s_lo = f64::INFINITY;
        let mut s_hi = f64::NEG_INFINITY;
        for (u, th) in us.iter().zip(thetas) {
            if *th == 0.0 {
                continue;
            }
            breaks.extend(kernel.s_breaks(*u).into_iter().map(to_t));
            singular.extend(kernel.s_singular(*u).into_iter().map(to_t));
            let (a, b) = kernel.s_support(*u);
            s_lo = s_lo.min(a);
            s_hi = s_hi.max(b);
        }
        if s_lo >= s_hi {
            return Self::zero();
        }
        let k = kernel.clone();
        let us_v = us.to_vec();
        let th_v = thetas.to_vec();
        let f = move |t: f64| {
            us_v.iter()
                .zip(&th_v)
                .filter(|(_, th)| **th != 0.0)
                .map(|(u, th)| th * k.eval_lag(*u, anchor, t))
                .sum()
        };
        Self {
            f: Arc::new(f),
            lo: to_t(s_hi),
            hi: to_t(s_lo),
            anchor,
            sign: -1.0,
            breaks,
            singular,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let g = self.f.clone();
        Self {
            f: Arc::new(move |t| c * g(t)),
            ..self.clone()
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            return 0.0;
        }
        (self.f)(t)
    }

    pub fn s_of(&self, t: f64) -> f64 {
        self.anchor + self.sign * t
    }

    pub fn t_of(&self, s: f64) -> f64 {
        (s - self.anchor) * self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.lo >= self.hi
    }
}

/// `∫ g(f(s), s) c(ds)` over the control domain, integrating in the
/// profile variable so that singular points keep full precision.
pub fn integrate_profile<T: QuadValue>(
    p: &Profile,
    control: &ControlMeasure,
    g: &dyn Fn(f64, f64) -> T,
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    integrate_over_profile(p, control, &|t, s| g(p.value(t), s), opts)
}

/// As [`integrate_profile`], with the integrand seeing the profile
/// variable `t` and the point `s = s_of(t)`.
pub fn integrate_over_profile<T: QuadValue>(
    p: &Profile,
    control: &ControlMeasure,
    g: &dyn Fn(f64, f64) -> T,
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    if control.dim() != 1 {
        return invalid("kernel integrals need a one-dimensional control measure");
    }
    let zero = Estimate {
        value: T::zero(),
        error: 0.0,
    };
    if p.is_zero() {
        return Ok(zero);
    }
    let [c0, c1] = control.domain.0[0];
    let (ta, tb) = (p.t_of(c0), p.t_of(c1));
    let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
    let lo = p.lo.max(ta);
    let hi = p.hi.min(tb);
    if lo >= hi {
        return Ok(zero);
    }
    let constant = match control.density {
        ParamFn::Const(v) => Some(v),
        _ => None,
    };
    if constant == Some(0.0) {
        return Ok(zero);
    }
    let h = |t: f64| {
        let s = p.s_of(t);
        let w = match constant {
            Some(v) => v,
            None => control.density.eval(&[s]),
        };
        if w == 0.0 {
            T::zero()
        } else {
            g(t, s) * w
        }
    };
    let mut breaks = p.breaks.clone();
    breaks.push(ta);
    breaks.push(tb);
    integrate_pieces(&h, lo, hi, &breaks, &p.singular, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_values() {
        let ou = KernelSpec::ou();
        assert_eq!(ou.eval(1.0, 1.0), 1.0);
        assert_eq!(ou.eval(1.0, 2.0), 0.0);
        assert_relative_eq!(ou.eval(2.0, 1.0), (-1.0f64).exp());
        let g = KernelSpec::gamma(-0.5).unwrap();
        assert_relative_eq!(g.eval(1.25, 1.0), (-0.25f64).exp() * 2.0);
        let fr = KernelSpec::fractional(0.25).unwrap();
        assert_relative_eq!(fr.eval(1.0, -1.0), 2f64.powf(0.25) - 1.0);
        assert_relative_eq!(fr.eval(1.0, 0.5), 0.5f64.powf(0.25));
        assert_relative_eq!(fr.eval(-1.0, -0.5), -(0.5f64.powf(0.25)));
        assert!(KernelSpec::gamma(-1.0).is_err());
        assert!(KernelSpec::fractional(0.5).is_err());
    }

    #[test]
    fn lag_evaluation_matches_direct() {
        let kernels = [
            KernelSpec::ou(),
            KernelSpec::gamma(0.3).unwrap(),
            KernelSpec::fractional(0.25).unwrap(),
        ];
        for k in &kernels {
            for &(u, anchor, t) in &[(1.0, 1.0, 0.3), (2.0, 1.0, 0.7), (0.5, -1.0, 2.0), (1.0, 1.0, 1.5)] {
                assert_relative_eq!(k.eval_lag(u, anchor, t), k.eval(u, anchor - t), max_relative = 1e-12, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn section_integrals() {
        let c = ControlMeasure::lebesgue_line();
        let p = Profile::section(&KernelSpec::ou(), 3.0);
        let v = integrate_profile(&p, &c, &|f, _| f * f, &QuadOptions::tight()).unwrap();
        assert_relative_eq!(v.value, 0.5, max_relative = 1e-10);
        let p = Profile::section(&KernelSpec::gamma(-0.25).unwrap(), 0.0);
        let v = integrate_profile(&p, &c, &|f, _| f, &QuadOptions::tight()).unwrap();
        assert_relative_eq!(v.value, gamma_fn(0.75), max_relative = 1e-9);
        // restricted control domain
        let c = ControlMeasure::lebesgue(-1.0, 0.5);
        let p = Profile::section(&KernelSpec::ou(), 0.0);
        let v = integrate_profile(&p, &c, &|f, _| f, &QuadOptions::tight()).unwrap();
        assert_relative_eq!(v.value, 1.0 - (-1.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn fourier_closed_forms() {
        let v = gamma_kernel_fourier(0.0, 0.0);
        assert_relative_eq!(v.re, 1.0 / (2.0 * PI).sqrt(), max_relative = 1e-14);
        let v = gamma_kernel_fourier(0.5, 1.0);
        assert_relative_eq!(v.norm(), gamma_fn(1.5) / (2.0 * PI).sqrt() * 2f64.powf(-0.75), max_relative = 1e-13);
    }
}
