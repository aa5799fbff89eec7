//! Characteristic quadruplets `(γ(s), b(s), ρ(s,dx), c(ds))` of Lévy bases.

use num_complex::Complex64;

use super::measure::{Atom, Density, LevyMeasure1D};
use super::region::Rect;
use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::quad::{integrate, QuadOptions};

/// Componentwise truncation `x / (1 ∨ |x|)`.
pub fn truncate(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| tau(*v)).collect()
}

#[inline]
pub fn tau(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else {
        x.signum()
    }
}

/// `e^{iy} − 1 − iy` without cancellation for small `y`.
#[inline]
pub(crate) fn expm1i_minus_iy(y: f64) -> Complex64 {
    let h = (0.5 * y).sin();
    let im = if y.abs() < 0.1 {
        let y2 = y * y;
        -y * y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0 * (1.0 - y2 / 72.0)))
    } else {
        y.sin() - y
    };
    Complex64::new(-2.0 * h * h, im)
}

/// `e^{iy} − 1`.
#[inline]
pub(crate) fn expm1i(y: f64) -> Complex64 {
    let h = (0.5 * y).sin();
    Complex64::new(-2.0 * h * h, y.sin())
}

/// A scalar function of the parameter point.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamFn {
    Const(f64),
    Expr(Expr),
}

impl ParamFn {
    pub fn eval(&self, s: &[f64]) -> f64 {
        match self {
            ParamFn::Const(v) => *v,
            ParamFn::Expr(e) => e.eval_nd(s, 0.0, 0.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            ParamFn::Const(_) => true,
            ParamFn::Expr(e) => e.s_dim() == 0,
        }
    }
}

impl From<f64> for ParamFn {
    fn from(v: f64) -> Self {
        ParamFn::Const(v)
    }
}

/// The map `s ↦ ρ(s, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoField {
    Fixed(LevyMeasure1D),
    /// Density expression in `x` and `s` on the signed support `(lo, hi)`,
    /// plus fixed atoms.
    Custom {
        density: Expr,
        lo: f64,
        hi: f64,
        atoms: Vec<Atom>,
    },
}

impl RhoField {
    pub fn at(&self, s: &[f64]) -> LevyMeasure1D {
        match self {
            RhoField::Fixed(m) => m.clone(),
            RhoField::Custom {
                density,
                lo,
                hi,
                atoms,
            } => LevyMeasure1D {
                densities: vec![Density::Custom {
                    expr: density.clone(),
                    s: s.to_vec(),
                    lo: *lo,
                    hi: *hi,
                }],
                atoms: atoms.clone(),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            RhoField::Fixed(_) => true,
            RhoField::Custom { density, .. } => density.s_dim() == 0,
        }
    }
}

/// Control measure `c(ds) = density(s) ds` on a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMeasure {
    pub domain: Rect,
    pub density: ParamFn,
}

impl ControlMeasure {
    pub fn lebesgue(lo: f64, hi: f64) -> Self {
        Self {
            domain: Rect::interval(lo, hi),
            density: ParamFn::Const(1.0),
        }
    }

    pub fn lebesgue_line() -> Self {
        Self::lebesgue(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn density_at(&self, s: &[f64]) -> f64 {
        if !self.domain.contains(s) {
            return 0.0;
        }
        self.density.eval(s)
    }

    /// Same measure with its density multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let density = match &self.density {
            ParamFn::Const(v) => ParamFn::Const(v * factor),
            ParamFn::Expr(e) => ParamFn::Expr(
                Expr::parse(&format!("({}) * ({:e})", e.source(), factor))
                    .expect("scaling a valid expression"),
            ),
        };
        Self {
            domain: self.domain.clone(),
            density,
        }
    }

    /// Same density restricted to `rect ∩ domain`.
    pub fn restricted(&self, rect: &Rect) -> Self {
        let bounds = self
            .domain
            .0
            .iter()
            .zip(&rect.0)
            .map(|([a, b], [c, d])| [a.max(*c), b.min(*d)])
            .collect();
        Self {
            domain: Rect(bounds),
            density: self.density.clone(),
        }
    }

    /// `c(A ∩ domain)` by iterated quadrature.
    pub fn mass(&self, rect: &Rect) -> Result<f64> {
        let inter = self.restricted(rect).domain;
        if inter.0.iter().any(|[a, b]| a >= b) {
            return Ok(0.0);
        }
        if let ParamFn::Const(v) = self.density {
            return Ok(v * inter.volume());
        }
        let f = |s: &[f64]| Complex64::new(self.density.eval(s), 0.0);
        rect_integral(&f, &inter, &QuadOptions::default()).map(|z| z.re)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > 4 {
            return invalid(format!("control domain must have dimension 1..=4, got {d}"));
        }
        if self.domain.0.iter().any(|[a, b]| a.is_nan() || b.is_nan() || a >= b) {
            return invalid(format!("empty control domain {:?}", self.domain.0));
        }
        for s in sample_points(&self.domain) {
            let v = self.density.eval(&s);
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("control density is {v} at {s:?}"));
            }
        }
        // finiteness on a bounded piece of the domain
        let bounded = Rect(
            self.domain
                .0
                .iter()
                .map(|[a, b]| {
                    let lo = if a.is_finite() { *a } else { b.min(0.0) - 1.0 };
                    let hi = if b.is_finite() { *b } else { lo.max(0.0) + 1.0 };
                    [lo, hi]
                })
                .collect(),
        );
        let m = self.mass(&bounded)?;
        if !m.is_finite() {
            return Err(Error::QuadratureDivergence(
                "control measure is infinite on a bounded rectangle".into(),
            ));
        }
        Ok(())
    }
}

/// Grid of parameter points used for spot checks of invariants.
pub fn sample_points(domain: &Rect) -> Vec<Vec<f64>> {
    let per = if domain.dim() <= 2 { 17 } else { 7 };
    let axes: Vec<Vec<f64>> = domain
        .0
        .iter()
        .map(|[a, b]| {
            let lo = if a.is_finite() { *a } else { b.min(10.0) - 20.0 };
            let hi = if b.is_finite() { *b } else { lo.max(-10.0) + 20.0 };
            (0..per)
                .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / per as f64)
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for v in axis {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Iterated adaptive quadrature over a bounded rectangle.
pub fn rect_integral(
    f: &dyn Fn(&[f64]) -> Complex64,
    rect: &Rect,
    opts: &QuadOptions,
) -> Result<Complex64> {
    fn go(
        f: &dyn Fn(&[f64]) -> Complex64,
        rect: &Rect,
        prefix: &mut Vec<f64>,
        opts: &QuadOptions,
    ) -> Result<Complex64> {
        let k = prefix.len();
        if k == rect.dim() {
            return Ok(f(prefix));
        }
        let [a, b] = rect.0[k];
        let inner_opts = QuadOptions {
            epsabs: opts.epsabs * 1e-2,
            epsrel: opts.epsrel * 1e-2,
            ..*opts
        };
        let cell = std::cell::RefCell::new(Ok(()));
        let g = |x: f64| {
            let mut p = prefix.clone();
            p.push(x);
            match go(f, rect, &mut p, &inner_opts) {
                Ok(v) => v,
                Err(e) => {
                    *cell.borrow_mut() = Err(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        };
        let v = integrate(&g, a, b, opts)?;
        cell.into_inner()?;
        Ok(v.value)
    }
    go(f, rect, &mut Vec::new(), opts)
}

/// Structural properties of a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct BasisFlags {
    pub factorizable: bool,
    pub homogeneous: bool,
    pub poissonian: bool,
    pub centered: bool,
}

/// Characteristic quadruplet of a Lévy basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyQuadruplet {
    pub gamma: ParamFn,
    pub b: ParamFn,
    pub rho: RhoField,
    pub control: ControlMeasure,
    pub flags: BasisFlags,
}

impl LevyQuadruplet {
    /// Builds a quadruplet and infers its flags.
    pub fn new(gamma: ParamFn, b: ParamFn, rho: RhoField, control: ControlMeasure) -> Result<Self> {
        let mut q = Self {
            gamma,
            b,
            rho,
            control,
            flags: BasisFlags::default(),
        };
        q.flags = q.infer_flags()?;
        Ok(q)
    }

    fn fixed(gamma: f64, b: f64, rho: LevyMeasure1D) -> Self {
        Self::new(
            ParamFn::Const(gamma),
            ParamFn::Const(b),
            RhoField::Fixed(rho),
            ControlMeasure::lebesgue_line(),
        )
        .expect("canonical families are valid")
    }

    /// Gaussian basis with standard deviation density `b` and drift `gamma`.
    pub fn gaussian(b: f64, gamma: f64) -> Self {
        Self::fixed(gamma, b, LevyMeasure1D::zero())
    }

    /// Poisson basis with rate `lambda` and fixed jump size. The raw version
    /// is the pure jump count `Σ jumps`; the compensated one has mean zero.
    pub fn poisson(lambda: f64, jump: f64, compensated: bool) -> Self {
        let gamma = if compensated {
            if jump.abs() > 1.0 {
                -lambda * jump
            } else {
                0.0
            }
        } else {
            lambda * tau(jump)
        };
        Self::fixed(gamma, 0.0, LevyMeasure1D::dirac(jump, lambda))
    }

    /// Compound Poisson basis with rate `lambda` and Exp(`rate`) jumps.
    pub fn compound_poisson_exp(lambda: f64, rate: f64, centered: bool) -> Self {
        let rho = LevyMeasure1D::exponential(lambda * rate, rate);
        let gamma = if centered {
            -rho.signed_moment(1.0, 1.0, f64::INFINITY).expect("closed form")
        } else {
            rho.signed_moment(1.0, 0.0, 1.0).expect("closed form")
                + rho.signed_moment(0.0, 1.0, f64::INFINITY).expect("closed form")
        };
        Self::fixed(gamma, 0.0, rho)
    }

    /// Gamma subordinator basis, `ρ(dx) = shape x^{-1} e^{-rate x} dx`, no drift.
    pub fn gamma_subordinator(shape: f64, rate: f64) -> Self {
        let rho = LevyMeasure1D::gamma_subordinator(shape, rate);
        let gamma = rho.signed_moment(1.0, 0.0, 1.0).expect("closed form")
            + rho.signed_moment(0.0, 1.0, f64::INFINITY).expect("closed form");
        Self::fixed(gamma, 0.0, rho)
    }

    pub fn with_control(mut self, control: ControlMeasure) -> Result<Self> {
        self.control = control;
        self.flags = self.infer_flags()?;
        Ok(self)
    }

    pub fn rho_at(&self, s: &[f64]) -> LevyMeasure1D {
        self.rho.at(s)
    }

    /// Same basis with control density scaled by `factor`.
    pub fn scaled_control(&self, factor: f64) -> Self {
        let mut q = self.clone();
        q.control = self.control.scaled(factor);
        q
    }

    pub fn infer_flags(&self) -> Result<BasisFlags> {
        let factorizable =
            self.gamma.is_constant() && self.b.is_constant() && self.rho.is_constant();
        let homogeneous = factorizable && self.control.density.is_constant();
        let pts = sample_points(&self.control.domain);
        let poissonian = pts.iter().all(|s| self.b.eval(s) == 0.0);
        let mut centered = true;
        for s in if factorizable { &pts[..1] } else { &pts[..] } {
            let m = self.rho.at(s);
            let tail = m.abs_moment(1.0, 1.0, f64::INFINITY)?;
            let mean = self.gamma.eval(s) + m.signed_moment(1.0, 1.0, f64::INFINITY)?;
            if !tail.is_finite() || mean.abs() > 1e-10 * (1.0 + tail) {
                centered = false;
                break;
            }
        }
        Ok(BasisFlags {
            factorizable,
            homogeneous,
            poissonian,
            centered,
        })
    }

    /// Spot checks the quadruplet and its declared flags on a grid.
    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        let pts = sample_points(&self.control.domain);
        let first = &pts[0];
        let m0 = self.rho.at(first);
        for s in &pts {
            let b = self.b.eval(s);
            let g = self.gamma.eval(s);
            if !(b >= 0.0 && b.is_finite()) {
                return invalid(format!("b(s) = {b} at s = {s:?}"));
            }
            if !g.is_finite() {
                return invalid(format!("γ(s) = {g} at s = {s:?}"));
            }
            let m = self.rho.at(s);
            m.validate()?;
            if self.flags.poissonian && b != 0.0 {
                return invalid(format!("poissonian basis has b(s) = {b} at s = {s:?}"));
            }
            if self.flags.factorizable {
                let probe = [0.1, 0.5, 1.0, 2.0, 10.0];
                let same_seed = g == self.gamma.eval(first)
                    && b == self.b.eval(first)
                    && probe.iter().all(|r| {
                        m.mass(*r, 2.0 * r).ok() == m0.mass(*r, 2.0 * r).ok()
                            && m.mass(-2.0 * r, -*r).ok() == m0.mass(-2.0 * r, -*r).ok()
                    });
                if !same_seed {
                    return invalid(format!("factorizable basis varies in s (at {s:?})"));
                }
            }
            if self.flags.homogeneous
                && self.control.density.eval(s) != self.control.density.eval(first)
            {
                return invalid("homogeneous basis needs a constant control density");
            }
        }
        if self.flags.homogeneous && !self.flags.factorizable {
            return invalid("homogeneous basis must be factorizable");
        }
        if self.flags.centered && !self.infer_flags()?.centered {
            return invalid("basis declared centered has nonzero mean");
        }
        Ok(())
    }

    /// `ψ(θ, s)`.
    pub fn cumulant_exponent(&self, theta: f64, s: &[f64]) -> Result<Complex64> {
        psi(
            self.gamma.eval(s),
            self.b.eval(s),
            &self.rho.at(s),
            theta,
            &QuadOptions::tight(),
        )
    }
}

/// Lévy–Khintchine exponent `iγθ − b²θ²/2 + ∫(e^{iθx} − 1 − iθτ(x)) m(dx)`.
pub fn psi(
    gamma: f64,
    b: f64,
    m: &LevyMeasure1D,
    theta: f64,
    opts: &QuadOptions,
) -> Result<Complex64> {
    let base = Complex64::new(-0.5 * b * b * theta * theta, gamma * theta);
    if m.is_zero() {
        return Ok(base);
    }
    let trunc = m.truncated_second_moment()?;
    if !trunc.is_finite() {
        return Err(Error::QuadratureDivergence(
            "∫ 1∧x² ρ(dx) is infinite".into(),
        ));
    }
    let g = |x: f64| {
        if x.abs() <= 1.0 {
            expm1i_minus_iy(theta * x)
        } else {
            expm1i(theta * x) - Complex64::new(0.0, theta * x.signum())
        }
    };
    Ok(base + m.integrate_complex(&g, opts)?)
}

/// `ψ(θ, s)` of a quadruplet.
pub fn cumulant_exponent(q: &LevyQuadruplet, theta: f64, s: &[f64]) -> Result<Complex64> {
    q.cumulant_exponent(theta, s)
}

/// `C{θ ‡ L(A)} = ∫_A ψ(θ, s) c(ds)` for a bounded rectangle `A`.
pub fn basis_cumulant(q: &LevyQuadruplet, theta: f64, a: &Rect) -> Result<Complex64> {
    if a.dim() != q.control.dim() {
        return invalid(format!(
            "rectangle has dimension {} but the control lives in dimension {}",
            a.dim(),
            q.control.dim()
        ));
    }
    if !a.is_bounded() {
        return invalid("basis_cumulant needs a bounded rectangle");
    }
    if q.gamma.is_constant() && q.b.is_constant() && q.rho.is_constant() {
        let s0 = vec![0.0; a.dim()];
        return Ok(q.cumulant_exponent(theta, &s0)? * q.control.mass(a)?);
    }
    let domain = q.control.restricted(a).domain;
    if domain.0.iter().any(|[lo, hi]| lo >= hi) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let cell = std::cell::RefCell::new(Ok(()));
    let f = |s: &[f64]| {
        let w = q.control.density.eval(s);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match q.cumulant_exponent(theta, s) {
            Ok(v) => v * w,
            Err(e) => {
                *cell.borrow_mut() = Err(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let v = rect_integral(&f, &domain, &QuadOptions::default())?;
    cell.into_inner()?;
    Ok(v)
}

/// Outcome of a moment condition tested by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentVerdict {
    Holds,
    Fails,
    Inconclusive,
}

impl MomentVerdict {
    pub(crate) fn from_quadrature(r: Result<f64>) -> Self {
        match r {
            Ok(v) if v.is_finite() => MomentVerdict::Holds,
            Ok(_) => MomentVerdict::Fails,
            Err(Error::QuadratureDivergence(_)) => MomentVerdict::Fails,
            Err(_) => MomentVerdict::Inconclusive,
        }
    }
}

/// Finiteness of `∫_{|x|>1} log|x| m(dx)`.
pub fn log_moment_check(m: &LevyMeasure1D) -> MomentVerdict {
    let w = |r: f64| r.ln();
    MomentVerdict::from_quadrature(m.radial_quadrature(&w, 1.0, f64::INFINITY, &QuadOptions::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn truncation() {
        assert_eq!(truncate(&[0.5]), vec![0.5]);
        assert_eq!(truncate(&[2.0]), vec![1.0]);
        assert_eq!(truncate(&[-3.0, 0.25]), vec![-1.0, 0.25]);
    }

    #[test]
    fn gaussian_and_atom_exponents() {
        let g = LevyQuadruplet::gaussian(1.0, 0.0);
        let v = g.cumulant_exponent(2.0, &[0.3]).unwrap();
        assert_eq!(v, Complex64::new(-2.0, 0.0));
        let p = LevyQuadruplet::new(
            1.0.into(),
            0.0.into(),
            RhoField::Fixed(LevyMeasure1D::dirac(1.0, 1.0)),
            ControlMeasure::lebesgue_line(),
        )
        .unwrap();
        let v = p.cumulant_exponent(PI, &[0.0]).unwrap();
        assert!((v - Complex64::new(-2.0, 0.0)).norm() < 1e-14, "{v}");
    }

    #[test]
    fn exponential_density_exponent_against_reference() {
        // ∫_0^∞ (e^{ix} − 1 − i x 1{x≤1} − i 1{x>1}) e^{-x} dx in closed form
        let q = LevyQuadruplet::new(
            0.0.into(),
            0.0.into(),
            RhoField::Fixed(LevyMeasure1D::exponential(1.0, 1.0)),
            ControlMeasure::lebesgue_line(),
        )
        .unwrap();
        let v = q.cumulant_exponent(1.0, &[0.0]).unwrap();
        let one_minus_i = Complex64::new(1.0, -1.0);
        let e1 = (-1.0f64).exp();
        let reference = one_minus_i.inv() - 1.0 - Complex64::i() * (1.0 - 2.0 * e1) - Complex64::i() * e1;
        assert!((v - reference).norm() < 1e-10, "{v} vs {reference}");
    }

    #[test]
    fn basis_cumulants() {
        let g = LevyQuadruplet::gaussian(1.0, 0.0);
        let c = basis_cumulant(&g, 1.0, &Rect::interval(0.0, 1.0)).unwrap();
        assert_relative_eq!(c.re, -0.5, epsilon = 1e-14);
        let c = basis_cumulant(&g, 1.0, &Rect::interval(0.0, 2.0)).unwrap();
        assert_relative_eq!(c.re, -1.0, epsilon = 1e-14);
        let p = LevyQuadruplet::poisson(1.0, 1.0, false);
        let c = basis_cumulant(&p, 1.0, &Rect::interval(0.0, 1.0)).unwrap();
        let expect = Complex64::new(0.0, 1.0).exp() - 1.0;
        assert!((c - expect).norm() < 1e-12);
    }

    #[test]
    fn log_moments() {
        let tail_exp = LevyMeasure1D::custom(Expr::parse("exp(-x)").unwrap(), 1.0, f64::INFINITY);
        assert_eq!(log_moment_check(&tail_exp), MomentVerdict::Holds);
        let sq = LevyMeasure1D::power_law(1.0, 1.0, 1.0, f64::INFINITY);
        assert_eq!(log_moment_check(&sq), MomentVerdict::Holds);
        let w = |r: f64| r.ln();
        let v = sq.radial_quadrature(&w, 1.0, f64::INFINITY, &QuadOptions::default()).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-6);
        let heavy = LevyMeasure1D::custom(
            Expr::parse("1/(x*log(x)^2)").unwrap(),
            std::f64::consts::E,
            f64::INFINITY,
        );
        assert_eq!(log_moment_check(&heavy), MomentVerdict::Fails);
    }

    #[test]
    fn flags_of_canonical_families() {
        let g = LevyQuadruplet::gaussian(1.0, 0.0);
        assert!(g.flags.homogeneous && g.flags.centered && !g.flags.poissonian);
        let cp = LevyQuadruplet::compound_poisson_exp(1.0, 1.0, true);
        assert!(cp.flags.centered && cp.flags.poissonian);
        let raw = LevyQuadruplet::compound_poisson_exp(1.0, 1.0, false);
        assert!(!raw.flags.centered);
        let comp = LevyQuadruplet::poisson(1.0, 1.0, true);
        assert!(comp.flags.centered);
        g.validate().unwrap();
        raw.validate().unwrap();
    }

    #[test]
    fn two_dimensional_control() {
        let q = LevyQuadruplet::gaussian(1.0, 0.0)
            .with_control(ControlMeasure {
                domain: Rect::new(vec![[0.0, 2.0], [0.0, 3.0]]),
                density: ParamFn::Expr(Expr::parse("s1 * s2").unwrap()),
            })
            .unwrap();
        let c = basis_cumulant(&q, 1.0, &Rect::new(vec![[0.0, 1.0], [0.0, 2.0]])).unwrap();
        // −½ · ∫_0^1 s ds ∫_0^2 t dt = −½
        assert_relative_eq!(c.re, -0.5, max_relative = 1e-10);
        assert!(!q.flags.homogeneous);
    }
}
