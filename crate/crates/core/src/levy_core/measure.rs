//! One-dimensional Lévy measures built from densities and atoms.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::quad::{integrate_pieces, integrate_singular, QuadOptions};
use crate::special::upper_incomplete_gamma;

/// Which half-line(s) a radial density lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Positive,
    Negative,
    Both,
}

impl Side {
    fn covers(self, positive: bool) -> bool {
        match self {
            Side::Both => true,
            Side::Positive => positive,
            Side::Negative => !positive,
        }
    }
}

/// Absolutely continuous part of a Lévy measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    /// `c |x|^{-1-β} e^{-λ|x|}` for `lo < |x| ≤ hi` on `side`.
    ///
    /// `β = -1` gives exponential jump laws, `β = 0` the Gamma
    /// subordinator and `λ = 0` pure power laws.
    TemperedPower {
        c: f64,
        beta: f64,
        lambda: f64,
        lo: f64,
        hi: f64,
        side: Side,
    },
    /// Density given by an expression in `x` (and the frozen parameter
    /// point `s`), supported on the signed interval `(lo, hi)`.
    Custom {
        expr: Expr,
        s: Vec<f64>,
        lo: f64,
        hi: f64,
    },
}

impl Density {
    pub fn exponential(weight: f64, rate: f64) -> Self {
        Density::TemperedPower {
            c: weight,
            beta: -1.0,
            lambda: rate,
            lo: 0.0,
            hi: f64::INFINITY,
            side: Side::Positive,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            Density::TemperedPower {
                c,
                beta,
                lambda,
                lo,
                hi,
                side,
            } => {
                let r = x.abs();
                if x == 0.0 || !side.covers(x > 0.0) || r <= *lo || r > *hi {
                    return 0.0;
                }
                c * r.powf(-1.0 - beta) * (-lambda * r).exp()
            }
            Density::Custom { expr, s, lo, hi } => {
                if x == 0.0 || x <= *lo || x >= *hi {
                    return 0.0;
                }
                expr.eval_nd(s, 0.0, x)
            }
        }
    }

    /// `e^{ln_w} · d(x)` with the power part taken in logarithms, so the
    /// product stays finite where `d` alone overflows.
    fn eval_log_weighted(&self, x: f64, ln_w: f64) -> f64 {
        match self {
            Density::TemperedPower { c, beta, lambda, .. } => {
                if self.eval(x) == 0.0 {
                    return 0.0;
                }
                let r = x.abs();
                (ln_w + c.ln() - (1.0 + beta) * r.ln() - lambda * r).exp()
            }
            Density::Custom { .. } => {
                let d = self.eval(x);
                if d == 0.0 {
                    0.0
                } else {
                    ln_w.exp() * d
                }
            }
        }
    }

    /// `∫_{(a,b]} r^k d(±r) dr` on one half-line.
    fn radial_moment(&self, positive: bool, k: f64, a: f64, b: f64) -> Result<f64> {
        match self {
            Density::TemperedPower {
                c,
                beta,
                lambda,
                lo,
                hi,
                side,
            } => {
                if !side.covers(positive) || *c == 0.0 {
                    return Ok(0.0);
                }
                Ok(c * tempered_moment(k - beta, *lambda, a.max(*lo), b.min(*hi)))
            }
            Density::Custom { expr, s, lo, hi } => {
                let (slo, shi) = if positive {
                    (lo.max(0.0), hi.max(0.0))
                } else {
                    ((-hi).max(0.0), (-lo).max(0.0))
                };
                let (a, b) = (a.max(slo), b.min(shi));
                if a >= b {
                    return Ok(0.0);
                }
                let sign = if positive { 1.0 } else { -1.0 };
                let g = |r: f64| {
                    if r <= 0.0 {
                        0.0
                    } else {
                        r.powf(k) * expr.eval_nd(s, 0.0, sign * r)
                    }
                };
                let singular = [0.0];
                match integrate_pieces(&g, a, b, &[1.0], &singular, &QuadOptions::default()) {
                    Ok(e) => Ok(e.value),
                    Err(Error::QuadratureDivergence(_)) => Ok(f64::INFINITY),
                    Err(e) => Err(e),
                }
            }
        }
    }

    fn radial_support(&self, positive: bool) -> Option<(f64, f64)> {
        match self {
            Density::TemperedPower {
                c, lo, hi, side, ..
            } => (side.covers(positive) && *c > 0.0 && lo < hi).then_some((*lo, *hi)),
            Density::Custom { lo, hi, .. } => {
                let (a, b) = if positive {
                    (lo.max(0.0), hi.max(0.0))
                } else {
                    ((-hi).max(0.0), (-lo).max(0.0))
                };
                (a < b).then_some((a, b))
            }
        }
    }
}

/// `∫_a^b r^{e-1} e^{-λ r} dr`, with `∞` for non-integrable ends.
fn tempered_moment(e: f64, lambda: f64, a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a == 0.0 && e <= 0.0 {
        return f64::INFINITY;
    }
    if b.is_infinite() && lambda == 0.0 && e >= 0.0 {
        return f64::INFINITY;
    }
    // narrow intervals lose digits in the closed form
    if a > 0.0 && b.is_finite() && b < 2.0 * a {
        let g = |r: f64| r.powf(e - 1.0) * (-lambda * r).exp();
        return crate::quad::adaptive(&g, a, b, &QuadOptions::tight())
            .map(|q| q.value)
            .unwrap_or(f64::NAN);
    }
    if lambda == 0.0 {
        if e == 0.0 {
            return (b / a).ln();
        }
        if a == 0.0 {
            return b.powf(e) / e;
        }
        if b.is_infinite() {
            return -a.powf(e) / e;
        }
        return a.powf(e) * (e * (b / a).ln()).exp_m1() / e;
    }
    let upper = |x: f64| upper_incomplete_gamma(e, x);
    lambda.powf(-e) * (upper(lambda * a) - upper(lambda * b))
}

/// A point mass of a Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Lévy measure on `ℝ \ {0}` given by densities plus finitely many atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevyMeasure1D {
    pub densities: Vec<Density>,
    pub atoms: Vec<Atom>,
}

impl LevyMeasure1D {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_density(d: Density) -> Self {
        Self {
            densities: vec![d],
            atoms: Vec::new(),
        }
    }

    pub fn dirac(location: f64, mass: f64) -> Self {
        Self {
            densities: Vec::new(),
            atoms: vec![Atom { location, mass }],
        }
    }

    /// `weight · e^{-rate x}` on `x > 0`.
    pub fn exponential(weight: f64, rate: f64) -> Self {
        Self::from_density(Density::exponential(weight, rate))
    }

    /// Gamma subordinator: `shape · x^{-1} e^{-rate x}` on `x > 0`.
    pub fn gamma_subordinator(shape: f64, rate: f64) -> Self {
        Self::from_density(Density::TemperedPower {
            c: shape,
            beta: 0.0,
            lambda: rate,
            lo: 0.0,
            hi: f64::INFINITY,
            side: Side::Positive,
        })
    }

    /// `c |x|^{-1-β} e^{-λ|x|}`, `0 < β < 2`.
    pub fn tempered_stable(c: f64, beta: f64, lambda: f64, side: Side) -> Self {
        Self::from_density(Density::TemperedPower {
            c,
            beta,
            lambda,
            lo: 0.0,
            hi: f64::INFINITY,
            side,
        })
    }

    /// `c x^{-1-β}` restricted to `lo < x ≤ hi`.
    pub fn power_law(c: f64, beta: f64, lo: f64, hi: f64) -> Self {
        Self::from_density(Density::TemperedPower {
            c,
            beta,
            lambda: 0.0,
            lo,
            hi,
            side: Side::Positive,
        })
    }

    pub fn custom(expr: Expr, lo: f64, hi: f64) -> Self {
        Self::from_density(Density::Custom {
            expr,
            s: Vec::new(),
            lo,
            hi,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.densities.iter().all(|d| match d {
            Density::TemperedPower { c, lo, hi, .. } => *c == 0.0 || lo >= hi,
            Density::Custom { lo, hi, .. } => lo >= hi,
        }) && self.atoms.iter().all(|a| a.mass == 0.0)
    }

    pub fn has_density(&self) -> bool {
        !self.densities.is_empty()
    }

    /// Lévy density at `x` (atoms excluded).
    pub fn density(&self, x: f64) -> f64 {
        self.densities.iter().map(|d| d.eval(x)).sum()
    }

    /// `e^{ln_w} · density(x)`; finite where the density alone overflows
    /// for the built-in families.
    pub fn log_weighted_density(&self, x: f64, ln_w: f64) -> f64 {
        if ln_w == f64::NEG_INFINITY {
            return 0.0;
        }
        self.densities.iter().map(|d| d.eval_log_weighted(x, ln_w)).sum()
    }

    /// Smallest signed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in &self.densities {
            if let Some((a, b)) = d.radial_support(true) {
                lo = lo.min(a);
                hi = hi.max(b);
            }
            if let Some((a, b)) = d.radial_support(false) {
                lo = lo.min(-b);
                hi = hi.max(-a);
            }
        }
        for a in &self.atoms {
            if a.mass > 0.0 {
                lo = lo.min(a.location);
                hi = hi.max(a.location);
            }
        }
        (lo, hi)
    }

    /// `∫_{a < |x| ≤ b, ±x > 0} |x|^k m(dx)` on one half-line.
    pub fn radial_moment(&self, positive: bool, k: f64, a: f64, b: f64) -> Result<f64> {
        let mut total = 0.0;
        for d in &self.densities {
            total += d.radial_moment(positive, k, a, b)?;
        }
        for at in &self.atoms {
            let r = at.location.abs();
            if (at.location > 0.0) == positive && r > a && r <= b {
                total += at.mass * r.powf(k);
            }
        }
        Ok(total)
    }

    /// `∫_{a < |x| ≤ b} |x|^k m(dx)`.
    pub fn abs_moment(&self, k: f64, a: f64, b: f64) -> Result<f64> {
        Ok(self.radial_moment(true, k, a, b)? + self.radial_moment(false, k, a, b)?)
    }

    /// `∫_{a < |x| ≤ b} sign(x)|x|^k m(dx)`.
    pub fn signed_moment(&self, k: f64, a: f64, b: f64) -> Result<f64> {
        Ok(self.radial_moment(true, k, a, b)? - self.radial_moment(false, k, a, b)?)
    }

    /// Mass of the closed signed interval `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Ok(0.0);
        }
        let mut total = 0.0;
        if b > 0.0 {
            for d in &self.densities {
                total += d.radial_moment(true, 0.0, a.max(0.0), b)?;
            }
        }
        if a < 0.0 {
            for d in &self.densities {
                total += d.radial_moment(false, 0.0, (-b).max(0.0), -a)?;
            }
        }
        for at in &self.atoms {
            if at.location >= a && at.location <= b && at.location != 0.0 {
                total += at.mass;
            }
        }
        Ok(total)
    }

    /// Total mass; infinite for infinite-activity measures.
    pub fn total_mass(&self) -> Result<f64> {
        self.abs_moment(0.0, 0.0, f64::INFINITY)
    }

    /// `∫ 1 ∧ x² m(dx)`.
    pub fn truncated_second_moment(&self) -> Result<f64> {
        Ok(self.abs_moment(2.0, 0.0, 1.0)? + self.abs_moment(0.0, 1.0, f64::INFINITY)?)
    }

    /// `∫ (τ(xr) − rτ(x)) m(dx)`, odd in `r`.
    ///
    /// The integrand vanishes where both `|x| ≤ 1` and `|xr| ≤ 1`, so only
    /// moments over the complement enter.
    pub fn tau_correction(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        let a = r.abs();
        let inv = 1.0 / a;
        let side = |positive: bool| -> Result<f64> {
            let m = |k: f64, lo: f64, hi: f64| self.radial_moment(positive, k, lo, hi);
            if a <= 1.0 {
                Ok(a * (m(1.0, 1.0, inv)? - m(0.0, 1.0, inv)?) + (1.0 - a) * m(0.0, inv, f64::INFINITY)?)
            } else {
                Ok(m(0.0, inv, 1.0)? - a * m(1.0, inv, 1.0)? + (1.0 - a) * m(0.0, 1.0, f64::INFINITY)?)
            }
        };
        let v = side(true)? - side(false)?;
        Ok(if r < 0.0 { -v } else { v })
    }

    /// Checks nonnegativity on sampled points and `∫ 1 ∧ x² < ∞`.
    pub fn validate(&self) -> Result<()> {
        for at in &self.atoms {
            if at.location == 0.0 || !at.location.is_finite() {
                return invalid(format!("atom at {} is not allowed", at.location));
            }
            if !(at.mass >= 0.0 && at.mass.is_finite()) {
                return invalid(format!("atom mass {} must be nonnegative", at.mass));
            }
        }
        for d in &self.densities {
            match d {
                Density::TemperedPower {
                    c, lambda, lo, hi, ..
                } => {
                    if !(*c >= 0.0 && c.is_finite()) || !(*lambda >= 0.0) || !(*lo >= 0.0) || !(lo <= hi) {
                        return invalid(format!("bad tempered power density {d:?}"));
                    }
                }
                Density::Custom { lo, hi, .. } => {
                    if !(lo < hi) {
                        return invalid(format!("empty custom density support ({lo}, {hi})"));
                    }
                    for i in 0..400 {
                        let r = 10f64.powf(-6.0 + 12.0 * i as f64 / 399.0);
                        for x in [r, -r] {
                            let v = d.eval(x);
                            if v.is_nan() || v < 0.0 {
                                return invalid(format!("density is {v} at x = {x}"));
                            }
                        }
                    }
                }
            }
        }
        let m = self.truncated_second_moment()?;
        if !m.is_finite() {
            return Err(Error::QuadratureDivergence(
                "∫ 1∧x² m(dx) is infinite, not a Lévy measure".into(),
            ));
        }
        Ok(())
    }

    /// Symmetry `m(A) = m(-A)` checked on log-spaced intervals and atoms.
    pub fn is_symmetric(&self) -> bool {
        let mut prev = 0.0;
        for k in 0..=48 {
            let r = 10f64.powf(-6.0 + 12.0 * k as f64 / 48.0);
            let (p, n) = match (
                self.radial_moment(true, 0.0, prev, r),
                self.radial_moment(false, 0.0, prev, r),
            ) {
                (Ok(p), Ok(n)) => (p, n),
                _ => return false,
            };
            if p.is_finite() || n.is_finite() {
                if (p - n).abs() > 1e-12 * p.abs().max(n.abs()).max(1e-300) {
                    return false;
                }
            }
            prev = r;
        }
        let tail = (
            self.radial_moment(true, 0.0, 1e6, f64::INFINITY),
            self.radial_moment(false, 0.0, 1e6, f64::INFINITY),
        );
        if !matches!(tail, (Ok(p), Ok(n)) if (p - n).abs() <= 1e-12 * p.abs().max(n.abs()).max(1e-300))
        {
            return false;
        }
        // point masses have to pair up exactly
        self.atoms.iter().all(|a| {
            let mirrored: f64 = self
                .atoms
                .iter()
                .filter(|b| b.location == -a.location)
                .map(|b| b.mass)
                .sum();
            let same: f64 = self
                .atoms
                .iter()
                .filter(|b| b.location == a.location)
                .map(|b| b.mass)
                .sum();
            (mirrored - same).abs() <= 1e-12 * same.max(1e-300)
        })
    }

    /// `∫ g(x) m(dx)` for `g` with `g(x) = O(x²)` at the origin.
    ///
    /// Each half-line is split at `|x| = 1`; the origin is treated as a
    /// singular endpoint and `(1, ∞)` as a tail, so non-integrable behaviour
    /// is reported as [`Error::QuadratureDivergence`].
    pub fn integrate_complex(
        &self,
        g: &dyn Fn(f64) -> Complex64,
        opts: &QuadOptions,
    ) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for positive in [true, false] {
            let sign = if positive { 1.0 } else { -1.0 };
            let Some((lo, hi)) = self.half_support(positive) else {
                continue;
            };
            let h = |r: f64| {
                let d: f64 = self.densities.iter().map(|d| d.eval(sign * r)).sum();
                if d == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    g(sign * r) * d
                }
            };
            let mut breaks = vec![1.0];
            breaks.extend(self.density_breaks(positive));
            let singular: &[f64] = if lo == 0.0 { &[0.0] } else { &[] };
            total += integrate_pieces(&h, lo, hi, &breaks, singular, opts)?.value;
        }
        for a in &self.atoms {
            if a.mass > 0.0 {
                total += g(a.location) * a.mass;
            }
        }
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::QuadratureDivergence("jump integral is not finite".into()));
        }
        Ok(total)
    }

    /// Real-valued analogue of [`Self::integrate_complex`].
    pub fn integrate_real(&self, g: &dyn Fn(f64) -> f64, opts: &QuadOptions) -> Result<f64> {
        let gc = |x: f64| Complex64::new(g(x), 0.0);
        self.integrate_complex(&gc, opts).map(|z| z.re)
    }

    fn half_support(&self, positive: bool) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for d in &self.densities {
            if let Some((a, b)) = d.radial_support(positive) {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo < hi).then_some((lo, hi))
    }

    fn density_breaks(&self, positive: bool) -> Vec<f64> {
        let mut out = Vec::new();
        for d in &self.densities {
            if let Some((a, b)) = d.radial_support(positive) {
                out.push(a);
                out.push(b);
            }
        }
        out
    }

    /// Radial integral with divergence detection at the ends:
    /// `∫_{a<|x|≤b} w(|x|) m(dx)` by quadrature on the densities plus the
    /// exact atom sum. Used by the log-moment style tests.
    pub fn radial_quadrature(
        &self,
        w: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        opts: &QuadOptions,
    ) -> Result<f64> {
        let mut total = 0.0;
        for positive in [true, false] {
            let sign = if positive { 1.0 } else { -1.0 };
            let Some((lo, hi)) = self.half_support(positive) else {
                continue;
            };
            let (lo, hi) = (lo.max(a), hi.min(b));
            if lo >= hi {
                continue;
            }
            let h = |r: f64| {
                let d = self.density(sign * r);
                if d == 0.0 {
                    0.0
                } else {
                    w(r) * d
                }
            };
            let mut breaks = vec![1.0];
            breaks.extend(self.density_breaks(positive));
            let singular: &[f64] = if lo == 0.0 { &[0.0] } else { &[] };
            total += integrate_pieces(&h, lo, hi, &breaks, singular, opts)?.value;
        }
        for at in &self.atoms {
            let r = at.location.abs();
            if r > a && r <= b {
                total += w(r) * at.mass;
            }
        }
        Ok(total)
    }

    /// [`Self::radial_quadrature`] with the weight given as `ln w(r)`, for
    /// weights that vanish at the origin faster than the density blows up.
    pub fn radial_quadrature_ln(
        &self,
        ln_w: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        opts: &QuadOptions,
    ) -> Result<f64> {
        let mut total = 0.0;
        for positive in [true, false] {
            let sign = if positive { 1.0 } else { -1.0 };
            let Some((lo, hi)) = self.half_support(positive) else {
                continue;
            };
            let (lo, hi) = (lo.max(a), hi.min(b));
            if lo >= hi {
                continue;
            }
            let h = |r: f64| self.log_weighted_density(sign * r, ln_w(r));
            let mut breaks = vec![1.0];
            breaks.extend(self.density_breaks(positive));
            let singular: &[f64] = if lo == 0.0 { &[0.0] } else { &[] };
            total += integrate_pieces(&h, lo, hi, &breaks, singular, opts)?.value;
        }
        for at in &self.atoms {
            let r = at.location.abs();
            if r > a && r <= b {
                total += ln_w(r).exp() * at.mass;
            }
        }
        Ok(total)
    }

    /// Prepares exact samplers for jumps with `|x| > eps`.
    pub fn jump_sampler(&self, eps: f64) -> Result<JumpSampler> {
        let mut parts = Vec::new();
        for d in &self.densities {
            for positive in [true, false] {
                let Some((lo, hi)) = d.radial_support(positive) else {
                    continue;
                };
                let lo = lo.max(eps);
                if lo >= hi {
                    continue;
                }
                let sign = if positive { 1.0 } else { -1.0 };
                match d {
                    Density::TemperedPower { c, beta, lambda, .. } => {
                        // split at radius 1: power-law proposal below, exponential or
                        // Gamma proposal above
                        let cut = 1.0f64.max(lo).min(hi);
                        if lo < cut {
                            let mass = c * tempered_moment(-beta, *lambda, lo, cut);
                            if !mass.is_finite() {
                                return invalid("infinite-activity measure needs a positive jump cut");
                            }
                            if mass > 0.0 {
                                parts.push(SamplerPart {
                                    rate: mass,
                                    kind: PartKind::PowerBody {
                                        beta: *beta,
                                        lambda: *lambda,
                                        lo,
                                        hi: cut,
                                        sign,
                                    },
                                });
                            }
                        }
                        if cut < hi {
                            let mass = c * tempered_moment(-beta, *lambda, cut, hi);
                            if !mass.is_finite() {
                                return Err(Error::QuadratureDivergence(
                                    "jump mass above the cut is infinite".into(),
                                ));
                            }
                            if mass > 0.0 {
                                parts.push(SamplerPart {
                                    rate: mass,
                                    kind: PartKind::PowerTail {
                                        beta: *beta,
                                        lambda: *lambda,
                                        lo: cut,
                                        hi,
                                        sign,
                                    },
                                });
                            }
                        }
                    }
                    Density::Custom { .. } => {
                        let table = tabulate(d, positive, lo, hi)?;
                        if table.total > 0.0 {
                            parts.push(SamplerPart {
                                rate: table.total,
                                kind: PartKind::Table { table, sign },
                            });
                        }
                    }
                }
            }
        }
        for at in &self.atoms {
            if at.location.abs() > eps && at.mass > 0.0 {
                parts.push(SamplerPart {
                    rate: at.mass,
                    kind: PartKind::Atom(at.location),
                });
            }
        }
        Ok(JumpSampler { parts })
    }
}

#[derive(Debug, Clone)]
struct Table {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    total: f64,
}

// Cumulative mass on a log-spaced grid, cut where the remaining tail mass is
// negligible.
fn tabulate(d: &Density, positive: bool, lo: f64, hi: f64) -> Result<Table> {
    let top = if hi.is_finite() { hi } else { lo.max(1.0) * 1e8 };
    let n = 4000;
    // a grid starting at the origin gets one extra cell [0, start]
    let start = if lo > 0.0 { lo } else { 1e-9 * top.min(1.0) };
    let ratio = (top / start).ln() / n as f64;
    let mut nodes = Vec::with_capacity(n + 2);
    let mut cdf = Vec::with_capacity(n + 2);
    nodes.push(lo);
    cdf.push(0.0);
    let mut acc = 0.0;
    let sign = if positive { 1.0 } else { -1.0 };
    let f = |r: f64| d.eval(sign * r);
    let opts = QuadOptions::default();
    if lo == 0.0 {
        acc += integrate_singular(&f, 0.0, start, true, false, &opts)?.value;
        nodes.push(start);
        cdf.push(acc);
    }
    for i in 1..=n {
        let a = *nodes.last().expect("nonempty");
        let b = if i == n { top } else { start * (ratio * i as f64).exp() };
        acc += integrate_singular(&f, a, b, false, false, &opts)?.value;
        nodes.push(b);
        cdf.push(acc);
    }
    Ok(Table {
        nodes,
        cdf,
        total: acc,
    })
}

#[derive(Debug, Clone)]
enum PartKind {
    PowerBody {
        beta: f64,
        lambda: f64,
        lo: f64,
        hi: f64,
        sign: f64,
    },
    PowerTail {
        beta: f64,
        lambda: f64,
        lo: f64,
        hi: f64,
        sign: f64,
    },
    Table {
        table: Table,
        sign: f64,
    },
    Atom(f64),
}

#[derive(Debug, Clone)]
struct SamplerPart {
    rate: f64,
    kind: PartKind,
}

/// Exact sampler for the jumps of a Lévy measure above a cut.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    parts: Vec<SamplerPart>,
}

/// Inverse CDF of `r^{-1-β}` on `[lo, hi]`.
fn power_inverse(beta: f64, lo: f64, hi: f64, u: f64) -> f64 {
    if beta == 0.0 {
        return lo * ((hi / lo).ln() * u).exp();
    }
    let e = -beta;
    if hi.is_infinite() {
        // e < 0 here, Pareto tail
        return lo * (1.0 - u).powf(1.0 / e);
    }
    let (a, b) = (lo.powf(e), hi.powf(e));
    (a + u * (b - a)).powf(1.0 / e)
}

impl JumpSampler {
    /// Expected number of jumps per unit of control mass.
    pub fn rate(&self) -> f64 {
        self.parts.iter().map(|p| p.rate).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Sum of the jumps of a Poisson random measure with intensity
    /// `mass · m` restricted to the cut region.
    pub fn sample_sum<R: Rng + ?Sized>(&self, mass: f64, rng: &mut R) -> f64 {
        let mut total = 0.0;
        for part in &self.parts {
            let mean = part.rate * mass;
            if mean <= 0.0 {
                continue;
            }
            let n = poisson(mean, rng);
            for _ in 0..n {
                total += sample_part(&part.kind, rng);
            }
        }
        total
    }

    /// Number of jumps and their sum, for diagnostics and tests.
    pub fn sample_count_and_sum<R: Rng + ?Sized>(&self, mass: f64, rng: &mut R) -> (u64, f64) {
        let mut total = 0.0;
        let mut count = 0;
        for part in &self.parts {
            let mean = part.rate * mass;
            if mean <= 0.0 {
                continue;
            }
            let n = poisson(mean, rng);
            count += n;
            for _ in 0..n {
                total += sample_part(&part.kind, rng);
            }
        }
        (count, total)
    }
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean < 30.0 {
        // inversion by sequential search is exact and cheap for small means
        let mut p = (-mean).exp();
        let mut cdf = p;
        let u: f64 = rng.random();
        let mut k = 0u64;
        while u > cdf && k < 10_000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    } else {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    }
}

fn sample_part<R: Rng + ?Sized>(kind: &PartKind, rng: &mut R) -> f64 {
    match kind {
        PartKind::Atom(x) => *x,
        PartKind::PowerBody {
            beta,
            lambda,
            lo,
            hi,
            sign,
        } => loop {
            let r = power_inverse(*beta, *lo, *hi, rng.random::<f64>());
            if *lambda == 0.0 || rng.random::<f64>() <= (-lambda * (r - lo)).exp() {
                return sign * r;
            }
        },
        PartKind::PowerTail {
            beta,
            lambda,
            lo,
            hi,
            sign,
        } => {
            if *lambda == 0.0 {
                return sign * power_inverse(*beta, *lo, *hi, rng.random::<f64>());
            }
            if *beta >= -1.0 {
                // shifted exponential proposal, accept with (r/lo)^{-1-β} ≤ 1
                let exp = Exp::new(*lambda).expect("positive rate");
                loop {
                    let r = lo + exp.sample(rng);
                    if r > *hi {
                        continue;
                    }
                    if *beta == -1.0 || rng.random::<f64>() <= (r / lo).powf(-1.0 - beta) {
                        return sign * r;
                    }
                }
            } else {
                let gamma = Gamma::new(-beta, 1.0 / lambda).expect("valid gamma law");
                loop {
                    let r = gamma.sample(rng);
                    if r > *lo && r <= *hi {
                        return sign * r;
                    }
                }
            }
        }
        PartKind::Table { table, sign } => {
            let target = rng.random::<f64>() * table.total;
            let i = table.cdf.partition_point(|c| *c < target).clamp(1, table.cdf.len() - 1);
            let (c0, c1) = (table.cdf[i - 1], table.cdf[i]);
            let (a, b) = (table.nodes[i - 1], table.nodes[i]);
            let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
            sign * (a + w * (b - a))
        }
    }
}
