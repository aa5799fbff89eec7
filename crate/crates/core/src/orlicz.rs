//! Musielak–Orlicz modulars `Φ_p`, Luxemburg norms and integrability tests.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{integrate_profile, KernelSpec, Profile};
use crate::levy_core::quadruplet::sample_points;
use crate::levy_core::{log_moment_check, LevyMeasure1D, LevyQuadruplet, MomentVerdict};
use crate::quad::{integrate_pieces, Finiteness, QuadOptions};

/// A basis together with the moment order of the modular.
#[derive(Debug)]
pub struct OrliczContext {
    pub quadruplet: LevyQuadruplet,
    pub p: u8,
    seed_measure: Option<LevyMeasure1D>,
    sup_table: OnceLock<Option<SupTable>>,
}

impl Clone for OrliczContext {
    fn clone(&self) -> Self {
        Self {
            quadruplet: self.quadruplet.clone(),
            p: self.p,
            seed_measure: self.seed_measure.clone(),
            sup_table: OnceLock::new(),
        }
    }
}

impl OrliczContext {
    pub fn new(quadruplet: LevyQuadruplet, p: u8) -> Result<Self> {
        if p > 2 {
            return invalid(format!("moment order p = {p} is not supported (use 0, 1 or 2)"));
        }
        if quadruplet.control.dim() != 1 {
            return invalid("Orlicz functionals need a one-dimensional control measure");
        }
        if p > 0 {
            for s in sample_points(&quadruplet.control.domain) {
                let m = quadruplet.rho_at(&s);
                let tail = m.abs_moment(p as f64, 1.0, f64::INFINITY)?;
                if !tail.is_finite() {
                    return Err(Error::IntegrabilityFailure(format!(
                        "∫_{{|x|>1}} |x|^{p} ρ(s,dx) is infinite at s = {s:?}"
                    )));
                }
                if quadruplet.rho.is_constant() {
                    break;
                }
            }
        }
        let seed_measure = quadruplet.rho.is_constant().then(|| quadruplet.rho_at(&[0.0]));
        Ok(Self {
            quadruplet,
            p,
            seed_measure,
            sup_table: OnceLock::new(),
        })
    }

    fn measure_at(&self, s: f64) -> LevyMeasure1D {
        match &self.seed_measure {
            Some(m) => m.clone(),
            None => self.quadruplet.rho_at(&[s]),
        }
    }

    fn with_measure<R>(&self, s: f64, f: impl FnOnce(&LevyMeasure1D) -> R) -> R {
        match &self.seed_measure {
            Some(m) => f(m),
            None => f(&self.quadruplet.rho_at(&[s])),
        }
    }

    fn sup_table(&self) -> Option<&SupTable> {
        self.sup_table
            .get_or_init(|| {
                let m = self.seed_measure.as_ref()?;
                if !self.quadruplet.gamma.is_constant() {
                    return None;
                }
                let gamma = self.quadruplet.gamma.eval(&[0.0]);
                SupTable::build(gamma, m).ok()
            })
            .as_ref()
    }

    /// `sup_{|c|≤1} H(cr, s)` evaluated by a 65-point grid in `c` refined
    /// with golden-section search, without any precomputation.
    pub fn sup_h_direct(&self, r: f64, s: f64) -> Result<f64> {
        let gamma = self.quadruplet.gamma.eval(&[s]);
        let m = self.measure_at(s);
        if r == 0.0 || (gamma == 0.0 && (m.is_zero() || m.is_symmetric())) {
            return Ok(0.0);
        }
        let k = |v: f64| -> Result<f64> { Ok((gamma * v + m.tau_correction(v)?).abs()) };
        // H(cr) is even in c
        let n = 65;
        let mut vals = Vec::with_capacity(n);
        for i in 0..n {
            let c = i as f64 / (n - 1) as f64;
            vals.push(k(c * r.abs())?);
        }
        let mut best = vals.iter().copied().fold(0.0, f64::max);
        for i in 1..n - 1 {
            if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > 0.0 {
                let a = (i - 1) as f64 / (n - 1) as f64 * r.abs();
                let b = (i + 1) as f64 / (n - 1) as f64 * r.abs();
                best = best.max(golden_max(&|v| k(v).unwrap_or(0.0), a, b, 1e-13));
            }
        }
        Ok(best)
    }

    /// `sup_{|c|≤1} H(cr, s)`.
    pub fn sup_h(&self, r: f64, s: f64) -> Result<f64> {
        let r = r.abs();
        if r == 0.0 {
            return Ok(0.0);
        }
        if let Some(t) = self.sup_table() {
            if t.covers(r) {
                return Ok(t.sup(r));
            }
        }
        self.sup_h_direct(r, s)
    }

    /// The three parts of `Φ_p(r, s)`: the drift supremum, the Gaussian
    /// term and the jump term split as `(|xr| ≤ 1, |xr| > 1)`.
    pub fn phi_parts(&self, r: f64, s: f64) -> Result<PhiParts> {
        let r = r.abs();
        if r == 0.0 {
            return Ok(PhiParts::default());
        }
        let b = self.quadruplet.b.eval(&[s]);
        let (origin, tail) = self.with_measure(s, |m| -> Result<(f64, f64)> {
            if m.is_zero() {
                return Ok((0.0, 0.0));
            }
            let inv = 1.0 / r;
            let origin = r * r * m.abs_moment(2.0, 0.0, inv)?;
            let tail = r.powi(self.p as i32) * m.abs_moment(self.p as f64, inv, f64::INFINITY)?;
            Ok((origin, tail))
        })?;
        Ok(PhiParts {
            drift_h: self.sup_h(r, s)?,
            gaussian: b * b * r * r,
            jump_origin: origin,
            jump_tail: tail,
        })
    }
}

/// Components of `Φ_p(r, s)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiParts {
    pub drift_h: f64,
    pub gaussian: f64,
    pub jump_origin: f64,
    pub jump_tail: f64,
}

impl PhiParts {
    pub fn total(&self) -> f64 {
        self.drift_h + self.gaussian + self.jump_origin + self.jump_tail
    }
}

/// Maximum of a function on `[a, b]` by golden-section search.
fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = f(a).max(f(b)).max(f1).max(f2);
    for _ in 0..200 {
        if (b - a) <= tol * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
            best = best.max(f2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
            best = best.max(f1);
        }
    }
    best
}

/// Running maximum of `|γv + J(v)|` over `v ∈ [0, r]` for a seed that
/// does not depend on `s`. The local maxima are located once on a log grid,
/// after which a supremum costs one evaluation.
#[derive(Debug)]
struct SupTable {
    gamma: f64,
    measure: LevyMeasure1D,
    /// local maxima `(v, running max up to v)` sorted by `v`
    peaks: Vec<(f64, f64)>,
}

impl SupTable {
    const LO: f64 = 1e-12;
    const HI: f64 = 1e12;

    fn k(&self, v: f64) -> f64 {
        (self.gamma * v + self.measure.tau_correction(v).unwrap_or(f64::NAN)).abs()
    }

    fn build(gamma: f64, m: &LevyMeasure1D) -> Result<Self> {
        let mut t = Self {
            gamma,
            measure: m.clone(),
            peaks: Vec::new(),
        };
        let n = 2401;
        let (lo, hi) = (Self::LO.log10(), Self::HI.log10());
        let grid: Vec<f64> = (0..n)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect();
        let vals: Vec<f64> = grid.iter().map(|v| t.k(*v)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::QuadratureDivergence("H is not finite on the grid".into()));
        }
        let mut running: f64 = 0.0;
        for i in 1..n - 1 {
            if vals[i] >= vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > 0.0 {
                let f = |lv: f64| t.k(lv.exp());
                let (lv, peak) = golden_argmax(&f, grid[i - 1].ln(), grid[i + 1].ln());
                running = running.max(peak).max(vals[i]);
                t.peaks.push((lv.exp(), running));
            }
        }
        Ok(t)
    }

    fn covers(&self, r: f64) -> bool {
        (Self::LO..=Self::HI).contains(&r)
    }

    fn sup(&self, r: f64) -> f64 {
        let idx = self.peaks.partition_point(|(v, _)| *v <= r);
        let here = self.k(r);
        if idx == 0 {
            here
        } else {
            here.max(self.peaks[idx - 1].1)
        }
    }
}

/// `H(r, s) = |γ(s) r + ∫(τ(xr) − rτ(x)) ρ(s, dx)|`.
pub fn h_eval(ctx: &OrliczContext, r: f64, s: f64) -> Result<f64> {
    let gamma = ctx.quadruplet.gamma.eval(&[s]);
    let j = ctx.with_measure(s, |m| m.tau_correction(r))?;
    Ok((gamma * r + j).abs())
}

/// `Φ_p(r, s)`.
pub fn phi_p_eval(ctx: &OrliczContext, r: f64, s: f64) -> Result<f64> {
    if r < 0.0 {
        return invalid("Φ_p is evaluated at r ≥ 0");
    }
    Ok(ctx.phi_parts(r, s)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Yes,
    No,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergingTerm {
    DriftH,
    Gaussian,
    JumpTail,
    JumpOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub member: Membership,
    pub phi_integral: f64,
    pub norm: f64,
    pub diverging_term: Option<DivergingTerm>,
}

/// `∫ Φ_p(|f(s)|/a, s) c(ds)`, each part integrated and classified
/// separately.
fn modular_terms(ctx: &OrliczContext, f: &Profile, a: f64) -> [(DivergingTerm, Finiteness); 4] {
    let opts = QuadOptions::default();
    let q = &ctx.quadruplet;
    let run = |pick: fn(&PhiParts) -> f64| -> Finiteness {
        let failed = std::cell::Cell::new(false);
        let g = |v: f64, s: f64| -> f64 {
            if v == 0.0 {
                return 0.0;
            }
            match ctx.phi_parts(v / a, s) {
                Ok(p) => pick(&p),
                Err(_) => {
                    failed.set(true);
                    0.0
                }
            }
        };
        let r = integrate_profile(f, &q.control, &g, &opts);
        if failed.get() {
            return Finiteness::Undecided;
        }
        Finiteness::from_result(r)
    };
    [
        (DivergingTerm::Gaussian, run(|p| p.gaussian)),
        (DivergingTerm::JumpOrigin, run(|p| p.jump_origin)),
        (DivergingTerm::JumpTail, run(|p| p.jump_tail)),
        (DivergingTerm::DriftH, run(|p| p.drift_h)),
    ]
}

/// The modular `∫ Φ_p(|f(s)|/a, s) c(ds)`; `∞` when any part diverges and
/// `NaN` when a part cannot be classified.
pub fn modular(ctx: &OrliczContext, f: &Profile, a: f64) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    let opts = QuadOptions::default();
    let g = |v: f64, s: f64| -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        ctx.phi_parts(v / a, s).map(|p| p.total()).unwrap_or(f64::NAN)
    };
    match Finiteness::from_result(integrate_profile(f, &ctx.quadruplet.control, &g, &opts)) {
        Finiteness::Finite(v) => v,
        Finiteness::Infinite => f64::INFINITY,
        Finiteness::Undecided => f64::NAN,
    }
}

/// Membership of `f` in `L_{Φ_p}` with divergence detection per term.
pub fn phi_integral(ctx: &OrliczContext, f: &Profile) -> IntegrabilityReport {
    if f.is_zero() {
        return IntegrabilityReport {
            member: Membership::Yes,
            phi_integral: 0.0,
            norm: 0.0,
            diverging_term: None,
        };
    }
    let terms = modular_terms(ctx, f, 1.0);
    if let Some((tag, _)) = terms.iter().find(|(_, v)| *v == Finiteness::Infinite) {
        return IntegrabilityReport {
            member: Membership::No,
            phi_integral: f64::INFINITY,
            norm: f64::INFINITY,
            diverging_term: Some(*tag),
        };
    }
    if terms.iter().any(|(_, v)| *v == Finiteness::Undecided) {
        return IntegrabilityReport {
            member: Membership::Inconclusive,
            phi_integral: f64::NAN,
            norm: f64::NAN,
            diverging_term: None,
        };
    }
    let total: f64 = terms
        .iter()
        .map(|(_, v)| match v {
            Finiteness::Finite(x) => *x,
            _ => 0.0,
        })
        .sum();
    let norm = luxemburg_norm(ctx, f);
    if !norm.is_finite() {
        return IntegrabilityReport {
            member: Membership::Inconclusive,
            phi_integral: total,
            norm,
            diverging_term: None,
        };
    }
    IntegrabilityReport {
        member: Membership::Yes,
        phi_integral: total,
        norm,
        diverging_term: None,
    }
}

/// `inf{a > 0 : ∫ Φ_p(|f(s)|/a, s) c(ds) ≤ 1}` by bracketing and bisection
/// on `log a`; `∞` when no finite bracket exists.
pub fn luxemburg_norm(ctx: &OrliczContext, f: &Profile) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    let m = |a: f64| modular(ctx, f, a);
    let below = |v: f64| v.is_finite() && v <= 1.0;
    let mut a = 1.0;
    let mut lo;
    let mut hi;
    let m1 = m(a);
    if m1.is_nan() {
        return f64::NAN;
    }
    if below(m1) {
        if m1 == 0.0 {
            return 0.0;
        }
        hi = a;
        loop {
            a /= 10.0;
            if a < 1e-300 {
                return 0.0;
            }
            let v = m(a);
            if v.is_nan() {
                return f64::NAN;
            }
            if !below(v) {
                lo = a;
                break;
            }
            hi = a;
        }
    } else {
        lo = a;
        loop {
            a *= 10.0;
            if a > 1e300 {
                return f64::INFINITY;
            }
            let v = m(a);
            if v.is_nan() {
                return f64::NAN;
            }
            if below(v) {
                hi = a;
                break;
            }
            lo = a;
        }
    }
    while hi / lo - 1.0 > 1e-10 {
        let mid = (lo * hi).sqrt();
        let v = m(mid);
        if v.is_nan() {
            return f64::NAN;
        }
        if below(v) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Verdict with the criterion that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub member: Membership,
    pub reason: String,
}

/// Existence of the Gamma-kernel integral `∫ e^{-(u-s)}(u-s)^α dL_s` for a
/// Lévy process with triplet `(γ, b, ρ)`, by the analytic criteria: a log
/// moment of `ρ` at infinity, together with `α > −1/2`, or `α = −1/2, b = 0`
/// with `∫_{|x|≤1} x²|log|x|| ρ(dx) < ∞`, or `α ∈ (−1, −1/2), b = 0` with
/// `∫_{|x|≤1} |x|^{−1/α} ρ(dx) < ∞`.
pub fn gamma_kernel_integrable(
    _gamma: f64,
    b: f64,
    rho: &LevyMeasure1D,
    alpha: f64,
) -> Result<CriterionVerdict> {
    if !(alpha > -1.0) {
        return invalid(format!("α must exceed −1, got {alpha}"));
    }
    let verdict = |member, reason: &str| {
        Ok(CriterionVerdict {
            member,
            reason: reason.to_string(),
        })
    };
    match log_moment_check(rho) {
        MomentVerdict::Fails => return verdict(Membership::No, "log moment of ρ at infinity is infinite"),
        MomentVerdict::Inconclusive => {
            return verdict(Membership::Inconclusive, "log moment of ρ at infinity is undecided")
        }
        MomentVerdict::Holds => {}
    }
    if alpha > -0.5 {
        return verdict(Membership::Yes, "α > −1/2 with finite log moment");
    }
    if b != 0.0 {
        return verdict(Membership::No, "b ≠ 0 while α ≤ −1/2");
    }
    let opts = QuadOptions::default();
    // weights in logarithms: near 0 the density overflows before the weight underflows
    let (ln_w, label): (Box<dyn Fn(f64) -> f64>, &str) = if alpha == -0.5 {
        (Box::new(|r: f64| 2.0 * r.ln() + r.ln().abs().ln()), "∫_{|x|≤1} x²|log|x|| ρ(dx)")
    } else {
        let e = -1.0 / alpha;
        (Box::new(move |r: f64| e * r.ln()), "∫_{|x|≤1} |x|^{−1/α} ρ(dx)")
    };
    match MomentVerdict::from_quadrature(rho.radial_quadrature_ln(&*ln_w, 0.0, 1.0, &opts)) {
        MomentVerdict::Holds => verdict(Membership::Yes, &format!("b = 0 and {label} < ∞")),
        MomentVerdict::Fails => verdict(Membership::No, &format!("{label} = ∞")),
        MomentVerdict::Inconclusive => verdict(Membership::Inconclusive, &format!("{label} is undecided")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum FourierVerdict {
    NonvanishingOnGrid { min_modulus: f64 },
    VanishesAt { points: Vec<f64> },
}

/// `ĝ(ξ) = (2π)^{-1/2} ∫ g(t) e^{itξ} dt` of a stationary kernel `g`.
pub fn kernel_fourier(g: &KernelSpec, xi: f64) -> Result<Complex64> {
    if let Some(v) = g.fourier_closed_form(xi) {
        return Ok(v);
    }
    fourier_quadrature(g, xi)
}

/// `ĝ(ξ)` by direct quadrature, ignoring any closed form.
pub fn fourier_quadrature(g: &KernelSpec, xi: f64) -> Result<Complex64> {
    if !g.is_stationary() {
        return invalid("a Fourier transform needs a stationary kernel g(u − s)");
    }
    let p = Profile::section(g, 0.0);
    if p.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = |t: f64| {
        let v = p.value(t);
        if v == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(v, t * xi)
        }
    };
    let e = integrate_pieces(&h, p.lo, p.hi, &p.breaks, &p.singular, &QuadOptions::tight())?;
    Ok(e.value / (2.0 * PI).sqrt())
}

/// `∫ |g|`, raising [`Error::NotL1`] when it diverges.
pub fn kernel_l1_norm(g: &KernelSpec) -> Result<f64> {
    let p = Profile::section(g, 0.0);
    if p.is_zero() {
        return Ok(0.0);
    }
    let h = |t: f64| p.value(t).abs();
    match Finiteness::from_result(integrate_pieces(&h, p.lo, p.hi, &p.breaks, &p.singular, &QuadOptions::default())) {
        Finiteness::Finite(v) => Ok(v),
        _ => Err(Error::NotL1(format!("∫|g| does not converge for the {} kernel", g.name()))),
    }
}

/// Checks `ĝ(ξ) ≠ 0` on a grid. Local minima of `|ĝ|` between grid points
/// are refined so that zeros falling between nodes are still found.
pub fn fourier_nonvanishing_check(g: &KernelSpec, xi_grid: &[f64]) -> Result<FourierVerdict> {
    const TOL: f64 = 1e-12;
    kernel_l1_norm(g)?;
    let mut grid = xi_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let mods = grid
        .iter()
        .map(|xi| kernel_fourier(g, *xi).map(|v| v.norm()))
        .collect::<Result<Vec<_>>>()?;
    let mut zeros = Vec::new();
    for (xi, m) in grid.iter().zip(&mods) {
        if *m < TOL {
            zeros.push(*xi);
        }
    }
    for i in 1..grid.len().saturating_sub(1) {
        if mods[i] <= mods[i - 1] && mods[i] <= mods[i + 1] && mods[i] >= TOL {
            let f = |x: f64| -kernel_fourier(g, x).map(|v| v.norm()).unwrap_or(f64::INFINITY);
            let (a, b) = (grid[i - 1], grid[i + 1]);
            let (xi, m) = golden_argmax(&f, a, b);
            if -m < TOL {
                zeros.push(xi);
            }
        }
    }
    if zeros.is_empty() {
        let min_modulus = mods.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(FourierVerdict::NonvanishingOnGrid { min_modulus })
    } else {
        zeros.sort_by(|a, b| a.total_cmp(b));
        zeros.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        Ok(FourierVerdict::VanishesAt { points: zeros })
    }
}

fn golden_argmax(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if b - a <= 1e-15 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
