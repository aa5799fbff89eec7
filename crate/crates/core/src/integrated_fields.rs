//! Fields integrated against a measure on the index set, the stochastic
//! Fubini condition, and the Langevin and Gamma-convolution identities.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::kernel::{integrate_profile, KernelFamily, KernelSpec, Profile};
use crate::orlicz::{luxemburg_norm, OrliczContext};
use crate::quad::{integrate_pieces, Finiteness, QuadOptions};
use crate::special::{beta_fn, gamma_fn, upper_incomplete_gamma};
use crate::volterra_sim::{FieldWeights, SimGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    LebesgueOnSet,
    WeightedDensity,
}

/// `μ(du) = density(u) du` on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorMeasure {
    pub kind: IntegratorKind,
    /// Expression in `u`; ignored for Lebesgue measure.
    pub density: Option<Expr>,
    pub support: [f64; 2],
}

impl IntegratorMeasure {
    pub fn lebesgue(lo: f64, hi: f64) -> Self {
        Self {
            kind: IntegratorKind::LebesgueOnSet,
            density: None,
            support: [lo, hi],
        }
    }

    pub fn weighted(density: Expr, lo: f64, hi: f64) -> Result<Self> {
        let m = Self {
            kind: IntegratorKind::WeightedDensity,
            density: Some(density),
            support: [lo, hi],
        };
        m.validate()?;
        Ok(m)
    }

    pub fn density_at(&self, u: f64) -> f64 {
        let [lo, hi] = self.support;
        if u < lo || u > hi {
            return 0.0;
        }
        match (&self.kind, &self.density) {
            (IntegratorKind::WeightedDensity, Some(e)) => e.eval(0.0, u, 0.0),
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.support;
        if !(lo < hi) {
            return invalid(format!("μ support [{lo}, {hi}] is empty"));
        }
        if self.kind == IntegratorKind::WeightedDensity && self.density.is_none() {
            return invalid("a weighted integrator measure needs a density");
        }
        for i in 0..64 {
            let u = sample_in(lo, hi, i, 64);
            let d = self.density_at(u);
            if !(d >= 0.0 && d.is_finite()) {
                return invalid(format!("μ density is {d} at u = {u}"));
            }
        }
        Ok(())
    }

    /// `μ([a, b])`, infinite when the integral diverges.
    pub fn mass(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = (a.max(self.support[0]), b.min(self.support[1]));
        if lo >= hi {
            return Ok(0.0);
        }
        if self.kind == IntegratorKind::LebesgueOnSet {
            return Ok(hi - lo);
        }
        let f = |u: f64| self.density_at(u);
        match Finiteness::from_result(integrate_pieces(&f, lo, hi, &[], &[], &QuadOptions::default())) {
            Finiteness::Finite(v) => Ok(v),
            Finiteness::Infinite => Ok(f64::INFINITY),
            Finiteness::Undecided => Err(Error::QuadratureInconclusive("μ mass is undecided".into())),
        }
    }

    /// Whether the density is positive on sampled points of the support,
    /// so that `μ` is equivalent to Lebesgue measure there.
    pub fn equivalent_to_lebesgue(&self) -> bool {
        let [lo, hi] = self.support;
        (0..256).all(|i| self.density_at(sample_in(lo, hi, i, 256)) > 0.0)
    }
}

fn sample_in(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    let (a, b) = (
        if lo.is_finite() { lo } else { hi.min(0.0) - 50.0 },
        if hi.is_finite() { hi } else { lo.max(0.0) + 50.0 },
    );
    a + (b - a) * (i as f64 + 0.5) / n as f64
}

/// Points `u` where `f(·, s)` has kinks, and those where it is singular.
fn u_structure(kernel: &KernelSpec, s: f64) -> (Vec<f64>, Vec<f64>) {
    match &kernel.family {
        KernelFamily::Zero => (vec![], vec![]),
        KernelFamily::Ou => (vec![s], vec![]),
        KernelFamily::Gamma { alpha } => (vec![s], if *alpha < 0.0 { vec![s] } else { vec![] }),
        KernelFamily::Fractional { .. } => (vec![s, 0.0], vec![s]),
        KernelFamily::Custom { stationary, breaks, singular, .. } => {
            if *stationary {
                (
                    breaks.iter().map(|b| s + b).collect(),
                    singular.iter().map(|b| s + b).collect(),
                )
            } else {
                (vec![], vec![])
            }
        }
    }
}

/// `μ_f(A, s) = ∫_A f(u, s) μ(du)`.
pub fn mu_f_section(kernel: &KernelSpec, mu: &IntegratorMeasure, a: (f64, f64), s: f64) -> Result<f64> {
    let (lo, hi) = (a.0.max(mu.support[0]), a.1.min(mu.support[1]));
    if lo >= hi || kernel.scale == 0.0 || matches!(kernel.family, KernelFamily::Zero) {
        return Ok(0.0);
    }
    if mu.kind == IntegratorKind::LebesgueOnSet {
        if let Some(v) = lebesgue_section_closed_form(kernel, lo, hi, s) {
            return Ok(v);
        }
    }
    let (mut breaks, singular) = u_structure(kernel, s);
    breaks.extend(singular.iter().copied());
    let f = |u: f64| kernel.eval(u, s) * mu.density_at(u);
    match integrate_pieces(&f, lo, hi, &breaks, &singular, &QuadOptions::default()) {
        Ok(e) => Ok(e.value),
        Err(Error::QuadratureBudget { .. }) => Err(Error::QuadratureDivergence(format!(
            "μ_f(A, {s}) does not converge"
        ))),
        Err(e) => Err(e),
    }
}

/// `∫_lo^hi f(u, s) du` for OU and Gamma kernels.
fn lebesgue_section_closed_form(kernel: &KernelSpec, lo: f64, hi: f64, s: f64) -> Option<f64> {
    let alpha = match kernel.family {
        KernelFamily::Ou => 0.0,
        KernelFamily::Gamma { alpha } => alpha,
        _ => return None,
    };
    // ∫_{max(lo,s)}^{hi} e^{−(u−s)}(u−s)^α du = γ(α+1, hi−s) − γ(α+1, max(lo−s, 0))
    if hi <= s {
        return Some(0.0);
    }
    let a = (lo - s).max(0.0);
    let b = hi - s;
    Some(kernel.scale * (lower_incomplete(alpha + 1.0, b) - lower_incomplete(alpha + 1.0, a)))
}

/// `γ(a, x) = ∫_0^x t^{a−1} e^{−t} dt`.
pub fn lower_incomplete(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if a == 1.0 {
        return -(-x).exp_m1();
    }
    gamma_fn(a) - upper_incomplete_gamma(a, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FubiniVerdict {
    Holds,
    Fails,
    Inconclusive,
}

impl FubiniVerdict {
    fn of(f: &Finiteness) -> Self {
        match f {
            Finiteness::Finite(_) => FubiniVerdict::Holds,
            Finiteness::Infinite => FubiniVerdict::Fails,
            Finiteness::Undecided => FubiniVerdict::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FubiniReport {
    pub verdict: FubiniVerdict,
    /// `∫_A ‖f(u,·)‖_{Φ₁} μ(du)`.
    pub norm_integral: f64,
    /// Verdict and value of the equivalent moment form, evaluated when `μ(A) < ∞`.
    pub moment_form: Option<(FubiniVerdict, f64)>,
    pub verdicts_agree: bool,
}

fn value_of(f: &Finiteness) -> f64 {
    match f {
        Finiteness::Finite(v) => *v,
        Finiteness::Infinite => f64::INFINITY,
        Finiteness::Undecided => f64::NAN,
    }
}

/// `∫_S [f² b² + ∫ (|x f| ∧ |x f|²) ρ(dx)] c(ds)` for one section.
fn moment_form_section(ctx: &OrliczContext, p: &Profile) -> Finiteness {
    let q = &ctx.quadruplet;
    let seed = q.rho.is_constant().then(|| q.rho_at(&[0.0]));
    let failed = std::cell::Cell::new(false);
    let g = |v: f64, s: f64| -> f64 {
        let r = v.abs();
        if r == 0.0 {
            return 0.0;
        }
        let b = q.b.eval(&[s]);
        let owned;
        let m = match &seed {
            Some(m) => m,
            None => {
                owned = q.rho_at(&[s]);
                &owned
            }
        };
        let jumps = if m.is_zero() {
            Ok(0.0)
        } else {
            let inv = 1.0 / r;
            m.abs_moment(2.0, 0.0, inv)
                .and_then(|a| m.abs_moment(1.0, inv, f64::INFINITY).map(|c| r * r * a + r * c))
        };
        match jumps {
            Ok(j) => b * b * r * r + j,
            Err(_) => {
                failed.set(true);
                0.0
            }
        }
    };
    let r = integrate_profile(p, &q.control, &g, &QuadOptions::default());
    if failed.get() {
        return Finiteness::Undecided;
    }
    Finiteness::from_result(r)
}

/// Integral over `A` of a nonnegative function of `u` with divergence
/// detection at both ends.
fn u_integral(mu: &IntegratorMeasure, a: (f64, f64), h: &dyn Fn(f64) -> f64, opts: &QuadOptions) -> Finiteness {
    let (lo, hi) = (a.0.max(mu.support[0]), a.1.min(mu.support[1]));
    if lo >= hi {
        return Finiteness::Finite(0.0);
    }
    let failed = std::cell::Cell::new(false);
    let g = |u: f64| {
        let w = mu.density_at(u);
        if w == 0.0 {
            return 0.0;
        }
        let v = h(u);
        if v.is_nan() {
            failed.set(true);
            return 0.0;
        }
        w * v
    };
    let ends: Vec<f64> = [lo, hi].into_iter().filter(|x| x.is_finite()).collect();
    let r = integrate_pieces(&g, lo, hi, &[], &ends, opts);
    if failed.get() {
        return Finiteness::Undecided;
    }
    Finiteness::from_result(r)
}

/// The Φ₁-norm condition `∫_A ‖f(u,·)‖_{Φ₁} μ(du) < ∞` for a centered
/// basis, together with the equivalent moment form when `μ(A)` is finite.
pub fn fubini_condition_check(
    kernel: &KernelSpec,
    mu: &IntegratorMeasure,
    a: (f64, f64),
    ctx: &OrliczContext,
) -> Result<FubiniReport> {
    if ctx.p != 1 {
        return invalid(format!("the Fubini condition uses Φ₁, got p = {}", ctx.p));
    }
    if !ctx.quadruplet.flags.centered {
        return Err(Error::NotCentered(
            "stochastic Fubini needs a centered basis".into(),
        ));
    }
    let mu_a = mu.mass(a.0, a.1)?;
    if kernel.scale == 0.0 || matches!(kernel.family, KernelFamily::Zero) || mu_a == 0.0 {
        return Ok(FubiniReport {
            verdict: FubiniVerdict::Holds,
            norm_integral: 0.0,
            moment_form: mu_a.is_finite().then_some((FubiniVerdict::Holds, 0.0)),
            verdicts_agree: true,
        });
    }
    let stationary = kernel.is_stationary()
        && ctx.quadruplet.flags.homogeneous
        && !ctx.quadruplet.control.domain.is_bounded();
    let section = |u: f64| Profile::section(kernel, u);
    let norm_part = if stationary {
        // the section norm does not depend on u
        let n = luxemburg_norm(ctx, &section(0.0));
        if n.is_nan() {
            Finiteness::Undecided
        } else if !n.is_finite() || !mu_a.is_finite() {
            Finiteness::Infinite
        } else {
            Finiteness::Finite(n * mu_a)
        }
    } else {
        let h = |u: f64| luxemburg_norm(ctx, &section(u));
        u_integral(mu, a, &h, &QuadOptions::with_tol(1e-8, 1e-5))
    };
    let moment_form = if mu_a.is_finite() {
        let m = if stationary {
            match moment_form_section(ctx, &section(0.0)) {
                Finiteness::Finite(v) => Finiteness::Finite(v * mu_a),
                other => other,
            }
        } else {
            let h = |u: f64| value_of(&moment_form_section(ctx, &section(u)));
            u_integral(mu, a, &h, &QuadOptions::with_tol(1e-8, 1e-5))
        };
        Some((FubiniVerdict::of(&m), value_of(&m)))
    } else {
        None
    };
    let verdict = FubiniVerdict::of(&norm_part);
    let verdicts_agree = match &moment_form {
        Some((v, _)) => *v == verdict || *v == FubiniVerdict::Inconclusive || verdict == FubiniVerdict::Inconclusive,
        None => true,
    };
    Ok(FubiniReport {
        verdict,
        norm_integral: value_of(&norm_part),
        moment_form,
        verdicts_agree,
    })
}

/// Discrete weights of both sides of the Fubini identity on a grid.
#[derive(Debug, Clone)]
pub struct IntegratedField {
    pub sets: Vec<(f64, f64)>,
    /// Weights of `∫_A X_u μ(du)` with `X_u` taken from the grid field.
    left: Vec<Vec<f64>>,
    /// Midpoint weights of `∫ μ_f(A, s) L(ds)`.
    right: Vec<Vec<f64>>,
}

/// Values of both sides for one set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FubiniSides {
    pub left: f64,
    pub right: f64,
    pub gap: f64,
}

impl IntegratedField {
    /// The path is integrated by the trapezoidal rule on the cell edges of
    /// the grid that fall in `A`; `A` must be resolved by at least one cell.
    pub fn new(kernel: &KernelSpec, mu: &IntegratorMeasure, sets: &[(f64, f64)], grid: &SimGrid) -> Result<Self> {
        grid.validate()?;
        mu.validate()?;
        let n = grid.n_cells();
        let [s0, s1] = grid.s_range;
        let mut left = Vec::with_capacity(sets.len());
        let mut right = Vec::with_capacity(sets.len());
        for &(a, b) in sets {
            let (lo, hi) = (a.max(mu.support[0]), b.min(mu.support[1]));
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return invalid(format!("set [{a}, {b}] must be a bounded interval inside the μ support"));
            }
            if lo < s0 || hi > s1 {
                return invalid(format!("set [{a}, {b}] leaves the simulated range [{s0}, {s1}]"));
            }
            let k0 = ((lo - s0) / grid.ds).ceil() as usize;
            let k1 = ((hi - s0) / grid.ds + 1e-9).floor() as usize;
            let mut nodes: Vec<f64> = (k0..=k1).map(|k| s0 + k as f64 * grid.ds).filter(|u| *u >= lo - 1e-12 && *u <= hi + 1e-12).collect();
            if nodes.first().is_none_or(|u| (*u - lo).abs() > 1e-12) {
                nodes.insert(0, lo);
            }
            if nodes.last().is_some_and(|u| (*u - hi).abs() > 1e-12) {
                nodes.push(hi);
            }
            if nodes.len() < 2 {
                return invalid(format!("set [{a}, {b}] is not resolved by the grid"));
            }
            let node_grid = SimGrid {
                u_points: nodes.clone(),
                ..grid.clone()
            };
            let w = FieldWeights::new(kernel, &node_grid)?;
            let mut lw = vec![0.0; n];
            for (k, u) in nodes.iter().enumerate() {
                let h_left = if k > 0 { u - nodes[k - 1] } else { 0.0 };
                let h_right = if k + 1 < nodes.len() { nodes[k + 1] - u } else { 0.0 };
                let c = 0.5 * (h_left + h_right) * mu.density_at(*u);
                if c == 0.0 {
                    continue;
                }
                let (first, row) = w.weights(k);
                for (j, v) in row.iter().enumerate() {
                    lw[first + j] += c * v;
                }
            }
            let rw = (0..n)
                .map(|j| {
                    let (ca, cb) = grid.cell(j);
                    mu_f_section(kernel, mu, (lo, hi), 0.5 * (ca + cb))
                })
                .collect::<Result<Vec<_>>>()?;
            left.push(lw);
            right.push(rw);
        }
        Ok(Self {
            sets: sets.to_vec(),
            left,
            right,
        })
    }

    pub fn apply(&self, increments: &[f64]) -> Vec<FubiniSides> {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(l, r)| {
                let left: f64 = l.iter().zip(increments).map(|(a, b)| a * b).sum();
                let right: f64 = r.iter().zip(increments).map(|(a, b)| a * b).sum();
                FubiniSides {
                    left,
                    right,
                    gap: left - right,
                }
            })
            .collect()
    }
}

/// Both sides of the Fubini identity for each set, on given increments.
pub fn integrated_field_sim(
    kernel: &KernelSpec,
    mu: &IntegratorMeasure,
    sets: &[(f64, f64)],
    increments: &[f64],
    grid: &SimGrid,
) -> Result<Vec<FubiniSides>> {
    if increments.len() != grid.n_cells() {
        return invalid("increments do not match the grid");
    }
    Ok(IntegratedField::new(kernel, mu, sets, grid)?.apply(increments))
}

/// Terms of the Langevin identity `∫_{t0}^{t1} X_u du = L((t0, t1]) − (X_{t1} − X_{t0})`
/// for the OU field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinTerms {
    pub integral: f64,
    pub noise: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub residual: f64,
}

/// Weights for the Langevin identity of the OU field over `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct LangevinCheck {
    integral: IntegratedField,
    ends: FieldWeights,
    noise_cells: (usize, usize),
}

impl LangevinCheck {
    pub fn new(grid: &SimGrid, t0: f64, t1: f64) -> Result<Self> {
        let ou = KernelSpec::ou();
        let integral = IntegratedField::new(&ou, &IntegratorMeasure::lebesgue(t0, t1), &[(t0, t1)], grid)?;
        let ends = FieldWeights::new(&ou, &SimGrid { u_points: vec![t0, t1], ..grid.clone() })?;
        let s0 = grid.s_range[0];
        let c0 = ((t0 - s0) / grid.ds).round() as usize;
        let c1 = ((t1 - s0) / grid.ds).round() as usize;
        if ((c0 as f64) * grid.ds + s0 - t0).abs() > 1e-9 || ((c1 as f64) * grid.ds + s0 - t1).abs() > 1e-9 {
            return invalid("Langevin endpoints must lie on cell edges");
        }
        Ok(Self {
            integral,
            ends,
            noise_cells: (c0, c1),
        })
    }

    pub fn apply(&self, increments: &[f64]) -> LangevinTerms {
        let integral = self.integral.apply(increments)[0].left;
        let x = self.ends.apply(increments);
        let noise: f64 = increments[self.noise_cells.0..self.noise_cells.1].iter().sum();
        LangevinTerms {
            integral,
            noise,
            x_start: x[0],
            x_end: x[1],
            residual: integral - (noise - (x[1] - x[0])),
        }
    }
}

/// `k_{α,β} = ∫_0^1 x^α (1 − x)^β dx = B(α+1, β+1)`.
pub fn gamma_convolution_constant(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > -1.0 && beta > -1.0) {
        return invalid(format!("α and β must exceed −1, got {alpha} and {beta}"));
    }
    Ok(beta_fn(alpha + 1.0, beta + 1.0))
}

/// Outcome of comparing `∫ φ_β(t−u) X_u du` with `k_α` times the OU path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub k_alpha: f64,
    pub relative_error: f64,
    pub times: Vec<f64>,
    pub integrated: Vec<f64>,
    pub ou: Vec<f64>,
}

/// Lag weights on an aligned grid: `seq[i]` multiplies the increment of
/// the cell `[t − (i+1)ds, t − i·ds]`.
fn gamma_lag_weights(alpha: f64, ds: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    w.push(lower_incomplete(alpha + 1.0, ds) / ds);
    for i in 1..n {
        let t = (i as f64 + 0.5) * ds;
        w.push((-t).exp() * t.powf(alpha));
    }
    w
}

/// `∫ φ_β(t − u) μ(du)` over the node cells `[t − (i+½)ds, t − (i−½)ds]`.
fn node_weights(beta: f64, ds: f64, n: usize) -> Vec<f64> {
    let g = |x: f64| lower_incomplete(beta + 1.0, x);
    let mut v = Vec::with_capacity(n);
    v.push(g(0.5 * ds));
    let mut prev = g(0.5 * ds);
    for i in 1..n {
        let next = g((i as f64 + 0.5) * ds);
        v.push(next - prev);
        prev = next;
    }
    v
}

/// With `β = −α − 1`, `∫ φ_β(t−u) φ_α(u−s) du = k_α e^{−(t−s)}`, so the
/// integrated Gamma field collapses to an OU process. Both sides are
/// computed on the given increments at the grid's index points, which must
/// be cell edges.
pub fn gamma_ou_collapse_check(alpha: f64, increments: &[f64], grid: &SimGrid) -> Result<CollapseReport> {
    if !(alpha > -1.0 && alpha < 0.0) {
        return invalid(format!("α must lie in (−1, 0), got {alpha}"));
    }
    grid.validate()?;
    let n = grid.n_cells();
    if increments.len() != n {
        return invalid("increments do not match the grid");
    }
    let beta = -alpha - 1.0;
    let k_alpha = gamma_convolution_constant(alpha, beta)?;
    let ds = grid.ds;
    let s0 = grid.s_range[0];
    if ((grid.s_range[1] - s0) / ds - n as f64).abs() > 1e-6 {
        return invalid("the collapse check needs a range made of whole cells");
    }
    let wa = gamma_lag_weights(alpha, ds, n);
    let vb = node_weights(beta, ds, n + 1);
    // h = vb ⋆ wa, the weights of the integrated field
    let mut h = vec![0.0; n];
    for (i, v) in vb.iter().enumerate().take(n) {
        for (l, w) in wa.iter().enumerate().take(n - i) {
            h[i + l] += v * w;
        }
    }
    let ou: Vec<f64> = {
        let mut w = Vec::with_capacity(n);
        w.push(-(-ds).exp_m1() / ds);
        for i in 1..n {
            w.push((-(i as f64 + 0.5) * ds).exp());
        }
        w
    };
    let mut times = Vec::new();
    let mut integrated = Vec::new();
    let mut ou_path = Vec::new();
    for &t in &grid.u_points {
        let m = ((t - s0) / ds).round();
        if (m * ds + s0 - t).abs() > 1e-9 || m < 0.0 || m as usize > n {
            return invalid(format!("index point {t} is not a cell edge"));
        }
        let m = m as usize;
        // cell m − 1 − i has lag i
        let conv = |w: &[f64]| -> f64 { (0..m).map(|i| w[i] * increments[m - 1 - i]).sum() };
        times.push(t);
        integrated.push(conv(&h));
        ou_path.push(k_alpha * conv(&ou));
    }
    let num: f64 = integrated.iter().zip(&ou_path).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = ou_path.iter().map(|b| b * b).sum();
    let relative_error = if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    };
    Ok(CollapseReport {
        k_alpha,
        relative_error,
        times,
        integrated,
        ou: ou_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn beta_constants() {
        assert_relative_eq!(gamma_convolution_constant(0.0, 0.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_convolution_constant(-0.5, -0.5).unwrap(), PI, max_relative = 1e-12);
        assert_relative_eq!(gamma_convolution_constant(1.0, 2.0).unwrap(), 1.0 / 12.0, max_relative = 1e-13);
        assert!(gamma_convolution_constant(-1.0, 0.0).is_err());
    }

    #[test]
    fn ou_section_closed_form() {
        let mu = IntegratorMeasure::lebesgue(f64::NEG_INFINITY, f64::INFINITY);
        let t = 1.7;
        let s = -0.4;
        let v = mu_f_section(&KernelSpec::ou(), &mu, (0.0, t), s).unwrap();
        assert_relative_eq!(v, s.exp() * (1.0 - (-t).exp()), max_relative = 1e-12);
        assert_eq!(mu_f_section(&KernelSpec::zero(), &mu, (0.0, t), s).unwrap(), 0.0);
        let w = IntegratorMeasure::weighted(Expr::parse("1").unwrap(), -10.0, 10.0).unwrap();
        assert_relative_eq!(mu_f_section(&KernelSpec::ou(), &w, (0.0, t), s).unwrap(), v, max_relative = 1e-8);
    }

    #[test]
    fn singular_section_by_quadrature_matches_closed_form() {
        let k = KernelSpec::gamma(-0.5).unwrap();
        let lebesgue = IntegratorMeasure::lebesgue(-5.0, 5.0);
        let weighted = IntegratorMeasure::weighted(Expr::parse("1").unwrap(), -5.0, 5.0).unwrap();
        for s in [-1.0, 0.3, 0.99] {
            let a = mu_f_section(&k, &lebesgue, (0.0, 1.0), s).unwrap();
            let b = mu_f_section(&k, &weighted, (0.0, 1.0), s).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-7);
        }
    }

    #[test]
    fn zero_noise_collapses_exactly() {
        let g = SimGrid::new([-2.0, 1.0], 0.01, vec![0.0, 0.5, 1.0], 1e-3, 1).unwrap();
        let r = gamma_ou_collapse_check(-0.5, &vec![0.0; g.n_cells()], &g).unwrap();
        assert_eq!(r.relative_error, 0.0);
    }
}
