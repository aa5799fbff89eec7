//! Field-valued Lévy processes seen through finite projections: the
//! time-scaling of triplets, integrals of scalar functions against the
//! process, and the OU process driven by it.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{integrate_over_profile, KernelSpec, Profile};
use crate::levy_core::{ControlMeasure, LevyMeasure1D, LevyQuadruplet, MeasureND, Rect, Region, TripletND};
use crate::quad::{Estimate, QuadOptions};
use crate::sd_analysis::{default_intervals, DilationVerdict, MasterMeasureSpec, VolterraProjection, MAX_COORDS};
use crate::volterra_sim::{BasisLaw, FieldWeights, SimDiagnostics, SimGrid, StreamTag};

/// First error raised inside a quadrature integrand.
#[derive(Default)]
struct Failure(RefCell<Option<Error>>);

impl Failure {
    fn catch<T: Default>(&self, r: Result<T>) -> T {
        r.unwrap_or_else(|e| {
            self.0.borrow_mut().get_or_insert(e);
            T::default()
        })
    }

    fn finish<T>(&self, r: Result<T>) -> Result<T> {
        match self.0.borrow_mut().take() {
            Some(e) => Err(e),
            None => r,
        }
    }
}

/// Seed measures `ρ(s, ·)`, built once when they do not depend on `s`.
struct Seeds<'a> {
    q: &'a LevyQuadruplet,
    fixed: Option<LevyMeasure1D>,
}

impl<'a> Seeds<'a> {
    fn new(q: &'a LevyQuadruplet) -> Self {
        Self {
            q,
            fixed: q.rho.is_constant().then(|| q.rho_at(&[0.0])),
        }
    }

    fn with<R>(&self, s: f64, f: impl FnOnce(&LevyMeasure1D) -> R) -> R {
        match &self.fixed {
            Some(m) => f(m),
            None => f(&self.q.rho_at(&[s])),
        }
    }

    fn all_zero(&self) -> bool {
        self.fixed.as_ref().is_some_and(LevyMeasure1D::is_zero)
    }
}

fn outer_opts(opts: &QuadOptions) -> QuadOptions {
    QuadOptions {
        epsabs: opts.epsabs * 100.0,
        epsrel: opts.epsrel * 100.0,
        ..*opts
    }
}

/// The triplet `(Γ, B, ν)` of an ID field in Volterra form, `ν` being the
/// master measure of the kernel and basis.
#[derive(Debug, Clone)]
pub struct FieldTripletSpec {
    pub master: Arc<MasterMeasureSpec>,
}

impl FieldTripletSpec {
    pub fn volterra(q: LevyQuadruplet, kernel: KernelSpec) -> Result<Self> {
        q.validate()?;
        Ok(Self {
            master: Arc::new(MasterMeasureSpec::new(q, kernel)?),
        })
    }

    fn quadruplet(&self) -> &LevyQuadruplet {
        &self.master.quadruplet
    }

    fn kernel(&self) -> &KernelSpec {
        &self.master.kernel
    }

    pub fn has_jumps(&self) -> bool {
        !Seeds::new(self.quadruplet()).all_zero()
    }

    /// `Γ(u) = ∫ (γ(s) f(u,s) + ∫(τ(x f(u,s)) − f(u,s) τ(x)) ρ(s,dx)) c(ds)`.
    pub fn gamma_at(&self, u: f64) -> Result<f64> {
        let q = self.quadruplet();
        let seeds = Seeds::new(q);
        let p = Profile::section(self.kernel(), u);
        let fail = Failure::default();
        let g = |t: f64, s: f64| -> f64 {
            let v = p.value(t);
            if v == 0.0 {
                return 0.0;
            }
            let corr = fail.catch(seeds.with(s, |m| m.tau_correction(v)));
            q.gamma.eval(&[s]) * v + corr
        };
        let r = integrate_over_profile(&p, &q.control, &g, &QuadOptions::tight());
        Ok(fail.finish(r)?.value)
    }

    /// `B(u, v) = ∫ b(s)² f(u,s) f(v,s) c(ds)`.
    pub fn cov(&self, u: f64, v: f64) -> Result<f64> {
        let q = self.quadruplet();
        let k = self.kernel();
        let p = Profile::combination(k, &[u, v], &[1.0, 1.0]);
        let g = |t: f64, s: f64| -> f64 {
            let b = q.b.eval(&[s]);
            if b == 0.0 {
                return 0.0;
            }
            b * b * k.eval_lag(u, p.anchor, t) * k.eval_lag(v, p.anchor, t)
        };
        Ok(integrate_over_profile(&p, &q.control, &g, &QuadOptions::tight())?.value)
    }

    /// `ν_û`, or `None` when the basis has no jumps.
    pub fn nu(&self, u_hat: &[f64]) -> Option<Arc<dyn MeasureND>> {
        self.has_jumps().then(|| {
            Arc::new(VolterraProjection {
                spec: self.master.clone(),
                coords: u_hat.to_vec(),
            }) as Arc<dyn MeasureND>
        })
    }

    /// `(Γ_û, B_û, ν_û)`.
    pub fn triplet(&self, u_hat: &[f64]) -> Result<TripletND> {
        check_u_hat(u_hat)?;
        let gamma = u_hat.iter().map(|u| self.gamma_at(*u)).collect::<Result<Vec<_>>>()?;
        let n = u_hat.len();
        let mut b = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let c = self.cov(u_hat[i], u_hat[j])?;
                b[i][j] = c;
                b[j][i] = c;
            }
        }
        TripletND::new(gamma, b, self.nu(u_hat))
    }
}

fn check_u_hat(u_hat: &[f64]) -> Result<()> {
    if u_hat.is_empty() || u_hat.len() > MAX_COORDS {
        return invalid(format!(
            "a projection needs between 1 and {MAX_COORDS} index points, got {}",
            u_hat.len()
        ));
    }
    if u_hat.iter().any(|u| !u.is_finite()) {
        return invalid("index points must be finite");
    }
    Ok(())
}

/// Finitely many index points with pairing weights `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteProjection {
    pub u_hat: Vec<f64>,
    pub y: Vec<f64>,
}

impl FiniteProjection {
    pub fn new(u_hat: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_u_hat(&u_hat)?;
        if y.len() != u_hat.len() {
            return invalid("pairing weights and index points differ in length");
        }
        Ok(Self { u_hat, y })
    }

    /// `⟨x, y⟩`.
    pub fn pair(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.y).map(|(a, b)| a * b).sum()
    }
}

/// Triplet of `L^X_û(t)`: the field's triplet scaled by `|t|`.
pub fn process_triplet_at(spec: &FieldTripletSpec, t: f64, u_hat: &[f64]) -> Result<TripletND> {
    if !t.is_finite() {
        return invalid(format!("time must be finite, got {t}"));
    }
    Ok(spec.triplet(u_hat)?.scaled(t))
}

/// `ν^I(A) = ∫ ν({x : f(s)x ∈ A}) ds`.
#[derive(Debug, Clone)]
pub struct IntegratedMeasure {
    pub base: Arc<dyn MeasureND>,
    pub f: Profile,
}

impl MeasureND for IntegratedMeasure {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn integrate(&self, g: &dyn Fn(&[f64]) -> Complex64, opts: &QuadOptions) -> Result<Complex64> {
        let fail = Failure::default();
        let h = |t: f64, _s: f64| -> Complex64 {
            let r = self.f.value(t);
            if r == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let gr = |x: &[f64]| {
                let y: Vec<f64> = x.iter().map(|v| v * r).collect();
                g(&y)
            };
            fail.catch(self.base.integrate(&gr, opts))
        };
        let r = integrate_over_profile(&self.f, &ControlMeasure::lebesgue_line(), &h, &outer_opts(opts));
        Ok(fail.finish(r)?.value)
    }

    fn region_mass(&self, region: &Region) -> Result<f64> {
        let fail = Failure::default();
        let h = |t: f64, _s: f64| -> f64 {
            let r = self.f.value(t);
            if r == 0.0 {
                return 0.0;
            }
            fail.catch(self.base.region_mass(&region.scaled(1.0 / r)))
        };
        let opts = outer_opts(&QuadOptions::tight());
        let r = integrate_over_profile(&self.f, &ControlMeasure::lebesgue_line(), &h, &opts);
        Ok(fail.finish(r)?.value.max(0.0))
    }
}

/// `∫ (1 ∧ a²x²) m(dx)`.
fn truncated_scaled_moment(m: &LevyMeasure1D, a: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let c = 1.0 / a;
    Ok(a * a * m.abs_moment(2.0, 0.0, c)? + m.abs_moment(0.0, c, f64::INFINITY)?)
}

fn integrability(r: Result<Estimate<f64>>, display: &str) -> Result<f64> {
    match r {
        Ok(e) if e.value.is_finite() => Ok(e.value),
        Ok(_) | Err(Error::QuadratureDivergence(_)) | Err(Error::QuadratureBudget { .. }) => {
            Err(Error::IntegrabilityFailure(format!("{display} diverges")))
        }
        Err(Error::QuadratureInconclusive(m)) => Err(Error::IntegrabilityFailure(format!(
            "{display} could not be shown finite: {m}"
        ))),
        Err(e) => Err(e),
    }
}

/// Triplet of `∫ f(s) dL^X_û(s)`: drift `∫(f(s)Γ + ∫(τ(f(s)x) − f(s)τ(x))ν(dx))ds`,
/// Gaussian part `B ∫f²` and jump measure [`IntegratedMeasure`].
pub fn integral_triplet(spec: &FieldTripletSpec, f: &Profile, u_hat: &[f64]) -> Result<TripletND> {
    let base = spec.triplet(u_hat)?;
    let d = u_hat.len();
    if f.is_zero() {
        return Ok(TripletND::zero(d));
    }
    let line = ControlMeasure::lebesgue_line();
    let opts = QuadOptions::with_tol(1e-12, 1e-10);
    let inner = QuadOptions::tight();

    let gaussian = base.b.iter().flatten().any(|v| *v != 0.0);
    let f2 = if gaussian {
        let r = integrate_over_profile(f, &line, &|t, _| f.value(t).powi(2), &opts);
        integrability(r, "∫ f(s)² ds")?
    } else {
        0.0
    };

    let q = spec.quadruplet();
    let k = spec.kernel();
    let seeds = Seeds::new(q);
    let jumps = base.has_jumps();
    let p_hat = Profile::combination(k, u_hat, &vec![1.0; d]);

    if jumps {
        // ∫∫ (1 ∧ |f(s)x|²) ν_û(dx) ds, with ν_û resolved through the seed
        let fail = Failure::default();
        let h = |t: f64, _s: f64| -> f64 {
            let r = f.value(t);
            if r == 0.0 {
                return 0.0;
            }
            let g = |tt: f64, s: f64| -> f64 {
                let norm = u_hat
                    .iter()
                    .map(|u| k.eval_lag(*u, p_hat.anchor, tt).powi(2))
                    .sum::<f64>()
                    .sqrt();
                fail.catch(seeds.with(s, |m| truncated_scaled_moment(m, r.abs() * norm)))
            };
            let e = integrate_over_profile(&p_hat, &q.control, &g, &inner);
            fail.catch(e.map(|e| e.value))
        };
        let r = integrate_over_profile(f, &line, &h, &opts);
        integrability(fail.finish(r), "∫∫ (1 ∧ |f(s)x|²) ν(dx) ds")?;
    }

    let mut gamma = Vec::with_capacity(d);
    for (j, u) in u_hat.iter().enumerate() {
        let p = Profile::section(k, *u);
        let fail = Failure::default();
        // ∫(τ(r x_j) − r τ(x_j)) ν_û(dx) = ∫ (J_s(r f) − r J_s(f)) c(ds)
        let corr = |r: f64| -> f64 {
            if !jumps || r == 0.0 {
                return 0.0;
            }
            let g = |tt: f64, s: f64| -> f64 {
                let v = p.value(tt);
                if v == 0.0 {
                    return 0.0;
                }
                let c = seeds.with(s, |m| -> Result<f64> { Ok(m.tau_correction(r * v)? - r * m.tau_correction(v)?) });
                fail.catch(c)
            };
            let e = integrate_over_profile(&p, &q.control, &g, &inner);
            fail.catch(e.map(|e| e.value))
        };
        // re: the drift integrand, im: its modulus
        let h = |t: f64, _s: f64| -> Complex64 {
            let r = f.value(t);
            if r == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let v = r * base.gamma_vec[j] + corr(r);
            Complex64::new(v, v.abs())
        };
        let e = fail.finish(integrate_over_profile(f, &line, &h, &opts));
        let modulus = e.clone().map(|e| Estimate {
            value: e.value.im,
            error: e.error,
        });
        integrability(modulus, "∫ |f(s)Γ + ∫(τ(f(s)x) − f(s)τ(x)) ν(dx)| ds")?;
        gamma.push(e?.value.re);
    }

    let b = base
        .b
        .iter()
        .map(|row| row.iter().map(|v| v * f2).collect())
        .collect();
    let nu = base.nu.clone().map(|nu| {
        Arc::new(IntegratedMeasure {
            base: nu,
            f: f.clone(),
        }) as Arc<dyn MeasureND>
    });
    TripletND::new(gamma, b, nu)
}

/// Largest discrepancy between two projections of the same jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub max_abs: f64,
    pub max_rel: f64,
}

/// Compares `ν^I_û(R)` with `ν^I_v̂(R × ℝ^{v̂∖û})` on each region.
pub fn projection_consistency_check(
    spec: &FieldTripletSpec,
    f: &Profile,
    u_hat: &[f64],
    v_hat: &[f64],
    regions: &[Region],
) -> Result<ConsistencyReport> {
    check_u_hat(u_hat)?;
    check_u_hat(v_hat)?;
    let mut positions = Vec::with_capacity(u_hat.len());
    for u in u_hat {
        match v_hat.iter().position(|v| v == u) {
            Some(p) => positions.push(p),
            None => return invalid(format!("index point {u} is missing from the larger projection")),
        }
    }
    let mut report = ConsistencyReport { max_abs: 0.0, max_rel: 0.0 };
    let (Some(small), Some(large)) = (spec.nu(u_hat), spec.nu(v_hat)) else {
        return Ok(report);
    };
    let small = IntegratedMeasure { base: small, f: f.clone() };
    let large = IntegratedMeasure { base: large, f: f.clone() };
    let pairs: Vec<(f64, f64)> = regions
        .par_iter()
        .map(|r| {
            r.validate()?;
            if r.dim() != u_hat.len() {
                return invalid("region dimension differs from the smaller projection");
            }
            Ok((small.region_mass(r)?, large.region_mass(&r.embed(v_hat.len(), &positions))?))
        })
        .collect::<Result<_>>()?;
    for (a, b) in pairs {
        let d = (a - b).abs();
        report.max_abs = report.max_abs.max(d);
        let scale = a.abs().max(b.abs());
        if scale > 0.0 {
            report.max_rel = report.max_rel.max(d / scale);
        }
    }
    Ok(report)
}

/// `m(qA) ≤ m(A)` for a measure on `ℝ^d`, regions away from the origin.
pub fn dilation_check_measure(
    m: &dyn MeasureND,
    q_grid: &[f64],
    regions: &[Region],
) -> Result<DilationVerdict<Region>> {
    for q in q_grid {
        if !(*q > 1.0) {
            return invalid(format!("dilation factors must exceed 1, got {q}"));
        }
    }
    let base: Vec<f64> = regions.iter().map(|r| m.region_mass(r)).collect::<Result<_>>()?;
    for q in q_grid {
        for (r, b) in regions.iter().zip(&base) {
            let scaled = m.region_mass(&r.scaled(*q))?;
            if scaled > b + 1e-9 {
                return Ok(DilationVerdict::Fail {
                    q: *q,
                    set: r.clone(),
                    scaled_mass: scaled,
                    mass: *b,
                });
            }
        }
    }
    Ok(DilationVerdict::Pass)
}

/// `∫_{|π_û(x)|>1} log|π_û(x)| ν(dx)` by quadrature on the master measure.
pub fn projected_log_moment(spec: &FieldTripletSpec, u_hat: &[f64]) -> Result<f64> {
    check_u_hat(u_hat)?;
    if !spec.has_jumps() {
        return Ok(0.0);
    }
    let q = spec.quadruplet();
    let k = spec.kernel();
    let seeds = Seeds::new(q);
    let p = Profile::combination(k, u_hat, &vec![1.0; u_hat.len()]);
    let fail = Failure::default();
    let g = |t: f64, s: f64| -> f64 {
        let a = u_hat
            .iter()
            .map(|u| k.eval_lag(*u, p.anchor, t).powi(2))
            .sum::<f64>()
            .sqrt();
        if a == 0.0 {
            return 0.0;
        }
        let w = |r: f64| (r * a).ln();
        fail.catch(seeds.with(s, |m| m.radial_quadrature(&w, 1.0 / a, f64::INFINITY, &QuadOptions::default())))
    };
    let r = integrate_over_profile(&p, &q.control, &g, &QuadOptions::default());
    match fail.finish(r) {
        Ok(e) if e.value.is_finite() => Ok(e.value),
        Ok(_) | Err(Error::QuadratureDivergence(_)) | Err(Error::QuadratureBudget { .. }) => {
            Err(Error::LogMomentFailure(format!("the log moment on û = {u_hat:?} is infinite")))
        }
        Err(Error::QuadratureInconclusive(m)) => Err(Error::LogMomentFailure(format!(
            "the log moment on û = {u_hat:?} could not be shown finite: {m}"
        ))),
        Err(e) => Err(e),
    }
}

/// `e^{−s} 1_{s≥0}`.
pub fn ou_profile() -> Profile {
    Profile::from_fn(|s| (-s).exp(), 0.0, f64::INFINITY)
}

/// `e^{−(t−s)} 1_{s≤t}`, the integrand of the OU process at time `t`.
pub fn ou_profile_at(t: f64) -> Profile {
    Profile::from_fn(move |s| (s - t).exp(), f64::NEG_INFINITY, t)
}

/// Integrand of `Ỹ(1) − Ỹ(0) + ∫₀¹ Ỹ(r) dr` against `L^X`, term by term.
pub fn langevin_recovery_profile() -> Profile {
    Profile::from_fn(
        |s| {
            let y1 = (s - 1.0).exp();
            let y0 = if s <= 0.0 { s.exp() } else { 0.0 };
            // ∫_{max(s,0)}^1 e^{−(r−s)} dr
            let mean = (s - s.max(0.0)).exp() - (s - 1.0).exp();
            y1 - y0 + mean
        },
        f64::NEG_INFINITY,
        1.0,
    )
    .with_breaks(vec![0.0])
}

/// Outcome of the OU marginal check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuMarginalReport {
    pub log_moment: f64,
    /// `max |C{θ‡Y(t)} − C{θ‡∫₀^∞ e^{−s} dL^X(s)}|` over θ and t.
    pub stationarity: f64,
    /// `max |C{θ‡L^X(1)} − C{θ‡X_û}|` with `L^X(1)` recovered from `Ỹ`.
    pub recovery: f64,
    pub dilation: DilationVerdict<Region>,
}

impl OuMarginalReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.stationarity.max(self.recovery)
    }
}

/// Regions `[a, 2a]` and their mirrors along each coordinate axis of `ℝ^d`.
pub fn axis_regions(d: usize, per_sign: usize) -> Result<Vec<Region>> {
    let mut out = Vec::new();
    for j in 0..d {
        for (a, b) in default_intervals(per_sign) {
            let mut bounds = vec![[f64::NEG_INFINITY, f64::INFINITY]; d];
            bounds[j] = [a, b];
            out.push(Region::single(Rect::new(bounds))?);
        }
    }
    Ok(out)
}

/// Stationarity of the OU process `Y(t) = ∫_{−∞}^t e^{−(t−s)} dL^X(s)`,
/// recovery of `L^X` from it, and selfdecomposability of `Y`'s jump measure.
pub fn ou_field_marginal_check(
    spec: &FieldTripletSpec,
    u_hat: &[f64],
    theta_grid: &[Vec<f64>],
    t_grid: &[f64],
    q_grid: &[f64],
) -> Result<OuMarginalReport> {
    let log_moment = projected_log_moment(spec, u_hat)?;
    for th in theta_grid {
        if th.len() != u_hat.len() {
            return invalid("θ and û differ in length");
        }
    }
    let y = integral_triplet(spec, &ou_profile(), u_hat)?;
    let shifted = t_grid
        .iter()
        .map(|t| integral_triplet(spec, &ou_profile_at(*t), u_hat))
        .collect::<Result<Vec<_>>>()?;
    let recovered = integral_triplet(spec, &langevin_recovery_profile(), u_hat)?;
    let field = spec.triplet(u_hat)?;

    let per_theta: Vec<(f64, f64)> = theta_grid
        .par_iter()
        .map(|th| -> Result<(f64, f64)> {
            let c = y.cumulant(th)?;
            let mut stat: f64 = 0.0;
            for s in &shifted {
                stat = stat.max((s.cumulant(th)? - c).norm());
            }
            let rec = (recovered.cumulant(th)? - field.cumulant(th)?).norm();
            Ok((stat, rec))
        })
        .collect::<Result<_>>()?;
    let stationarity = per_theta.iter().map(|p| p.0).fold(0.0, f64::max);
    let recovery = per_theta.iter().map(|p| p.1).fold(0.0, f64::max);

    let dilation = match &y.nu {
        Some(nu) => dilation_check_measure(nu.as_ref(), q_grid, &axis_regions(u_hat.len(), 4)?)?,
        None => DilationVerdict::Pass,
    };
    Ok(OuMarginalReport {
        log_moment,
        stationarity,
        recovery,
        dilation,
    })
}

/// Simulated paths of `L^X_û` on a time grid; `values[r][k]` is the value
/// of replica `r` at `t_grid[k]`, with `L^X(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessPaths {
    pub u_points: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub values: Vec<Vec<Vec<f64>>>,
    pub diagnostics: SimDiagnostics,
}

impl ProcessPaths {
    /// `⟨L(t_k) − L(t_l), y⟩` over the replicas.
    pub fn pairing_increments(&self, y: &FiniteProjection, k: usize, l: usize) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| {
                let d: Vec<f64> = v[k].iter().zip(&v[l]).map(|(a, b)| a - b).collect();
                y.pair(&d)
            })
            .collect()
    }
}

/// Simulates `L^X_û` at the times of `t_grid` (nondecreasing, nonnegative).
///
/// The increment over `[t_{k−1}, t_k]` has the field's triplet scaled by
/// `t_k − t_{k−1}`, which is the law of the Volterra field driven by the
/// basis with control `(t_k − t_{k−1}) c`; it is drawn on the grid of
/// `grid`, whose index points are `û`.
pub fn simulate_field_process(
    spec: &FieldTripletSpec,
    grid: &SimGrid,
    t_grid: &[f64],
    replicas: u64,
) -> Result<ProcessPaths> {
    check_u_hat(&grid.u_points)?;
    if t_grid.is_empty() {
        return invalid("empty time grid");
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] >= w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return invalid("time grid must be finite, nonnegative and nondecreasing");
    }
    let q = spec.quadruplet();
    let weights = FieldWeights::new(spec.kernel(), grid)?;
    let steps: Vec<f64> = std::iter::once(t_grid[0])
        .chain(t_grid.windows(2).map(|w| w[1] - w[0]))
        .collect();
    let mut laws: BTreeMap<u64, BasisLaw> = BTreeMap::new();
    let mut diagnostics = SimDiagnostics::default();
    for dt in &steps {
        if *dt > 0.0 && !laws.contains_key(&dt.to_bits()) {
            let law = BasisLaw::new(&q.scaled_control(*dt), grid)?;
            diagnostics.cut = law.diagnostics.cut;
            diagnostics.small_jump_variance = diagnostics.small_jump_variance.max(law.diagnostics.small_jump_variance);
            diagnostics.max_jumps_per_cell = diagnostics.max_jumps_per_cell.max(law.diagnostics.max_jumps_per_cell);
            laws.insert(dt.to_bits(), law);
        }
    }
    let n_steps = steps.len() as u64;
    let d = grid.u_points.len();
    let values: Vec<Vec<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut acc = vec![0.0; d];
            steps
                .iter()
                .enumerate()
                .map(|(k, dt)| {
                    if let Some(law) = laws.get(&dt.to_bits()) {
                        let inc = law.sample_tagged(grid.seed, StreamTag::FieldProcess, r * n_steps + k as u64);
                        for (a, x) in acc.iter_mut().zip(weights.apply(&inc)) {
                            *a += x;
                        }
                    }
                    acc.clone()
                })
                .collect()
        })
        .collect();
    Ok(ProcessPaths {
        u_points: grid.u_points.clone(),
        t_grid: t_grid.to_vec(),
        values,
        diagnostics,
    })
}

/// `Var⟨L^X_û(1), y⟩ = ∫ (b(s)² + ∫x²ρ(s,dx)) (Σ_j y_j f(u_j,s))² c(ds)`.
pub fn unit_pairing_variance(spec: &FieldTripletSpec, y: &FiniteProjection) -> Result<f64> {
    let q = spec.quadruplet();
    let seeds = Seeds::new(q);
    let p = Profile::combination(spec.kernel(), &y.u_hat, &y.y);
    let fail = Failure::default();
    let g = |t: f64, s: f64| -> f64 {
        let v = p.value(t);
        if v == 0.0 {
            return 0.0;
        }
        let b = q.b.eval(&[s]);
        let m2 = fail.catch(seeds.with(s, |m| m.abs_moment(2.0, 0.0, f64::INFINITY)));
        (b * b + m2) * v * v
    };
    let r = integrate_over_profile(&p, &q.control, &g, &QuadOptions::tight());
    Ok(fail.finish(r)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wiener_ou() -> FieldTripletSpec {
        FieldTripletSpec::volterra(LevyQuadruplet::gaussian(1.0, 0.0), KernelSpec::ou()).unwrap()
    }

    #[test]
    fn time_scaling() {
        let spec = wiener_ou();
        let t = process_triplet_at(&spec, 2.5, &[0.0]).unwrap();
        assert_relative_eq!(t.b[0][0], 1.25, max_relative = 1e-10);
        let z = process_triplet_at(&spec, 0.0, &[0.0, 1.0]).unwrap();
        assert_eq!(z.cumulant(&[1.0, 2.0]).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_integral_triplet() {
        let spec = wiener_ou();
        let t = integral_triplet(&spec, &ou_profile(), &[0.0, 1.0]).unwrap();
        let b = spec.triplet(&[0.0, 1.0]).unwrap().b;
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(t.b[i][j], b[i][j] / 2.0, max_relative = 1e-9);
            }
        }
        let z = integral_triplet(&spec, &Profile::zero(), &[0.0]).unwrap();
        assert_eq!(z.b[0][0], 0.0);
    }

    #[test]
    fn recovery_profile_is_unit_indicator() {
        let p = langevin_recovery_profile();
        for s in [-5.0, -0.5, 0.0, 0.25, 0.9, 1.0] {
            let want = if s > 0.0 { 1.0 } else { 0.0 };
            assert!((p.value(s) - want).abs() < 1e-12, "s = {s}: {}", p.value(s));
        }
    }

    #[test]
    fn non_integrable_function_is_rejected() {
        let spec = wiener_ou();
        let f = Profile::from_fn(|s| 1.0 / s.sqrt(), 0.0, 1.0).with_singular(vec![0.0]);
        assert!(matches!(
            integral_triplet(&spec, &f, &[0.0]),
            Err(Error::IntegrabilityFailure(_))
        ));
    }
}
