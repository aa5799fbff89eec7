//! Master Lévy measures of Volterra fields on cylinder sets, dilation tests
//! for selfdecomposability and Urbanik class depth.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{integrate_over_profile, ContinuityClass, KernelSpec, Profile};
use crate::levy_core::triplet::MeasureND;
use crate::levy_core::{LevyMeasure1D, LevyQuadruplet, Rect, Region};
use crate::quad::{adaptive, QuadOptions};

/// Maximal number of index points of a cylinder set.
pub const MAX_COORDS: usize = 8;

/// The pushforward `ν = η ∘ g⁻¹` of `η(dx ds) = ρ(s,dx) c(ds)` under
/// `g(x, s) = x · f(·, s)`.
#[derive(Debug, Clone)]
pub struct MasterMeasureSpec {
    pub quadruplet: LevyQuadruplet,
    pub kernel: KernelSpec,
    pub continuity_class: ContinuityClass,
}

impl MasterMeasureSpec {
    pub fn new(quadruplet: LevyQuadruplet, kernel: KernelSpec) -> Result<Self> {
        if quadruplet.control.dim() != 1 {
            return invalid("Volterra fields need a one-dimensional control measure");
        }
        kernel.validate()?;
        Ok(Self {
            continuity_class: kernel.continuity_class(),
            quadruplet,
            kernel,
        })
    }
}

/// `π_û⁻¹(region)` for finitely many index points `û`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderSet {
    pub coords: Vec<f64>,
    pub region: Region,
}

impl CylinderSet {
    pub fn new(coords: Vec<f64>, region: Region) -> Result<Self> {
        let c = Self { coords, region };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.is_empty() || self.coords.len() > MAX_COORDS {
            return invalid(format!(
                "a cylinder set needs between 1 and {MAX_COORDS} index points, got {}",
                self.coords.len()
            ));
        }
        self.region.validate()?;
        if self.region.dim() != self.coords.len() {
            return invalid(format!(
                "region has dimension {} but there are {} index points",
                self.region.dim(),
                self.coords.len()
            ));
        }
        Ok(())
    }

    /// `qA`.
    pub fn scaled(&self, q: f64) -> Self {
        Self {
            coords: self.coords.clone(),
            region: self.region.scaled(q),
        }
    }

    /// The same set described over a larger list of index points; the
    /// extra coordinates are unconstrained.
    pub fn lifted(&self, coords: &[f64]) -> Result<Self> {
        let mut positions = Vec::with_capacity(self.coords.len());
        for u in &self.coords {
            match coords.iter().position(|v| v == u) {
                Some(p) => positions.push(p),
                None => return invalid(format!("index point {u} is missing from the larger list")),
            }
        }
        Self::new(coords.to_vec(), self.region.embed(coords.len(), &positions))
    }
}

/// Merged union of the preimages `{x : x·v ∈ box}` over the boxes of a region.
fn preimage_intervals(region: &Region, v: &[f64]) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = region.boxes.iter().filter_map(|b| b.line_preimage(v)).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn profile_of(spec: &MasterMeasureSpec, coords: &[f64]) -> Profile {
    Profile::combination(&spec.kernel, coords, &vec![1.0; coords.len()])
}

fn values_at(spec: &MasterMeasureSpec, coords: &[f64], anchor: f64, t: f64) -> Vec<f64> {
    coords.iter().map(|u| spec.kernel.eval_lag(*u, anchor, t)).collect()
}

/// `ν(π_û⁻¹ R) = ∫_S ρ(s, {x : x f(û,s) ∈ R}) c(ds)`, the inner set being
/// resolved exactly as a union of intervals.
pub fn master_measure_eval(spec: &MasterMeasureSpec, a: &CylinderSet) -> Result<f64> {
    master_measure_eval_with(spec, a, &QuadOptions::tight())
}

pub fn master_measure_eval_with(spec: &MasterMeasureSpec, a: &CylinderSet, opts: &QuadOptions) -> Result<f64> {
    a.validate()?;
    let q = &spec.quadruplet;
    let p = profile_of(spec, &a.coords);
    if p.is_zero() {
        return Ok(0.0);
    }
    let seed = q.rho.is_constant().then(|| q.rho_at(&[0.0]));
    if seed.as_ref().is_some_and(LevyMeasure1D::is_zero) {
        return Ok(0.0);
    }
    let failure = std::cell::RefCell::new(None);
    let inner = |t: f64, s: f64| -> f64 {
        let v = values_at(spec, &a.coords, p.anchor, t);
        if v.iter().all(|x| *x == 0.0) {
            return 0.0;
        }
        let iv = preimage_intervals(&a.region, &v);
        if iv.is_empty() {
            return 0.0;
        }
        let owned;
        let m = match &seed {
            Some(m) => m,
            None => {
                owned = q.rho_at(&[s]);
                &owned
            }
        };
        let mut total = 0.0;
        for (lo, hi) in iv {
            match m.mass(lo, hi) {
                Ok(x) => total += x,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                }
            }
        }
        total
    };
    let r = integrate_over_profile(&p, &q.control, &inner, opts);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let v = r?.value;
    if !v.is_finite() {
        return Err(Error::QuadratureDivergence(format!(
            "master measure of {:?} is not finite",
            a.region.boxes
        )));
    }
    Ok(v.max(0.0))
}

/// The projection `ν_û` of a master measure, usable as the jump part of a
/// finite-dimensional triplet.
#[derive(Debug, Clone)]
pub struct VolterraProjection {
    pub spec: Arc<MasterMeasureSpec>,
    pub coords: Vec<f64>,
}

impl MeasureND for VolterraProjection {
    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn integrate(&self, g: &dyn Fn(&[f64]) -> Complex64, opts: &QuadOptions) -> Result<Complex64> {
        let spec = &*self.spec;
        let q = &spec.quadruplet;
        let p = profile_of(spec, &self.coords);
        if p.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let failure = std::cell::RefCell::new(None);
        let inner = |t: f64, s: f64| -> Complex64 {
            let v = values_at(spec, &self.coords, p.anchor, t);
            if v.iter().all(|x| *x == 0.0) {
                return Complex64::new(0.0, 0.0);
            }
            let m = q.rho_at(&[s]);
            let h = |x: f64| {
                let y: Vec<f64> = v.iter().map(|c| c * x).collect();
                g(&y)
            };
            match m.integrate_complex(&h, opts) {
                Ok(z) => z,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        };
        let r = integrate_over_profile(&p, &q.control, &inner, opts);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(r?.value)
    }

    fn region_mass(&self, region: &Region) -> Result<f64> {
        master_measure_eval(
            &self.spec,
            &CylinderSet {
                coords: self.coords.clone(),
                region: region.clone(),
            },
        )
    }
}

/// Outcome of a dilation test; the witness is the first violating pair in
/// grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum DilationVerdict<A> {
    Pass,
    Fail {
        q: f64,
        set: A,
        scaled_mass: f64,
        mass: f64,
    },
}

impl<A> DilationVerdict<A> {
    pub fn passed(&self) -> bool {
        matches!(self, DilationVerdict::Pass)
    }
}

pub const DEFAULT_Q_GRID: [f64; 5] = [1.1, 1.5, 2.0, 5.0, 10.0];

/// `[a_k, 2a_k]` with `a_k` log-spaced from 0.1 to 100, followed by their
/// mirror images on the negative half-line.
pub fn default_intervals(per_sign: usize) -> Vec<(f64, f64)> {
    let n = per_sign.max(1);
    let pos: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = if n == 1 { 0.1 } else { 0.1 * 1000f64.powf(k as f64 / (n - 1) as f64) };
            (a, 2.0 * a)
        })
        .collect();
    let neg: Vec<(f64, f64)> = pos.iter().map(|(a, b)| (-b, -a)).collect();
    pos.into_iter().chain(neg).collect()
}

fn check_intervals(
    mass: &dyn Fn(f64, f64) -> Result<f64>,
    q_grid: &[f64],
    intervals: &[(f64, f64)],
    tol: f64,
) -> Result<DilationVerdict<(f64, f64)>> {
    for q in q_grid {
        if !(*q > 1.0) {
            return invalid(format!("dilation factors must exceed 1, got {q}"));
        }
    }
    for (a, b) in intervals {
        if !(a <= b) || (*a <= 0.0 && *b >= 0.0) {
            return invalid(format!("test interval [{a}, {b}] must stay away from 0"));
        }
    }
    for q in q_grid {
        for (a, b) in intervals {
            let base = mass(*a, *b)?;
            let scaled = mass(q * a, q * b)?;
            if scaled > base + tol {
                return Ok(DilationVerdict::Fail {
                    q: *q,
                    set: (*a, *b),
                    scaled_mass: scaled,
                    mass: base,
                });
            }
        }
    }
    Ok(DilationVerdict::Pass)
}

/// `m(qA) ≤ m(A)` over the given factors and intervals.
pub fn dilation_check_1d(
    m: &LevyMeasure1D,
    q_grid: &[f64],
    intervals: &[(f64, f64)],
) -> Result<DilationVerdict<(f64, f64)>> {
    check_intervals(&|a, b| m.mass(a, b), q_grid, intervals, 1e-10)
}

/// `ν(qA) ≤ ν(A)` on the given cylinder sets.
pub fn dilation_check_field(
    spec: &MasterMeasureSpec,
    q_grid: &[f64],
    sets: &[CylinderSet],
) -> Result<DilationVerdict<CylinderSet>> {
    use rayon::prelude::*;
    for q in q_grid {
        if !(*q > 1.0) {
            return invalid(format!("dilation factors must exceed 1, got {q}"));
        }
    }
    let base: Vec<f64> = sets
        .par_iter()
        .map(|a| master_measure_eval(spec, a))
        .collect::<Result<_>>()?;
    for q in q_grid {
        let scaled: Vec<f64> = sets
            .par_iter()
            .map(|a| master_measure_eval(spec, &a.scaled(*q)))
            .collect::<Result<_>>()?;
        for (i, a) in sets.iter().enumerate() {
            if scaled[i] > base[i] + 1e-9 {
                return Ok(DilationVerdict::Fail {
                    q: *q,
                    set: a.clone(),
                    scaled_mass: scaled[i],
                    mass: base[i],
                });
            }
        }
    }
    Ok(DilationVerdict::Pass)
}

/// Cylinder sets for a field test: the intervals of [`default_intervals`]
/// at each index point, and for consecutive pairs `(u_i, u_{i+1})` the slabs
/// `[−a/4, a/4] × ±[a, 2a]` which isolate paths started between the two.
pub fn default_cylinders(us: &[f64], per_sign: usize) -> Result<Vec<CylinderSet>> {
    cylinders_from_intervals(us, &default_intervals(per_sign))
}

/// As [`default_cylinders`] for given intervals `[a, b]`; the slabs have
/// half-width `min(|a|, |b|)/4`.
pub fn cylinders_from_intervals(us: &[f64], intervals: &[(f64, f64)]) -> Result<Vec<CylinderSet>> {
    let mut out = Vec::new();
    for u in us {
        for (a, b) in intervals {
            out.push(CylinderSet::new(vec![*u], Region::single(Rect::interval(*a, *b))?)?);
        }
    }
    for w in us.windows(2) {
        for (a, b) in intervals {
            let d = a.abs().min(b.abs()) / 4.0;
            let r = Rect::new(vec![[-d, d], [*a, *b]]);
            out.push(CylinderSet::new(vec![w[0], w[1]], Region::single(r)?)?);
        }
    }
    Ok(out)
}

/// A Lévy density as a plain function.
#[derive(Clone)]
pub struct DensityFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl DensityFn {
    pub fn of(m: &LevyMeasure1D) -> Result<Self> {
        if !m.atoms.iter().all(|a| a.mass == 0.0) {
            return invalid("Urbanik depth needs an absolutely continuous Lévy measure");
        }
        let m = m.clone();
        Ok(Self(Arc::new(move |x| m.density(x))))
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }

    /// Density of the remainder `V^{(q)}`: `u(x) − q u(qx)`.
    pub fn residual(&self, q: f64) -> Self {
        let f = self.0.clone();
        Self(Arc::new(move |x| f(x) - q * f(q * x)))
    }

    fn mass(&self, a: f64, b: f64) -> Result<f64> {
        let f = |x: f64| self.eval(x);
        Ok(adaptive(&f, a, b, &QuadOptions::tight())?.value)
    }
}

fn residual_grid() -> Vec<f64> {
    let n = 400;
    let pos: Vec<f64> = (0..n).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / (n - 1) as f64)).collect();
    pos.iter().map(|x| -x).chain(pos.iter().copied()).collect()
}

/// Outcome of one stage of the Urbanik recursion.
fn class_stage(d: &DensityFn, q_grid: &[f64], intervals: &[(f64, f64)]) -> Result<bool> {
    for x in residual_grid() {
        let v = d.eval(x);
        if v < -1e-12 * (1.0 + v.abs()) {
            return Ok(false);
        }
    }
    Ok(check_intervals(&|a, b| d.mass(a, b), q_grid, intervals, 1e-10)?.passed())
}

/// Largest `k ≤ max_m` such that the measure and all of its iterated
/// remainders up to order `k` pass the dilation test; `−1` when the measure
/// itself is not selfdecomposable.
pub fn urbanik_depth_1d(m: &LevyMeasure1D, q_grid: &[f64], max_m: u32) -> Result<i32> {
    if max_m > 4 {
        return invalid("Urbanik depth is limited to max_m ≤ 4");
    }
    if m.is_zero() {
        return Ok(max_m as i32);
    }
    let intervals = default_intervals(40);
    let mut level = vec![DensityFn::of(m)?];
    let mut depth = -1;
    for k in 0..=max_m {
        for d in &level {
            if !class_stage(d, q_grid, &intervals)? {
                return Ok(depth);
            }
        }
        depth = k as i32;
        if k == max_m {
            break;
        }
        level = level
            .iter()
            .flat_map(|d| q_grid.iter().map(move |q| d.residual(*q)))
            .collect();
    }
    Ok(depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeZero {
    Guaranteed,
    NotGuaranteed,
}

/// Whether the master measure charges no zero-section: the kernel must be
/// lower or upper continuous in `u`, and `f(·, s)` must not vanish on the
/// dense grid for any of 10³ sampled `s`.
pub fn charge_zero_precondition(spec: &MasterMeasureSpec, u_dense: &[f64]) -> ChargeZero {
    if spec.continuity_class == ContinuityClass::Neither || u_dense.is_empty() {
        return ChargeZero::NotGuaranteed;
    }
    let [c0, c1] = spec.quadruplet.control.domain.0[0];
    let umin = u_dense.iter().copied().fold(f64::INFINITY, f64::min);
    let umax = u_dense.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = c0.max(umin);
    let hi = c1.min(umax);
    if !(lo < hi) {
        return ChargeZero::NotGuaranteed;
    }
    let n = 1000;
    for i in 0..n {
        let s = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
        if spec.quadruplet.control.density_at(&[s]) == 0.0 {
            continue;
        }
        if u_dense.iter().all(|u| spec.kernel.eval(*u, s) == 0.0) {
            return ChargeZero::NotGuaranteed;
        }
    }
    ChargeZero::Guaranteed
}
