//! Grid simulation of Lévy bases and Volterra fields, and the cumulant
//! oracle used to validate it.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{integrate_profile, KernelFamily, KernelSpec, Profile};
use crate::levy_core::{psi, JumpSampler, LevyMeasure1D, LevyQuadruplet, ParamFn};
use crate::quad::{integrate_singular, QuadOptions};
use crate::special::{gamma_fn, upper_incomplete_gamma};

pub use crate::kernel::gamma_kernel_fourier;

/// Largest number of cells a grid may have.
pub const MAX_CELLS: usize = 10_000_000;

/// Expected jumps per cell above which simulation refuses to run.
pub const MAX_JUMPS_PER_CELL: f64 = 1e6;

/// Discretisation of the parameter line and the index points of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub s_range: [f64; 2],
    pub ds: f64,
    pub u_points: Vec<f64>,
    pub small_jump_cut: f64,
    pub seed: u64,
}

impl SimGrid {
    pub fn new(s_range: [f64; 2], ds: f64, u_points: Vec<f64>, small_jump_cut: f64, seed: u64) -> Result<Self> {
        let g = Self {
            s_range,
            ds,
            u_points,
            small_jump_cut,
            seed,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.s_range;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return invalid(format!("s range [{a}, {b}] must be a finite nonempty interval"));
        }
        if !(self.ds > 0.0 && self.ds.is_finite()) {
            return invalid(format!("ds must be positive, got {}", self.ds));
        }
        if (b - a) / self.ds > MAX_CELLS as f64 {
            return invalid(format!("grid has more than {MAX_CELLS} cells"));
        }
        if !(self.small_jump_cut > 0.0 && self.small_jump_cut <= 1.0) {
            return invalid(format!("small-jump cut must lie in (0, 1], got {}", self.small_jump_cut));
        }
        if self.u_points.windows(2).any(|w| !(w[0] < w[1])) || self.u_points.iter().any(|u| !u.is_finite()) {
            return invalid("u points must be finite and strictly increasing");
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        let [a, b] = self.s_range;
        (((b - a) / self.ds) - 1e-9).ceil().max(1.0) as usize
    }

    /// `[s_j, s_{j+1}]`, the last cell clipped to the range.
    pub fn cell(&self, j: usize) -> (f64, f64) {
        let [a, b] = self.s_range;
        let lo = a + j as f64 * self.ds;
        let hi = if j + 1 == self.n_cells() { b } else { a + (j + 1) as f64 * self.ds };
        (lo, hi)
    }

    /// The same range with cells `factor` times wider.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_cells() % factor != 0 {
            return invalid(format!("cannot merge {} cells in groups of {factor}", self.n_cells()));
        }
        Self::new(
            self.s_range,
            self.ds * factor as f64,
            self.u_points.clone(),
            self.small_jump_cut,
            self.seed,
        )
    }
}

/// Purpose tags separating the random streams drawn from one seed.
#[derive(Debug, Clone, Copy)]
pub enum StreamTag {
    Basis = 1,
    FieldProcess = 2,
}

/// Generator for one `(replica, cell)` pair, independent of evaluation order.
pub fn cell_rng(seed: u64, tag: StreamTag, replica: u64, cell: u64) -> ChaCha8Rng {
    let key = seed ^ (tag as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    // cells never exceed 2^24, see MAX_CELLS
    rng.set_stream((replica << 24) | cell);
    rng
}

/// Per-cell law of a basis increment: a Gaussian part and exact jumps
/// above the cut.
#[derive(Debug, Clone)]
struct CellLaw {
    mean: f64,
    sd: f64,
    mass: f64,
    sampler: Arc<JumpSampler>,
}

/// Truncation diagnostics of a simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimDiagnostics {
    /// Cut actually used; zero when all jumps are simulated.
    pub cut: f64,
    /// Largest `∫_{|x|≤ε} x² ρ(s,dx)` over the cells.
    pub small_jump_variance: f64,
    /// Largest expected jump count of a cell.
    pub max_jumps_per_cell: f64,
}

/// Seed-level data shared by all cells where the quadruplet is constant.
fn seed_law(m: &LevyMeasure1D, cut: f64) -> Result<(f64, f64, f64, Arc<JumpSampler>)> {
    let finite = m.total_mass().map(|v| v.is_finite()).unwrap_or(false);
    let eps = if finite { 0.0 } else { cut };
    let sampler = Arc::new(m.jump_sampler(eps)?);
    let small_var = if eps > 0.0 { m.abs_moment(2.0, 0.0, eps)? } else { 0.0 };
    // ∫_{|x|>ε} τ(x) ρ(dx), with τ(x) = sign(x) beyond 1
    let comp = m.signed_moment(1.0, eps, 1.0)? + m.signed_moment(0.0, 1.0, f64::INFINITY)?;
    Ok((eps, small_var, comp, sampler))
}

/// The per-cell laws of a basis on a grid.
#[derive(Debug, Clone)]
pub struct BasisLaw {
    cells: Vec<CellLaw>,
    pub diagnostics: SimDiagnostics,
}

impl BasisLaw {
    pub fn new(q: &LevyQuadruplet, grid: &SimGrid) -> Result<Self> {
        grid.validate()?;
        if q.control.dim() != 1 {
            return invalid("grid simulation needs a one-dimensional control measure");
        }
        let [d0, d1] = q.control.domain.0[0];
        let constant_seed = q.rho.is_constant();
        let shared = if constant_seed {
            Some(seed_law(&q.rho_at(&[0.0]), grid.small_jump_cut)?)
        } else {
            None
        };
        let mut diag = SimDiagnostics::default();
        let mut cells = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.n_cells() {
            let (a, b) = grid.cell(j);
            let (lo, hi) = (a.max(d0), b.min(d1));
            let mid = 0.5 * (a + b);
            let mass = if lo >= hi {
                0.0
            } else {
                match q.control.density {
                    ParamFn::Const(c) => c * (hi - lo),
                    _ => q.control.density_at(&[0.5 * (lo + hi)]) * (hi - lo),
                }
            };
            let owned;
            let (eps, small_var, comp, sampler) = match &shared {
                Some(s) => s,
                None => {
                    owned = seed_law(&q.rho_at(&[mid]), grid.small_jump_cut)?;
                    &owned
                }
            };
            let gamma = q.gamma.eval(&[mid]);
            let b = q.b.eval(&[mid]);
            let expected = sampler.rate() * mass;
            if expected > MAX_JUMPS_PER_CELL {
                return Err(Error::JumpRateOverflow { expected });
            }
            diag.cut = *eps;
            diag.small_jump_variance = diag.small_jump_variance.max(*small_var);
            diag.max_jumps_per_cell = diag.max_jumps_per_cell.max(expected);
            cells.push(CellLaw {
                mean: (gamma - comp) * mass,
                sd: ((b * b + small_var) * mass).sqrt(),
                mass,
                sampler: sampler.clone(),
            });
        }
        Ok(Self { cells, diagnostics: diag })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Increments of replica `replica`; cell `j` draws only from its own stream.
    pub fn sample(&self, seed: u64, replica: u64) -> Vec<f64> {
        self.sample_tagged(seed, StreamTag::Basis, replica)
    }

    pub fn sample_tagged(&self, seed: u64, tag: StreamTag, replica: u64) -> Vec<f64> {
        self.cells
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if c.mass == 0.0 {
                    return 0.0;
                }
                let mut rng = cell_rng(seed, tag, replica, j as u64);
                let z: f64 = StandardNormal.sample(&mut rng);
                let jumps = if c.sampler.is_empty() { 0.0 } else { c.sampler.sample_sum(c.mass, &mut rng) };
                c.mean + c.sd * z + jumps
            })
            .collect()
    }
}

/// Increments `L([s_j, s_{j+1}))` of one replica.
pub fn simulate_basis_increments(q: &LevyQuadruplet, grid: &SimGrid, replica: u64) -> Result<Vec<f64>> {
    Ok(BasisLaw::new(q, grid)?.sample(grid.seed, replica))
}

/// Sums of consecutive groups of `factor` increments.
pub fn aggregate(increments: &[f64], factor: usize) -> Vec<f64> {
    increments.chunks(factor.max(1)).map(|c| c.iter().sum()).collect()
}

/// Discrete kernel weights `w_j(u)` with `X_u = Σ_j w_j(u) ΔL_j`.
#[derive(Debug, Clone)]
pub struct FieldWeights {
    pub u_points: Vec<f64>,
    /// Nonzero weights as `(first cell, values)` per index point.
    rows: Vec<(usize, Vec<f64>)>,
}

/// `∫_0^h t^α e^{−t} dt`.
fn lower_gamma(alpha: f64, h: f64) -> f64 {
    let a = alpha + 1.0;
    gamma_fn(a) - upper_incomplete_gamma(a, h)
}

/// Average of `f(u, ·)` over `[lo, hi]`.
fn cell_average(kernel: &KernelSpec, u: f64, lo: f64, hi: f64) -> Result<f64> {
    if let KernelFamily::Gamma { alpha } = kernel.family {
        if (lo - u).abs() < 1e-12 * (1.0 + u.abs()) || (lo < u && u <= hi) {
            // singular or kinked cell: the part below u in closed form
            let below = if lo < u { lower_gamma(alpha, u - lo) } else { 0.0 };
            return Ok(kernel.scale * below / (hi - lo));
        }
    }
    let f = |s: f64| kernel.eval(u, s);
    let sing: Vec<f64> = kernel.s_singular(u);
    let touches = |x: f64| sing.iter().any(|p| *p == x);
    let mut pts = vec![lo, hi];
    pts.extend(kernel.s_breaks(u).into_iter().filter(|p| *p > lo && *p < hi));
    pts.sort_by(|a, b| a.total_cmp(b));
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += integrate_singular(&f, w[0], w[1], touches(w[0]), touches(w[1]), &QuadOptions::default())?.value;
    }
    Ok(total / (hi - lo))
}

impl FieldWeights {
    /// Midpoint weights, with cell averages on cells that contain a kink
    /// or singularity of `f(u, ·)`.
    pub fn new(kernel: &KernelSpec, grid: &SimGrid) -> Result<Self> {
        grid.validate()?;
        kernel.validate()?;
        let n = grid.n_cells();
        let mut rows = Vec::with_capacity(grid.u_points.len());
        for &u in &grid.u_points {
            let (s_lo, s_hi) = kernel.s_support(u);
            if s_lo >= s_hi || kernel.scale == 0.0 {
                rows.push((0, Vec::new()));
                continue;
            }
            let mut special = kernel.s_breaks(u);
            special.extend(kernel.s_singular(u));
            let mut first = None;
            let mut vals = Vec::new();
            for j in 0..n {
                let (a, b) = grid.cell(j);
                if b <= s_lo || a >= s_hi {
                    if first.is_some() {
                        vals.push(0.0);
                    }
                    continue;
                }
                let hit = special.iter().any(|p| *p >= a && *p <= b);
                let w = if hit {
                    cell_average(kernel, u, a, b)?
                } else {
                    kernel.eval(u, 0.5 * (a + b))
                };
                if !w.is_finite() {
                    return Err(Error::SingularCellOverflow(format!(
                        "weight of cell [{a}, {b}] for u = {u} is not finite"
                    )));
                }
                if first.is_none() {
                    if w == 0.0 {
                        continue;
                    }
                    first = Some(j);
                }
                vals.push(w);
            }
            while vals.last() == Some(&0.0) {
                vals.pop();
            }
            rows.push((first.unwrap_or(0), vals));
        }
        Ok(Self {
            u_points: grid.u_points.clone(),
            rows,
        })
    }

    /// `X_u` for every index point.
    pub fn apply(&self, increments: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|(first, w)| {
                w.iter()
                    .zip(&increments[*first..])
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn weights(&self, k: usize) -> (usize, &[f64]) {
        let (f, w) = &self.rows[k];
        (*f, w)
    }
}

/// Provenance of a simulated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub grid: SimGrid,
    pub replica: u64,
    pub diagnostics: SimDiagnostics,
}

/// A simulated field on finitely many index points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPath {
    pub u_points: Vec<f64>,
    pub values: Vec<f64>,
    pub basis_increments: Vec<f64>,
    pub meta: PathMeta,
}

/// `X_u = Σ_j w_j(u) ΔL_j` from given increments.
pub fn simulate_field(kernel: &KernelSpec, increments: &[f64], grid: &SimGrid) -> Result<FieldPath> {
    if increments.len() != grid.n_cells() {
        return invalid(format!(
            "got {} increments for a grid of {} cells",
            increments.len(),
            grid.n_cells()
        ));
    }
    let w = FieldWeights::new(kernel, grid)?;
    Ok(FieldPath {
        u_points: grid.u_points.clone(),
        values: w.apply(increments),
        basis_increments: increments.to_vec(),
        meta: PathMeta {
            grid: grid.clone(),
            replica: 0,
            diagnostics: SimDiagnostics::default(),
        },
    })
}

/// Field values of many replicas for several kernels on common noise:
/// `out[k][r]` holds the values of kernel `k` in replica `r`.
pub fn simulate_common_noise(
    q: &LevyQuadruplet,
    kernels: &[KernelSpec],
    grid: &SimGrid,
    replicas: u64,
) -> Result<(Vec<Vec<Vec<f64>>>, SimDiagnostics)> {
    let law = BasisLaw::new(q, grid)?;
    let weights = kernels
        .iter()
        .map(|k| FieldWeights::new(k, grid))
        .collect::<Result<Vec<_>>>()?;
    let per_replica: Vec<Vec<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let inc = law.sample(grid.seed, r);
            weights.iter().map(|w| w.apply(&inc)).collect()
        })
        .collect();
    let mut out = vec![Vec::with_capacity(replicas as usize); kernels.len()];
    for rep in per_replica {
        for (k, v) in rep.into_iter().enumerate() {
            out[k].push(v);
        }
    }
    Ok((out, law.diagnostics))
}

/// Full paths of `replicas` replicas, increments retained.
pub fn simulate_paths(q: &LevyQuadruplet, kernel: &KernelSpec, grid: &SimGrid, replicas: u64) -> Result<Vec<FieldPath>> {
    let law = BasisLaw::new(q, grid)?;
    let w = FieldWeights::new(kernel, grid)?;
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| {
            let inc = law.sample(grid.seed, r);
            FieldPath {
                u_points: grid.u_points.clone(),
                values: w.apply(&inc),
                basis_increments: inc,
                meta: PathMeta {
                    grid: grid.clone(),
                    replica: r,
                    diagnostics: law.diagnostics,
                },
            }
        })
        .collect())
}

/// `C{θ ‡ (X_{u_1}, …, X_{u_k})} = ∫ ψ(Σ_j θ_j f(u_j, s), s) c(ds)`.
pub fn cumulant_oracle(q: &LevyQuadruplet, kernel: &KernelSpec, us: &[f64], thetas: &[f64]) -> Result<Complex64> {
    if us.len() != thetas.len() {
        return invalid("u and θ vectors differ in length");
    }
    if q.control.dim() != 1 {
        return invalid("the cumulant oracle needs a one-dimensional control measure");
    }
    if thetas.iter().all(|t| *t == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let p = Profile::combination(kernel, us, thetas);
    profile_cumulant(q, &p)
}

/// `∫ ψ(f(s), s) c(ds)` for a profile `f`.
pub fn profile_cumulant(q: &LevyQuadruplet, p: &Profile) -> Result<Complex64> {
    let opts = QuadOptions::tight();
    let seed = q.rho.is_constant().then(|| q.rho_at(&[0.0]));
    let constant = q.gamma.is_constant() && q.b.is_constant();
    let (g0, b0) = (q.gamma.eval(&[0.0]), q.b.eval(&[0.0]));
    let failure = std::cell::RefCell::new(None);
    let g = |v: f64, s: f64| -> Complex64 {
        if v == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let (gamma, b) = if constant { (g0, b0) } else { (q.gamma.eval(&[s]), q.b.eval(&[s])) };
        let r = match &seed {
            Some(m) => psi(gamma, b, m, v, &opts),
            None => psi(gamma, b, &q.rho_at(&[s]), v, &opts),
        };
        r.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            Complex64::new(0.0, 0.0)
        })
    };
    let r = integrate_profile(p, &q.control, &g, &QuadOptions::with_tol(1e-11, 1e-9));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let v = r?.value;
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::QuadratureDivergence("cumulant integral is not finite".into()));
    }
    Ok(v)
}

/// A Monte Carlo characteristic function with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfEstimate {
    pub value: Complex64,
    pub std_error: f64,
}

/// Mean of `e^{iY_r}` with the delete-one jackknife standard error.
pub fn empirical_cf_of(projections: &[f64]) -> Result<CfEstimate> {
    let n = projections.len();
    if n < 100 {
        return invalid(format!("an empirical CF needs at least 100 replicas, got {n}"));
    }
    let z: Vec<Complex64> = projections.iter().map(|y| Complex64::from_polar(1.0, *y)).collect();
    let total: Complex64 = z.iter().sum();
    let nf = n as f64;
    let mean = total / nf;
    // leave-one-out means are (total − z_r)/(n − 1)
    let ss: f64 = z
        .iter()
        .map(|zr| ((total - zr) / (nf - 1.0) - mean).norm_sqr())
        .sum();
    Ok(CfEstimate {
        value: mean,
        std_error: ((nf - 1.0) / nf * ss).sqrt(),
    })
}

/// `(1/N) Σ_r exp(i Σ_j θ_j X^{(r)}_{u_j})`.
pub fn empirical_cf(paths: &[FieldPath], us: &[f64], thetas: &[f64]) -> Result<CfEstimate> {
    if us.len() != thetas.len() {
        return invalid("u and θ vectors differ in length");
    }
    let Some(first) = paths.first() else {
        return invalid("no paths given");
    };
    let idx = us
        .iter()
        .map(|u| {
            first
                .u_points
                .iter()
                .position(|v| v == u)
                .ok_or_else(|| Error::InvalidInput(format!("u = {u} is not on the path grid")))
        })
        .collect::<Result<Vec<_>>>()?;
    let proj: Vec<f64> = paths
        .iter()
        .map(|p| idx.iter().zip(thetas).map(|(i, t)| t * p.values[*i]).sum())
        .collect();
    empirical_cf_of(&proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(lo: f64, hi: f64, ds: f64, us: Vec<f64>) -> SimGrid {
        SimGrid::new([lo, hi], ds, us, 1e-3, 7).unwrap()
    }

    #[test]
    fn cells_cover_the_range() {
        let g = grid(0.0, 1.0, 0.3, vec![1.0]);
        assert_eq!(g.n_cells(), 4);
        assert_eq!(g.cell(3), (0.8999999999999999, 1.0));
        assert_eq!(grid(0.0, 1.0, 0.25, vec![]).n_cells(), 4);
    }

    #[test]
    fn streams_do_not_depend_on_order() {
        let q = LevyQuadruplet::gamma_subordinator(1.0, 1.0);
        let g = grid(0.0, 1.0, 0.1, vec![1.0]);
        let law = BasisLaw::new(&q, &g).unwrap();
        let a = law.sample(g.seed, 5);
        let b = law.sample(g.seed, 5);
        assert_eq!(a, b);
        assert_ne!(a, law.sample(g.seed, 6));
    }

    #[test]
    fn ou_weights_integrate_the_kernel() {
        let g = grid(-20.0, 1.0, 0.01, vec![1.0]);
        let w = FieldWeights::new(&KernelSpec::ou(), &g).unwrap();
        let (_, row) = w.weights(0);
        let sq: f64 = row.iter().map(|x| x * x * 0.01).sum();
        assert_relative_eq!(sq, 0.5, max_relative = 1e-3);
    }

    #[test]
    fn singular_cells_use_the_incomplete_gamma_function() {
        let g = grid(0.0, 1.0, 0.1, vec![1.0]);
        let k = KernelSpec::gamma(-0.5).unwrap();
        let w = FieldWeights::new(&k, &g).unwrap();
        let (first, row) = w.weights(0);
        let last = row[row.len() - 1];
        let f = |t: f64| (-t).exp() * t.powf(-0.5);
        let reference = crate::quad::integrate_singular(&f, 0.0, 0.1, true, false, &QuadOptions::tight()).unwrap().value / 0.1;
        assert_eq!(first, 0);
        assert_relative_eq!(last, reference, max_relative = 1e-9);
    }

    #[test]
    fn wiener_ou_cumulant() {
        let q = LevyQuadruplet::gaussian(1.0, 0.0);
        let c = cumulant_oracle(&q, &KernelSpec::ou(), &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(c.re, -0.25, max_relative = 1e-10);
        assert!(c.im.abs() < 1e-14);
        assert_eq!(cumulant_oracle(&q, &KernelSpec::ou(), &[0.0], &[0.0]).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn deterministic_paths_have_unit_cf() {
        let e = empirical_cf_of(&vec![0.0; 200]).unwrap();
        assert_eq!(e.value, Complex64::new(1.0, 0.0));
        assert_eq!(e.std_error, 0.0);
        assert!(empirical_cf_of(&[0.0; 10]).is_err());
    }
}
