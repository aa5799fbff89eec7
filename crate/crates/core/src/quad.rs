//! Adaptive Gauss–Kronrod quadrature with divergence detection.
//!
//! Finite intervals use a global adaptive 21-point Kronrod rule (the
//! QUADPACK `qag` scheme). Half-infinite ranges and singular endpoints are
//! handled by [`tail`], which integrates over dyadic blocks and classifies
//! the block sequence as convergent, divergent or undecided. A singular
//! endpoint `c` of `[c, c + h]` is mapped to a tail via `x = c + 1/y`, so the
//! same classifier detects blow-up at the origin of a Lévy measure or at the
//! singular point of a kernel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values the quadrature can accumulate.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn norm(&self) -> f64;
    fn finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub epsabs: f64,
    pub epsrel: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            epsabs: 1e-10,
            epsrel: 1e-8,
            max_subdivisions: 10_000,
        }
    }
}

impl QuadOptions {
    pub fn tight() -> Self {
        Self {
            epsabs: 1e-13,
            epsrel: 1e-11,
            max_subdivisions: 10_000,
        }
    }

    pub fn with_tol(epsabs: f64, epsrel: f64) -> Self {
        Self {
            epsabs,
            epsrel,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

// 21-point Kronrod abscissae and weights with the embedded 10-point Gauss rule.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

fn qk21<T: QuadValue>(f: &dyn Fn(f64) -> T, a: f64, b: f64) -> Result<(T, f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.finite() {
        return Err(Error::NonFinite(center));
    }
    let mut resk = fc * WGK[10];
    let mut resabs = fc.norm() * WGK[10];
    let mut resg = T::zero();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let f1 = f(x1);
        let f2 = f(x2);
        if !f1.finite() {
            return Err(Error::NonFinite(x1));
        }
        if !f2.finite() {
            return Err(Error::NonFinite(x2));
        }
        fv1[j] = f1;
        fv2[j] = f2;
        resk = resk + (f1 + f2) * WGK[j];
        resabs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            resg = resg + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let scale = half.abs();
    let result = resk * half;
    resabs *= scale;
    resasc *= scale;
    let mut err = ((resk - resg) * half).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((result, err, resabs))
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Global adaptive quadrature on a finite interval.
pub fn adaptive<T: QuadValue>(
    f: &dyn Fn(f64) -> T,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "adaptive quadrature needs finite limits, got [{a}, {b}]"
        )));
    }
    let (value, error, _) = qk21(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut subdivisions = 1usize;
    // segments too narrow to split are parked here and still count toward the totals
    let mut frozen_err = 0.0;
    loop {
        let tol = opts.epsabs.max(opts.epsrel * total.norm());
        if total_err <= tol {
            break;
        }
        if subdivisions >= opts.max_subdivisions {
            let lo = a.min(b);
            let hi = a.max(b);
            let est = total.norm();
            return Err(Error::QuadratureBudget {
                lo,
                hi,
                estimate: est,
                error: total_err,
            });
        }
        let Some(seg) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (seg.a + seg.b);
        let width = (seg.b - seg.a).abs();
        if mid == seg.a || mid == seg.b || width <= 4.0 * f64::EPSILON * seg.a.abs().max(seg.b.abs()) {
            frozen_err += seg.error;
            if heap.is_empty() {
                break;
            }
            // cannot refine further; only the remaining segments can improve
            if total_err - frozen_err <= tol {
                break;
            }
            continue;
        }
        let (v1, e1, _) = qk21(f, seg.a, mid)?;
        let (v2, e2, _) = qk21(f, mid, seg.b)?;
        total = total - seg.value + v1 + v2;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    if !total.finite() {
        return Err(Error::NonFinite(0.5 * (a + b)));
    }
    Ok(Estimate {
        value: total,
        error: total_err.max(0.0),
    })
}

const PHASE1_BLOCKS: usize = 64;
const LOG_LIMIT: f64 = 700.0;

/// Integral over `[a, ∞)` with divergence detection.
///
/// Blocks are `[a + w(2^k − 1), a + w(2^{k+1} − 1)]`. The sum is accepted
/// once blocks become negligible or decay at a stable geometric ratio (the
/// remainder is then extrapolated). Eight successive non-decaying blocks
/// declare divergence once past the first sixteen. Sequences still undecided after 64 blocks are probed
/// on blocks doubling in `log x` up to `x = e^700`.
pub fn tail<T: QuadValue>(
    f: &dyn Fn(f64) -> T,
    a: f64,
    scale: f64,
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    let w = if scale > 0.0 { scale } else { a.abs().max(1.0) };
    let block_opts = QuadOptions {
        epsabs: opts.epsabs / 8.0,
        ..*opts
    };
    let mut sum = T::zero();
    let mut err = 0.0;
    let mut norms: Vec<f64> = Vec::with_capacity(PHASE1_BLOCKS);
    let mut values: Vec<T> = Vec::with_capacity(PHASE1_BLOCKS);
    let mut lo = a;
    for k in 0..PHASE1_BLOCKS {
        let hi = a + w * ((2.0f64).powi(k as i32 + 1) - 1.0);
        let est = match adaptive(f, lo, hi, &block_opts) {
            Ok(e) => e,
            Err(Error::NonFinite(x)) => {
                return Err(Error::QuadratureDivergence(format!(
                    "integrand overflows in the tail near {x:e}"
                )))
            }
            Err(Error::QuadratureBudget { .. }) => {
                return Err(Error::QuadratureInconclusive(format!(
                    "tail block [{lo:e}, {hi:e}] did not converge"
                )))
            }
            Err(e) => return Err(e),
        };
        sum = sum + est.value;
        err += est.error;
        norms.push(est.value.norm());
        values.push(est.value);
        lo = hi;
        if !sum.finite() {
            return Err(Error::QuadratureDivergence("tail sum overflows".into()));
        }
        let tol = opts.epsabs.max(opts.epsrel * sum.norm());
        if k >= 2 {
            let b = norms[k];
            let bp = norms[k - 1];
            if b <= 0.1 * tol && bp <= tol {
                return Ok(Estimate {
                    value: sum,
                    error: err + b,
                });
            }
        }
        if k >= 5 {
            let r0 = ratio(norms[k], norms[k - 1]);
            let r1 = ratio(norms[k - 1], norms[k - 2]);
            let r2 = ratio(norms[k - 2], norms[k - 3]);
            if r0 < 0.95 && r1 < 0.95 && r2 < 0.95 {
                let drift = (r0 - r1).abs().max((r1 - r2).abs());
                let extra = norms[k] * r0 / (1.0 - r0);
                let extra_err = norms[k] * drift / ((1.0 - r0) * (1.0 - r0));
                if extra_err <= tol && drift <= 0.02 * r0.max(1e-3) {
                    return Ok(Estimate {
                        value: sum + values[k] * (r0 / (1.0 - r0)),
                        error: err + extra_err + 1e-3 * extra,
                    });
                }
            }
        }
        // early blocks may still be climbing a hump
        if k >= 16 {
            let flat = (k - 7..=k).all(|j| norms[j] >= (1.0 - 1e-3) * norms[j - 1]);
            if flat && norms[k] > tol {
                return Err(Error::QuadratureDivergence(format!(
                    "tail blocks stop decaying beyond {lo:e}"
                )));
            }
        }
    }
    log_tail(f, lo, sum, err, opts)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn log_tail<T: QuadValue>(
    f: &dyn Fn(f64) -> T,
    start: f64,
    mut sum: T,
    mut err: f64,
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    let g = |v: f64| {
        let x = v.exp();
        f(x) * x
    };
    let mut t = start.ln();
    let mut norms = Vec::new();
    let mut values = Vec::new();
    while t < LOG_LIMIT {
        let t_next = (2.0 * t).min(LOG_LIMIT);
        let est = match adaptive(&g, t, t_next, opts) {
            Ok(e) => e,
            Err(Error::NonFinite(_)) => {
                return Err(Error::QuadratureDivergence(
                    "integrand overflows in the far tail".into(),
                ))
            }
            Err(_) => {
                return Err(Error::QuadratureInconclusive(
                    "far-tail block did not converge".into(),
                ))
            }
        };
        // the final block may be truncated; rescale its norm to a full doubling
        let width_fix = t / (t_next - t);
        norms.push(est.value.norm() * width_fix);
        values.push(est.value);
        sum = sum + est.value;
        err += est.error;
        t = t_next;
    }
    let tol = opts.epsabs.max(opts.epsrel * sum.norm());
    let n = norms.len();
    if n == 0 {
        return Ok(Estimate { value: sum, error: err });
    }
    if norms[n - 1] <= tol {
        return Ok(Estimate { value: sum, error: err + norms[n - 1] });
    }
    if n >= 2 {
        let r = ratio(norms[n - 1], norms[n - 2]);
        if r >= 0.9 {
            return Err(Error::QuadratureDivergence(
                "logarithmic tail blocks do not decay".into(),
            ));
        }
        if r <= 0.75 {
            let extra = norms[n - 1] * r / (1.0 - r);
            return Ok(Estimate {
                value: sum + values[n - 1] * (r / (1.0 - r)),
                error: err + extra,
            });
        }
    }
    Err(Error::QuadratureInconclusive(
        "tail decays too slowly to classify".into(),
    ))
}

/// Integral over `[a, b]` where either limit may be infinite.
pub fn integrate<T: QuadValue>(
    f: &dyn Fn(f64) -> T,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
        });
    }
    if a > b {
        let e = integrate(f, b, a, opts)?;
        return Ok(Estimate {
            value: e.value * -1.0,
            error: e.error,
        });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(f, a, b, opts),
        (true, false) => tail(f, a, 0.0, opts),
        (false, true) => {
            let g = |y: f64| f(-y);
            tail(&g, -b, 0.0, opts)
        }
        (false, false) => {
            let left = integrate(f, f64::NEG_INFINITY, 0.0, opts)?;
            let right = integrate(f, 0.0, f64::INFINITY, opts)?;
            Ok(Estimate {
                value: left.value + right.value,
                error: left.error + right.error,
            })
        }
    }
}

/// Integral over a finite `[a, b]` whose endpoints may be singular.
///
/// A singular endpoint is mapped to a tail so that non-integrable blow-up
/// is reported as divergence instead of exhausting the subdivision budget.
pub fn integrate_singular<T: QuadValue>(
    f: &dyn Fn(f64) -> T,
    a: f64,
    b: f64,
    singular_lo: bool,
    singular_hi: bool,
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return integrate(f, a, b, opts);
    }
    if !singular_lo && !singular_hi {
        return adaptive(f, a, b, opts);
    }
    let mid = 0.5 * (a + b);
    let half = mid - a;
    let lower = if singular_lo {
        let g = |y: f64| f(a + 1.0 / y) * (1.0 / (y * y));
        tail(&g, 1.0 / half, 1.0 / half, opts)?
    } else {
        adaptive(f, a, mid, opts)?
    };
    let upper = if singular_hi {
        let g = |y: f64| f(b - 1.0 / y) * (1.0 / (y * y));
        tail(&g, 1.0 / half, 1.0 / half, opts)?
    } else {
        adaptive(f, mid, b, opts)?
    };
    Ok(Estimate {
        value: lower.value + upper.value,
        error: lower.error + upper.error,
    })
}

/// Integral over `[lo, hi]` split at `breaks`; pieces touching a point of
/// `singular` get divergence-aware endpoint treatment.
pub fn integrate_pieces<T: QuadValue>(
    f: &dyn Fn(f64) -> T,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    singular: &[f64],
    opts: &QuadOptions,
) -> Result<Estimate<T>> {
    if lo >= hi {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
        });
    }
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    let is_sing = |x: f64| singular.iter().any(|s| *s == x);
    let mut value = T::zero();
    let mut error = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let est = if a.is_finite() && b.is_finite() {
            integrate_singular(f, a, b, is_sing(a), is_sing(b), opts)?
        } else if a.is_finite() && is_sing(a) {
            // singular finite end joined to an infinite one: split at unit distance
            let m = a + 1.0;
            let near = integrate_singular(f, a, m, true, false, opts)?;
            let far = integrate(f, m, b, opts)?;
            Estimate {
                value: near.value + far.value,
                error: near.error + far.error,
            }
        } else if b.is_finite() && is_sing(b) {
            let m = b - 1.0;
            let near = integrate_singular(f, m, b, false, true, opts)?;
            let far = integrate(f, a, m, opts)?;
            Estimate {
                value: near.value + far.value,
                error: near.error + far.error,
            }
        } else {
            integrate(f, a, b, opts)?
        };
        value = value + est.value;
        error += est.error;
    }
    Ok(Estimate { value, error })
}

/// Finiteness classification of a nonnegative improper integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Finiteness {
    Finite(f64),
    Infinite,
    Undecided,
}

impl Finiteness {
    pub fn from_result(r: Result<Estimate<f64>>) -> Self {
        match r {
            Ok(e) if e.value.is_finite() => Finiteness::Finite(e.value),
            Ok(_) => Finiteness::Infinite,
            Err(Error::QuadratureDivergence(_)) => Finiteness::Infinite,
            Err(Error::QuadratureBudget { .. }) => Finiteness::Infinite,
            Err(_) => Finiteness::Undecided,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let f = |x: f64| 3.0 * x * x;
        let e = adaptive(&f, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert_relative_eq!(e.value, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity_integrates() {
        let f = |x: f64| x.powf(-0.5);
        let e = adaptive(&f, 0.0, 1.0, &QuadOptions::tight()).unwrap();
        assert_relative_eq!(e.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn exponential_tail() {
        let f = |x: f64| (-x).exp();
        let e = integrate(&f, 0.0, f64::INFINITY, &QuadOptions::tight()).unwrap();
        assert_relative_eq!(e.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn power_tail_is_extrapolated() {
        let f = |x: f64| x.powf(-1.25);
        let e = integrate(&f, 1.0, f64::INFINITY, &QuadOptions::tight()).unwrap();
        assert_relative_eq!(e.value, 4.0, max_relative = 1e-8);
    }

    #[test]
    fn harmonic_tail_diverges() {
        let f = |x: f64| 1.0 / x;
        let r = integrate(&f, 1.0, f64::INFINITY, &QuadOptions::default());
        assert!(matches!(r, Err(Error::QuadratureDivergence(_))), "{r:?}");
    }

    #[test]
    fn loglog_divergence_is_found_in_far_tail() {
        let f = |x: f64| 1.0 / (x * x.ln());
        let r = integrate(&f, std::f64::consts::E, f64::INFINITY, &QuadOptions::default());
        assert!(matches!(r, Err(Error::QuadratureDivergence(_))), "{r:?}");
    }

    #[test]
    fn log_squared_tail_converges() {
        // ∫_e^∞ dx / (x log²x) = 1
        let f = |x: f64| 1.0 / (x * x.ln().powi(2));
        let e = integrate(&f, std::f64::consts::E, f64::INFINITY, &QuadOptions::default()).unwrap();
        assert_relative_eq!(e.value, 1.0, max_relative = 1e-3);
    }

    #[test]
    fn singular_origin_divergence() {
        let f = |s: f64| 1.0 / s;
        let r = integrate_singular(&f, 0.0, 1.0, true, false, &QuadOptions::default());
        assert!(matches!(r, Err(Error::QuadratureDivergence(_))), "{r:?}");
        let g = |s: f64| s.powf(-0.75);
        let e = integrate_singular(&g, 0.0, 1.0, true, false, &QuadOptions::tight()).unwrap();
        assert_relative_eq!(e.value, 4.0, max_relative = 1e-8);
    }

    #[test]
    fn complex_oscillatory() {
        let f = |x: f64| Complex64::new(0.0, x).exp() * (-x).exp();
        let e = integrate(&f, 0.0, f64::INFINITY, &QuadOptions::tight()).unwrap();
        let exact = Complex64::new(1.0, 0.0) / Complex64::new(1.0, -1.0);
        assert!((e.value - exact).norm() < 1e-11);
    }

    #[test]
    fn pieces_with_kinks() {
        let f = |x: f64| if x < 1.0 { x } else { 2.0 - x };
        let e = integrate_pieces(&f, 0.0, 2.0, &[1.0], &[], &QuadOptions::tight()).unwrap();
        assert_relative_eq!(e.value, 1.0, max_relative = 1e-14);
    }
}
