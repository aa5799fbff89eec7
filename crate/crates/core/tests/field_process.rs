use std::time::Instant;

use sdfields_core::field_process::*;
use sdfields_core::kernel::{KernelSpec, Profile};
use sdfields_core::levy_core::{ControlMeasure, LevyMeasure1D, LevyQuadruplet, Rect, Region, RhoField};
use sdfields_core::expr::Expr;
use sdfields_core::sd_analysis::DEFAULT_Q_GRID;
use sdfields_core::volterra_sim::{cumulant_oracle, empirical_cf_of, SimGrid};
use sdfields_core::Error;

fn gamma_ou() -> FieldTripletSpec {
    FieldTripletSpec::volterra(LevyQuadruplet::gamma_subordinator(1.0, 1.0), KernelSpec::ou()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn interval_regions() -> Vec<Region> {
    sdfields_core::sd_analysis::default_intervals(5)
        .into_iter()
        .map(|(a, b)| Region::single(Rect::interval(a, b)).unwrap())
        .collect()
}

#[test]
fn indicator_integral_is_time_scaling() {
    let start = Instant::now();
    let t = 2.5;
    let us = [0.0, 0.5];
    for spec in [
        gamma_ou(),
        FieldTripletSpec::volterra(LevyQuadruplet::compound_poisson_exp(1.0, 1.0, false), KernelSpec::ou()).unwrap(),
    ] {
        let a = process_triplet_at(&spec, t, &us).unwrap();
        let f = Profile::from_fn(|_| 1.0, 0.0, t);
        let b = integral_triplet(&spec, &f, &us).unwrap();
        for j in 0..2 {
            assert!(rel(a.gamma_vec[j], b.gamma_vec[j]) < 1e-9, "{:?} vs {:?}", a.gamma_vec, b.gamma_vec);
        }
        for r in axis_regions(2, 2).unwrap() {
            let (x, y) = (a.nu_mass(&r).unwrap(), b.nu_mass(&r).unwrap());
            assert!(rel(x, y) < 1e-9, "{x} vs {y}");
        }
        let th = [1.0, -0.5];
        let (x, y) = (a.cumulant(&th).unwrap(), b.cumulant(&th).unwrap());
        assert!((x - y).norm() < 1e-9 * x.norm(), "{x} vs {y}");
    }
    println!("indicator check: {:?}", start.elapsed());
}

#[test]
fn projections_are_consistent() {
    let start = Instant::now();
    let spec = gamma_ou();
    let regions = interval_regions();
    assert_eq!(regions.len(), 10);
    for f in [ou_profile(), Profile::from_fn(|_| 1.0, 0.0, 1.0)] {
        let r = projection_consistency_check(&spec, &f, &[0.0], &[0.0, 1.0], &regions).unwrap();
        assert!(r.max_rel <= 1e-6, "{r:?}");
    }
    let gauss = FieldTripletSpec::volterra(LevyQuadruplet::gaussian(1.0, 0.0), KernelSpec::ou()).unwrap();
    let r = projection_consistency_check(&gauss, &ou_profile(), &[0.0], &[0.0, 1.0], &regions).unwrap();
    assert_eq!(r.max_abs, 0.0);
    println!("consistency: {:?}", start.elapsed());
}

#[test]
fn ou_marginals() {
    let start = Instant::now();
    let thetas = vec![vec![0.5, -1.0], vec![2.0, 1.0]];
    let gauss = FieldTripletSpec::volterra(LevyQuadruplet::gaussian(1.0, 0.3), KernelSpec::ou()).unwrap();
    let r = ou_field_marginal_check(&gauss, &[0.0, 0.5], &thetas, &[0.5, 3.0], &DEFAULT_Q_GRID).unwrap();
    assert!(r.max_discrepancy() <= 1e-8, "{r:?}");
    assert!(r.dilation.passed());

    let r = ou_field_marginal_check(&gamma_ou(), &[0.0, 0.5], &thetas, &[0.5, 3.0], &DEFAULT_Q_GRID).unwrap();
    println!("gamma OU marginal: {r:?} in {:?}", start.elapsed());
    assert!(r.max_discrepancy() <= 1e-6, "{r:?}");
    assert!(r.dilation.passed(), "{r:?}");
}

#[test]
fn missing_log_moment_is_reported() {
    // density 1/(x log²x) beyond e: a finite measure without a log moment
    let m = LevyMeasure1D::custom(Expr::parse("1 / (x * log(x) * log(x))").unwrap(), std::f64::consts::E, f64::INFINITY);
    let q = LevyQuadruplet::new(0.0.into(), 0.0.into(), RhoField::Fixed(m), ControlMeasure::lebesgue_line()).unwrap();
    let spec = FieldTripletSpec::volterra(q, KernelSpec::ou()).unwrap();
    let r = ou_field_marginal_check(&spec, &[0.0], &[vec![1.0]], &[1.0], &DEFAULT_Q_GRID);
    assert!(matches!(r, Err(Error::LogMomentFailure(_))), "{r:?}");
}

fn restricted(q: LevyQuadruplet, lo: f64, hi: f64) -> LevyQuadruplet {
    q.with_control(ControlMeasure::lebesgue(lo, hi)).unwrap()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Standard error of the sample variance.
fn var_se(x: &[f64]) -> f64 {
    let (m, v) = mean_var(x);
    let n = x.len() as f64;
    let m4 = x.iter().map(|y| (y - m).powi(4)).sum::<f64>() / n;
    ((m4 - v * v) / n).sqrt()
}

#[test]
fn wiener_ou_process_is_brownian() {
    let spec = FieldTripletSpec::volterra(LevyQuadruplet::gaussian(1.0, 0.0), KernelSpec::ou()).unwrap();
    let grid = SimGrid::new([-16.0, 0.0], 0.01, vec![0.0], 1e-3, 77).unwrap();
    let paths = simulate_field_process(&spec, &grid, &[1.0, 2.0], 10_000).unwrap();
    let y = FiniteProjection::new(vec![0.0], vec![1.0]).unwrap();
    let first: Vec<f64> = paths.values.iter().map(|v| v[0][0]).collect();
    let second = paths.pairing_increments(&y, 1, 0);
    for x in [&first, &second] {
        let (_, v) = mean_var(x);
        let se = var_se(x);
        assert!((v - 0.5).abs() < 3.0 * se, "variance {v} vs 0.5 (se {se})");
    }
    let (m1, v1) = mean_var(&first);
    let (m2, v2) = mean_var(&second);
    let se = ((v1 + v2) / 10_000.0).sqrt();
    assert!((m1 - m2).abs() < 3.0 * se);
}

#[test]
fn process_cf_and_variance_slope() {
    let start = Instant::now();
    let (lo, hi) = (-14.0, 1.0);
    let q = restricted(LevyQuadruplet::gamma_subordinator(1.0, 1.0), lo, hi);
    let spec = FieldTripletSpec::volterra(q.clone(), KernelSpec::ou()).unwrap();
    let us = vec![0.0, 0.5];
    let grid = SimGrid::new([lo, hi], 0.01, us.clone(), 1e-3, 2024).unwrap();
    let t_grid: Vec<f64> = (1..=8).map(|k| 0.25 * k as f64).collect();
    let paths = simulate_field_process(&spec, &grid, &t_grid, 10_000).unwrap();
    println!("simulated in {:?}", start.elapsed());

    let at_one = t_grid.iter().position(|t| *t == 1.0).unwrap();
    for th in [[0.5, -1.0], [1.0, 1.0], [-2.0, 0.5]] {
        let proj: Vec<f64> = paths.values.iter().map(|v| th[0] * v[at_one][0] + th[1] * v[at_one][1]).collect();
        let cf = empirical_cf_of(&proj).unwrap();
        let want = cumulant_oracle(&q, &KernelSpec::ou(), &us, &th).unwrap().exp();
        let err = (cf.value - want).norm();
        assert!(err <= 3.0 * cf.std_error, "θ = {th:?}: {err} vs se {}", cf.std_error);
    }

    let y = FiniteProjection::new(us.clone(), vec![1.0, -1.0]).unwrap();
    let slope_true = unit_pairing_variance(&spec, &y).unwrap();
    // least squares through the origin on Var⟨L(t) − L(0), y⟩
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, t) in t_grid.iter().enumerate() {
        let x: Vec<f64> = paths.values.iter().map(|v| y.pair(&v[k])).collect();
        let (_, var) = mean_var(&x);
        sxy += t * var;
        sxx += t * t;
    }
    let slope = sxy / sxx;
    println!("slope {slope} vs {slope_true}");
    assert!(rel(slope, slope_true) <= 0.1);
}
