use sdfields_core::kernel::KernelSpec;
use sdfields_core::levy_core::{LevyMeasure1D, LevyQuadruplet, Rect, Region};
use sdfields_core::orlicz::{fourier_nonvanishing_check, FourierVerdict};
use sdfields_core::sd_analysis::*;

fn kernels() -> Vec<KernelSpec> {
    vec![
        KernelSpec::ou(),
        KernelSpec::gamma(0.25).unwrap(),
        KernelSpec::fractional(0.25).unwrap(),
    ]
}

fn cylinders() -> Vec<CylinderSet> {
    default_cylinders(&[0.5, 0.6], 12).unwrap()
}

#[test]
fn sd_seeds_give_sd_fields() {
    let seeds = [
        LevyQuadruplet::gamma_subordinator(1.0, 1.0),
        LevyQuadruplet::gamma_subordinator(0.5, 2.0),
    ];
    for q in seeds {
        let m = q.rho_at(&[0.0]);
        assert!(dilation_check_1d(&m, &DEFAULT_Q_GRID, &default_intervals(40)).unwrap().passed());
        for k in kernels() {
            let spec = MasterMeasureSpec::new(q.clone(), k.clone()).unwrap();
            let v = dilation_check_field(&spec, &DEFAULT_Q_GRID, &cylinders()).unwrap();
            assert!(v.passed(), "{} kernel: {v:?}", k.name());
        }
    }
}

#[test]
fn non_sd_seed_is_detected_through_every_kernel() {
    let q = LevyQuadruplet::compound_poisson_exp(1.0, 1.0, false);
    for k in kernels() {
        let spec = MasterMeasureSpec::new(q.clone(), k.clone()).unwrap();
        let v = dilation_check_field(&spec, &DEFAULT_Q_GRID, &cylinders()).unwrap();
        match v {
            DilationVerdict::Fail { scaled_mass, mass, .. } => assert!(scaled_mass > mass),
            DilationVerdict::Pass => panic!("{} kernel found no violation", k.name()),
        }
    }
    let grid: Vec<f64> = (-200..=200).map(|k| k as f64 * 0.1).collect();
    assert!(matches!(
        fourier_nonvanishing_check(&KernelSpec::ou(), &grid).unwrap(),
        FourierVerdict::NonvanishingOnGrid { .. }
    ));
}

#[test]
fn zero_seed_passes() {
    let q = LevyQuadruplet::gaussian(1.0, 0.0);
    let spec = MasterMeasureSpec::new(q, KernelSpec::ou()).unwrap();
    assert!(dilation_check_field(&spec, &DEFAULT_Q_GRID, &cylinders()).unwrap().passed());
    assert_eq!(
        dilation_check_1d(&LevyMeasure1D::zero(), &DEFAULT_Q_GRID, &default_intervals(40)).unwrap(),
        DilationVerdict::Pass
    );
}

#[test]
fn kernel_scaling_matches_region_scaling() {
    let q = LevyQuadruplet::gamma_subordinator(1.0, 1.0);
    for k in kernels() {
        let c = 3.0;
        let spec = MasterMeasureSpec::new(q.clone(), k.clone()).unwrap();
        let scaled = MasterMeasureSpec::new(q.clone(), k.scaled(c)).unwrap();
        let r = Region::single(Rect::new(vec![[0.3, 0.9], [0.2, 2.0]])).unwrap();
        let a = CylinderSet::new(vec![0.5, 1.5], r.clone()).unwrap();
        let lhs = master_measure_eval(&scaled, &a).unwrap();
        let rhs = master_measure_eval(&spec, &a.scaled(1.0 / c)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "{}: {lhs} vs {rhs}", k.name());
    }
}

