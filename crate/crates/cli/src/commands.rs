//! Subcommand configurations and their execution.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sdfields_core::field_process::{
    axis_regions, ou_field_marginal_check, ou_profile, projection_consistency_check, simulate_field_process,
    FieldTripletSpec,
};
use sdfields_core::integrated_fields::{fubini_condition_check, FubiniVerdict, IntegratedField};
use sdfields_core::kernel::{KernelFamily, Profile};
use sdfields_core::orlicz::{fourier_nonvanishing_check, gamma_kernel_integrable, phi_integral, Membership, OrliczContext};
use sdfields_core::sd_analysis::{
    charge_zero_precondition, cylinders_from_intervals, default_cylinders, default_intervals, dilation_check_1d,
    dilation_check_field, urbanik_depth_1d, MasterMeasureSpec, DEFAULT_Q_GRID,
};
use sdfields_core::volterra_sim::{cumulant_oracle, simulate_common_noise, BasisLaw};
use sdfields_core::Error;

use crate::config::{load, parse_error, BasisConfig, FieldSpecConfig, GridConfig, KernelConfig, MuConfig};
use crate::{Command, FieldCheck};

/// Per-sign interval count of the one-dimensional dilation test.
const INTERVALS_1D: usize = 40;
/// Per-sign interval count of the cylinder sets of the field test.
const INTERVALS_FIELD: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandConfig {
    Simulate {
        basis: BasisConfig,
        kernel: KernelConfig,
        grid: GridConfig,
        replicas: u64,
    },
    Orlicz {
        basis: BasisConfig,
        kernel: KernelConfig,
        u: f64,
        p: u8,
    },
    SdCheck {
        basis: BasisConfig,
        kernel: Option<KernelConfig>,
        q_grid: Vec<f64>,
        /// `None` selects the default intervals.
        intervals: Option<Vec<[f64; 2]>>,
        u: Vec<f64>,
        s: f64,
        urbanik_depth: Option<u32>,
    },
    Fubini {
        basis: BasisConfig,
        kernel: KernelConfig,
        mu: MuConfig,
        sets: Vec<[f64; 2]>,
        grid: Option<GridConfig>,
        replicas: u64,
        #[serde(default, rename = "override")]
        override_check: bool,
    },
    FieldProcess {
        spec: FieldSpecConfig,
        u: Vec<f64>,
        v: Option<Vec<f64>>,
        t_grid: Vec<f64>,
        check: FieldCheck,
        theta: Vec<Vec<f64>>,
        tol: f64,
        grid: Option<GridConfig>,
        replicas: u64,
    },
    Cumulant {
        basis: BasisConfig,
        kernel: KernelConfig,
        u: Vec<f64>,
        theta: Vec<f64>,
    },
}

fn parse_intervals(src: &str) -> Result<Option<Vec<[f64; 2]>>, Error> {
    if src.trim() == "default" {
        return Ok(None);
    }
    src.split(',')
        .map(|part| {
            let (a, b) = part
                .split_once(':')
                .ok_or_else(|| parse_error(format!("interval {part:?} is not of the form a:b")))?;
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_error(format!("interval {part:?}: {x:?} is not a number")))
            };
            Ok([num(a)?, num(b)?])
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn parse_theta_vectors(src: &str) -> Result<Vec<Vec<f64>>, Error> {
    src.split(';')
        .map(|v| {
            v.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_error(format!("θ entry {x:?} is not a number")))
                })
                .collect()
        })
        .collect()
}

/// `(1, …, 1)` and `(1, −1, 1, …)`.
fn default_thetas(d: usize) -> Vec<Vec<f64>> {
    vec![
        vec![1.0; d],
        (0..d).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect(),
    ]
}

fn replicas_at_least_one(n: u64) -> Result<(), Error> {
    if n == 0 {
        return Err(parse_error("replicas must be at least 1"));
    }
    Ok(())
}

impl CommandConfig {
    pub fn from_args(c: &Command) -> Result<Self, Error> {
        Ok(match c {
            Command::Simulate(a) => CommandConfig::Simulate {
                basis: load(&a.basis, "basis")?,
                kernel: load(&a.kernel, "kernel")?,
                grid: load(&a.grid, "grid")?,
                replicas: a.replicas,
            },
            Command::Orlicz(a) => CommandConfig::Orlicz {
                basis: load(&a.basis, "basis")?,
                kernel: load(&a.kernel, "kernel")?,
                u: a.u,
                p: a.p,
            },
            Command::SdCheck(a) => CommandConfig::SdCheck {
                basis: load(&a.basis, "basis")?,
                kernel: a.kernel.as_deref().map(|k| load(k, "kernel")).transpose()?,
                q_grid: a.q.clone().unwrap_or_else(|| DEFAULT_Q_GRID.to_vec()),
                intervals: parse_intervals(&a.intervals)?,
                u: a.u.clone(),
                s: a.s,
                urbanik_depth: a.urbanik_depth,
            },
            Command::Fubini(a) => CommandConfig::Fubini {
                basis: load(&a.basis, "basis")?,
                kernel: load(&a.kernel, "kernel")?,
                mu: load(&a.mu, "mu")?,
                sets: load(&a.sets, "sets")?,
                grid: a.grid.as_deref().map(|g| load(g, "grid")).transpose()?,
                replicas: a.replicas,
                override_check: a.override_check,
            },
            Command::FieldProcess(a) => CommandConfig::FieldProcess {
                spec: load(&a.spec, "spec")?,
                u: a.u.clone(),
                v: a.v.clone(),
                t_grid: a.t_grid.clone(),
                check: a.check,
                theta: match &a.theta {
                    Some(t) => parse_theta_vectors(t)?,
                    None => default_thetas(a.u.len()),
                },
                tol: a.tol,
                grid: a.grid.as_deref().map(|g| load(g, "grid")).transpose()?,
                replicas: a.replicas,
            },
            Command::Cumulant(a) => CommandConfig::Cumulant {
                basis: load(&a.basis, "basis")?,
                kernel: load(&a.kernel, "kernel")?,
                u: a.u.clone(),
                theta: a.theta.clone(),
            },
        })
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            CommandConfig::Simulate {
                basis,
                kernel,
                grid,
                replicas,
            } => {
                replicas_at_least_one(*replicas)?;
                basis.resolve()?;
                kernel.resolve()?;
                grid.resolve(0)?;
            }
            CommandConfig::Orlicz { basis, kernel, p, .. } => {
                if !matches!(p, 0..=2) {
                    return Err(parse_error(format!("p must be 0, 1 or 2, got {p}")));
                }
                basis.resolve()?;
                kernel.resolve()?;
            }
            CommandConfig::SdCheck {
                basis,
                kernel,
                q_grid,
                intervals,
                u,
                urbanik_depth,
                ..
            } => {
                basis.resolve()?;
                if let Some(k) = kernel {
                    k.resolve()?;
                    if u.is_empty() {
                        return Err(parse_error("the field test needs at least one index point"));
                    }
                }
                if q_grid.is_empty() || q_grid.iter().any(|q| !(*q > 1.0)) {
                    return Err(parse_error("dilation factors must exceed 1"));
                }
                if let Some(iv) = intervals {
                    if iv.iter().any(|[a, b]| !(a <= b) || (*a <= 0.0 && *b >= 0.0)) {
                        return Err(parse_error("intervals must be ordered and stay away from 0"));
                    }
                }
                if urbanik_depth.is_some_and(|m| m > 4) {
                    return Err(parse_error("Urbanik depth is limited to 4"));
                }
            }
            CommandConfig::Fubini {
                basis,
                kernel,
                mu,
                sets,
                grid,
                replicas,
                ..
            } => {
                replicas_at_least_one(*replicas)?;
                basis.resolve()?;
                kernel.resolve()?;
                mu.resolve()?;
                if sets.is_empty() || sets.iter().any(|[a, b]| !(a < b)) {
                    return Err(parse_error("sets must be nonempty intervals [a, b] with a < b"));
                }
                if let Some(g) = grid {
                    g.resolve(0)?;
                }
            }
            CommandConfig::FieldProcess {
                spec,
                u,
                v,
                t_grid,
                check,
                theta,
                grid,
                replicas,
                ..
            } => {
                replicas_at_least_one(*replicas)?;
                spec.basis.resolve()?;
                spec.kernel.resolve()?;
                if u.is_empty() {
                    return Err(parse_error("at least one index point is required"));
                }
                if theta.iter().any(|t| t.len() != u.len()) {
                    return Err(parse_error("every θ vector needs one entry per index point"));
                }
                if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite()) {
                    return Err(parse_error("time grid must be nonempty and finite"));
                }
                match check {
                    FieldCheck::Consistency => match v {
                        Some(v) if u.iter().all(|x| v.contains(x)) => {}
                        _ => return Err(parse_error("the consistency check needs --v containing every --u point")),
                    },
                    FieldCheck::Simulate => match grid {
                        Some(g) => {
                            g.resolve(0)?;
                        }
                        None => return Err(parse_error("the simulation check needs --grid")),
                    },
                    FieldCheck::OuMarginal => {}
                }
            }
            CommandConfig::Cumulant {
                basis,
                kernel,
                u,
                theta,
            } => {
                basis.resolve()?;
                kernel.resolve()?;
                if u.is_empty() || u.len() != theta.len() {
                    return Err(parse_error("--u and --theta must be nonempty and of equal length"));
                }
            }
        }
        Ok(())
    }
}

/// Result of a command: report fields, optional CSV data, and whether a
/// check failed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: serde_json::Map<String, Value>,
    pub csv: Option<Vec<u8>>,
    pub failed: bool,
    pub summary: String,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn map(v: Value) -> serde_json::Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("reports are objects"),
    }
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}

pub fn execute(config: &crate::RunConfig) -> Result<Outcome, Error> {
    let seed = config.seed;
    match &config.command {
        CommandConfig::Simulate {
            basis,
            kernel,
            grid,
            replicas,
        } => {
            let q = basis.resolve()?;
            let k = kernel.resolve()?;
            let grid = grid.resolve(seed)?;
            let (values, diag) = simulate_common_noise(&q, &[k], &grid, *replicas)?;
            let us = grid.u_points.clone();
            let rows = values[0].iter().enumerate().flat_map(|(r, v)| {
                us.iter()
                    .zip(v)
                    .map(move |(u, x)| vec![r.to_string(), u.to_string(), x.to_string()])
                    .collect::<Vec<_>>()
            });
            let csv = csv_bytes(&["replica", "u", "value"], rows)?;
            Ok(Outcome {
                result: map(json!({
                    "n_cells": grid.n_cells(),
                    "replicas": replicas,
                    "u_points": us,
                    "diagnostics": diag,
                })),
                csv: Some(csv),
                failed: false,
                summary: format!("simulated {replicas} replicas on {} cells", grid.n_cells()),
            })
        }
        CommandConfig::Orlicz { basis, kernel, u, p } => {
            let q = basis.resolve()?;
            let k = kernel.resolve()?;
            let ctx = OrliczContext::new(q.clone(), *p)?;
            let report = phi_integral(&ctx, &Profile::section(&k, *u));
            let mut result = map(to_value(&report));
            if let (KernelFamily::Gamma { alpha }, true) = (&k.family, q.rho.is_constant()) {
                let v = gamma_kernel_integrable(q.gamma.eval(&[0.0]), q.b.eval(&[0.0]), &q.rho_at(&[0.0]), *alpha)?;
                result.insert("gamma_criterion".into(), to_value(&v));
            }
            Ok(Outcome {
                summary: format!("membership: {:?}, norm {}", report.member, report.norm),
                failed: report.member == Membership::No,
                result,
                csv: None,
            })
        }
        CommandConfig::SdCheck {
            basis,
            kernel,
            q_grid,
            intervals,
            u,
            s,
            urbanik_depth,
        } => {
            let q = basis.resolve()?;
            let seed_measure = q.rho_at(&[*s]);
            let iv: Option<Vec<(f64, f64)>> = intervals.as_ref().map(|v| v.iter().map(|[a, b]| (*a, *b)).collect());
            let iv_1d = iv.clone().unwrap_or_else(|| default_intervals(INTERVALS_1D));
            let one_d = dilation_check_1d(&seed_measure, q_grid, &iv_1d)?;
            let mut failed = !one_d.passed();
            let mut summary = format!("seed: {}", if one_d.passed() { "pass" } else { "fail" });
            let mut result = map(json!({ "seed": one_d }));
            if let Some(m) = urbanik_depth {
                let depth = urbanik_depth_1d(&seed_measure, q_grid, *m)?;
                result.insert("urbanik_depth".into(), json!(depth));
            }
            if let Some(kc) = kernel {
                let k = kc.resolve()?;
                let spec = MasterMeasureSpec::new(q, k.clone())?;
                let sets = match &iv {
                    Some(iv) => cylinders_from_intervals(u, iv)?,
                    None => default_cylinders(u, INTERVALS_FIELD)?,
                };
                let field = dilation_check_field(&spec, q_grid, &sets)?;
                failed |= !field.passed();
                summary.push_str(&format!(", field: {}", if field.passed() { "pass" } else { "fail" }));
                let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
                let dense: Vec<f64> = if hi > lo {
                    (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect()
                } else {
                    vec![lo]
                };
                result.insert("field".into(), to_value(&field));
                result.insert("charge_zero".into(), to_value(&charge_zero_precondition(&spec, &dense)));
                if k.is_stationary() {
                    let xi: Vec<f64> = (-200..=200).map(|j| j as f64 * 0.1).collect();
                    let v = match fourier_nonvanishing_check(&k, &xi) {
                        Ok(v) => to_value(&v),
                        Err(e) => json!({ "error": e.to_string() }),
                    };
                    result.insert("fourier".into(), v);
                }
            }
            Ok(Outcome {
                result,
                csv: None,
                failed,
                summary,
            })
        }
        CommandConfig::Fubini {
            basis,
            kernel,
            mu,
            sets,
            grid,
            replicas,
            override_check,
        } => {
            let q = basis.resolve()?;
            let k = kernel.resolve()?;
            let mu = mu.resolve()?;
            let ctx = OrliczContext::new(q.clone(), 1)?;
            let conditions = sets
                .iter()
                .map(|[a, b]| fubini_condition_check(&k, &mu, (*a, *b), &ctx))
                .collect::<Result<Vec<_>, _>>()?;
            let failed = conditions.iter().any(|c| c.verdict == FubiniVerdict::Fails);
            let holds = conditions.iter().all(|c| c.verdict == FubiniVerdict::Holds);
            let mut result = map(json!({ "conditions": conditions }));
            if grid.is_some() && !holds && !override_check {
                result.insert(
                    "sides".into(),
                    json!("skipped: the condition is not shown to hold on every set; pass --override to simulate"),
                );
            }
            if let Some(g) = grid.as_ref().filter(|_| holds || *override_check) {
                result.insert("verified".into(), json!(holds));
                let grid = g.resolve(seed)?;
                let iv: Vec<(f64, f64)> = sets.iter().map(|[a, b]| (*a, *b)).collect();
                let field = IntegratedField::new(&k, &mu, &iv, &grid)?;
                let law = BasisLaw::new(&q, &grid)?;
                let sides: Vec<_> = (0..*replicas)
                    .into_par_iter()
                    .map(|r| field.apply(&law.sample(grid.seed, r)))
                    .collect();
                result.insert("sides".into(), to_value(&sides));
                result.insert("diagnostics".into(), to_value(&law.diagnostics));
            }
            Ok(Outcome {
                summary: format!(
                    "Fubini condition: {}",
                    if failed { "fails" } else { "holds or undecided on every set" }
                ),
                result,
                csv: None,
                failed,
            })
        }
        CommandConfig::FieldProcess {
            spec,
            u,
            v,
            t_grid,
            check,
            theta,
            tol,
            grid,
            replicas,
        } => {
            let fs = FieldTripletSpec::volterra(spec.basis.resolve()?, spec.kernel.resolve()?)?;
            match check {
                FieldCheck::OuMarginal => {
                    let r = ou_field_marginal_check(&fs, u, theta, t_grid, &DEFAULT_Q_GRID)?;
                    let failed = !(r.max_discrepancy() <= *tol) || !r.dilation.passed();
                    Ok(Outcome {
                        summary: format!("max cumulant discrepancy {:e}", r.max_discrepancy()),
                        result: map(json!({ "ou_marginal": r, "max_discrepancy": r.max_discrepancy() })),
                        csv: None,
                        failed,
                    })
                }
                FieldCheck::Consistency => {
                    let v = v.as_ref().expect("validated");
                    let regions = axis_regions(u.len(), 5)?;
                    let ou = projection_consistency_check(&fs, &ou_profile(), u, v, &regions)?;
                    let unit = Profile::from_fn(|_| 1.0, 0.0, 1.0);
                    let ind = projection_consistency_check(&fs, &unit, u, v, &regions)?;
                    let worst = ou.max_rel.max(ind.max_rel);
                    Ok(Outcome {
                        summary: format!("max relative discrepancy {worst:e}"),
                        result: map(json!({ "ou": ou, "unit_indicator": ind, "max_rel": worst })),
                        csv: None,
                        failed: !(worst <= *tol),
                    })
                }
                FieldCheck::Simulate => {
                    let mut g = grid.clone().expect("validated");
                    g.u_points = u.clone();
                    let grid = g.resolve(seed)?;
                    let paths = simulate_field_process(&fs, &grid, t_grid, *replicas)?;
                    let n = paths.values.len() as f64;
                    let mut stats = Vec::new();
                    for (k, t) in t_grid.iter().enumerate() {
                        for (j, uu) in u.iter().enumerate() {
                            let mean = paths.values.iter().map(|p| p[k][j]).sum::<f64>() / n;
                            let var = if n > 1.0 {
                                paths.values.iter().map(|p| (p[k][j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
                            } else {
                                0.0
                            };
                            stats.push(json!({ "t": t, "u": uu, "mean": mean, "variance": var }));
                        }
                    }
                    let rows = paths.values.iter().enumerate().flat_map(|(r, p)| {
                        let mut out = Vec::new();
                        for (k, t) in t_grid.iter().enumerate() {
                            for (j, uu) in u.iter().enumerate() {
                                out.push(vec![r.to_string(), t.to_string(), uu.to_string(), p[k][j].to_string()]);
                            }
                        }
                        out
                    });
                    let csv = csv_bytes(&["replica", "t", "u", "value"], rows)?;
                    Ok(Outcome {
                        summary: format!("simulated {replicas} paths at {} times", t_grid.len()),
                        result: map(json!({ "moments": stats, "diagnostics": paths.diagnostics })),
                        csv: Some(csv),
                        failed: false,
                    })
                }
            }
        }
        CommandConfig::Cumulant {
            basis,
            kernel,
            u,
            theta,
        } => {
            let q = basis.resolve()?;
            let k = kernel.resolve()?;
            let c: Complex64 = cumulant_oracle(&q, &k, u, theta)?;
            Ok(Outcome {
                summary: format!("cumulant {} + {}i", c.re, c.im),
                result: map(json!({ "cumulant": c })),
                csv: None,
                failed: false,
            })
        }
    }
}
