//! Finite-dimensional characteristic triplets.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::quadruplet::{expm1i, expm1i_minus_iy, tau};
use super::region::Region;
use crate::error::{invalid, Result};
use crate::quad::QuadOptions;

/// A Lévy measure on `ℝ^d` that can only be probed through integrals.
pub trait MeasureND: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// `∫ g(x) ν(dx)` for `g` vanishing to second order at the origin.
    fn integrate(&self, g: &dyn Fn(&[f64]) -> Complex64, opts: &QuadOptions) -> Result<Complex64>;

    /// `ν(region)`.
    fn region_mass(&self, region: &Region) -> Result<f64>;
}

/// `e^{i⟨θ,x⟩} − 1 − i⟨θ, τ(x)⟩`, evaluated without cancellation near 0.
pub fn lk_integrand(theta: &[f64], x: &[f64]) -> Complex64 {
    let dot: f64 = theta.iter().zip(x).map(|(t, v)| t * v).sum();
    if x.iter().all(|v| v.abs() <= 1.0) {
        return expm1i_minus_iy(dot);
    }
    let drift: f64 = theta.iter().zip(x).map(|(t, v)| t * tau(*v)).sum();
    expm1i(dot) - Complex64::new(0.0, drift)
}

/// `(γ_û, B_û, ν_û)` with `ν_û` available through quadrature.
#[derive(Debug, Clone)]
pub struct TripletND {
    pub dim: usize,
    pub gamma_vec: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    /// `None` is the zero measure.
    pub nu: Option<Arc<dyn MeasureND>>,
    /// Multiplier applied to `nu`.
    pub nu_weight: f64,
}

impl TripletND {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            gamma_vec: vec![0.0; dim],
            b: vec![vec![0.0; dim]; dim],
            nu: None,
            nu_weight: 0.0,
        }
    }

    pub fn new(gamma_vec: Vec<f64>, b: Vec<Vec<f64>>, nu: Option<Arc<dyn MeasureND>>) -> Result<Self> {
        let t = Self {
            dim: gamma_vec.len(),
            gamma_vec,
            b,
            nu_weight: if nu.is_some() { 1.0 } else { 0.0 },
            nu,
        };
        t.validate()?;
        Ok(t)
    }

    /// Triplet of the law at time `t` of the Lévy process with this
    /// triplet at time one.
    pub fn scaled(&self, t: f64) -> Self {
        let a = t.abs();
        Self {
            dim: self.dim,
            gamma_vec: self.gamma_vec.iter().map(|g| g * a).collect(),
            b: self
                .b
                .iter()
                .map(|row| row.iter().map(|v| v * a).collect())
                .collect(),
            nu: if a == 0.0 { None } else { self.nu.clone() },
            nu_weight: if a == 0.0 { 0.0 } else { self.nu_weight * a },
        }
    }

    pub fn has_jumps(&self) -> bool {
        self.nu.is_some() && self.nu_weight != 0.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| 0.5 * (self.b[i][j] + self.b[j][i]));
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_vec.len() != self.dim
            || self.b.len() != self.dim
            || self.b.iter().any(|r| r.len() != self.dim)
        {
            return invalid("triplet components disagree on the dimension");
        }
        for i in 0..self.dim {
            for j in 0..i {
                let (x, y) = (self.b[i][j], self.b[j][i]);
                if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                    return invalid(format!("B is not symmetric at ({i}, {j}): {x} vs {y}"));
                }
            }
        }
        let e = self.min_eigenvalue();
        if e < -1e-10 {
            return invalid(format!("B has negative eigenvalue {e}"));
        }
        if let Some(nu) = &self.nu {
            if nu.dim() != self.dim {
                return invalid("ν lives in a different dimension than the triplet");
            }
        }
        Ok(())
    }

    /// `i⟨γ,θ⟩ − ½θᵀBθ + ∫(e^{i⟨θ,x⟩} − 1 − i⟨θ,τ(x)⟩) ν(dx)`.
    pub fn cumulant(&self, theta: &[f64]) -> Result<Complex64> {
        if theta.len() != self.dim {
            return invalid(format!("θ has length {} but the triplet has dimension {}", theta.len(), self.dim));
        }
        let drift: f64 = self.gamma_vec.iter().zip(theta).map(|(g, t)| g * t).sum();
        let mut quad = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                quad += theta[i] * self.b[i][j] * theta[j];
            }
        }
        let mut out = Complex64::new(-0.5 * quad, drift);
        if self.has_jumps() && theta.iter().any(|t| *t != 0.0) {
            let nu = self.nu.as_ref().expect("checked");
            let g = |x: &[f64]| lk_integrand(theta, x);
            out += nu.integrate(&g, &QuadOptions::tight())? * self.nu_weight;
        }
        Ok(out)
    }

    /// `ν_û(region)` including the weight.
    pub fn nu_mass(&self, region: &Region) -> Result<f64> {
        match &self.nu {
            Some(nu) if self.nu_weight != 0.0 => Ok(self.nu_weight * nu.region_mass(region)?),
            _ => Ok(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_triplet_cumulant() {
        let t = TripletND::new(vec![1.0, 0.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]], None).unwrap();
        let c = t.cumulant(&[1.0, -1.0]).unwrap();
        assert_eq!(c, Complex64::new(-0.5 * (2.0 - 1.0 + 1.0), 1.0));
        let s = t.scaled(2.5);
        assert_eq!(s.b[0][0], 5.0);
        assert!(t.scaled(0.0).cumulant(&[3.0, 1.0]).unwrap() == Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_indefinite_or_asymmetric_b() {
        assert!(TripletND::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]], None).is_err());
        assert!(TripletND::new(vec![0.0, 0.0], vec![vec![1.0, 0.1], vec![0.0, 1.0]], None).is_err());
    }

    #[test]
    fn integrand_is_stable_near_zero() {
        let v = lk_integrand(&[1.0, 2.0], &[1e-9, -1e-9]);
        assert!((v.re + 0.5e-18).abs() < 1e-30);
    }
}
