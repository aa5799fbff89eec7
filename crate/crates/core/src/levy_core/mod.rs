//! Lévy measures, quadruplets of Lévy bases and finite-dimensional triplets.

pub mod measure;
pub mod quadruplet;
pub mod region;
pub mod triplet;

pub use measure::{Atom, Density, JumpSampler, LevyMeasure1D, Side};
pub use quadruplet::{
    basis_cumulant, cumulant_exponent, log_moment_check, psi, truncate, BasisFlags,
    ControlMeasure, LevyQuadruplet, MomentVerdict, ParamFn, RhoField,
};
pub use region::{Rect, Region, ORIGIN_GAP};
pub use triplet::{lk_integrand, MeasureND, TripletND};
