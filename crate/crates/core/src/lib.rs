//! Numerical core for selfdecomposable random fields driven by Lévy bases.

pub mod error;
pub mod expr;
pub mod field_process;
pub mod integrated_fields;
pub mod kernel;
pub mod levy_core;
pub mod orlicz;
pub mod quad;
pub mod sd_analysis;
pub mod special;
pub mod volterra_sim;

pub use error::{Error, Result};
