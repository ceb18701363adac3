//! Road-field SIR epidemic propagation.
//!
//! * [`model`]: parameters, the KPP reaction and derived scalars.
//! * [`dispersion`]: decay exponents and spreading speeds from plane-wave
//!   systems, including the reduced speed curve.
//! * [`pde`]: explicit finite-difference integration of the transformed and
//!   direct systems on a truncated half-plane.
//! * [`analysis`]: fronts, speeds, decay rates, peak times, regions and
//!   integral balances extracted from simulation output.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
mod bisect;
pub mod dispersion;
pub mod error;
pub mod model;
pub mod pde;

pub use dispersion::{
    c_sirt, decay_exponents, decay_exponents_perturbed, omega_reduced, reduced_speed,
    speed_admissible, DispersionTriple, SpeedQuery,
};
pub use error::{AnalysisError, DispersionError, ModelError, PdeError};
pub use model::{ModelParams, ReducedParams};
