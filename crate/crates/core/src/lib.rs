//! Spectral toolbox for coupled condensate / pair-kernel dynamics on
//! periodic boxes, plus the estimate laboratory built on top of it:
//!
//! - grids, fields, and two-point kernels with one shared FFT axis engine;
//! - short-range interaction profiles with resolution and support guards;
//! - the coupled evolution equations, integrated by a symmetric split step;
//! - inhomogeneous-evolution (Duhamel) reconstructions and resolvent-style
//!   identities checked at the discrete level;
//! - local observables (density, current, stress, pressure) and their
//!   conservation-law residuals;
//! - interaction-Morawetz assembly with mollified weights;
//! - mixed-norm machinery: sheared frames, spacetime norms, admissible
//!   exponent pairs, two-particle Sobolev scales;
//! - a dispersive decay laboratory for factorized kernels.
//!
//! Everything is generic over the real scalar (`f64` by default, `f32`
//! compiles and is smoke-tested); the concrete aliases at the root are what
//! most callers want.

pub mod data;
pub mod duhamel;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod norms;
pub mod observables;
pub mod potential;
pub mod scalar;
pub mod state;
pub mod tol;

pub use data::{gaussian_packet, gaussian_pair_profile};
pub use duhamel::{
    duhamel_solve, exchange_pair_propagate, free_pair_propagate, pair_propagate,
    potential_pair_propagate, resolvent_identity_residual, PairResolventResiduals,
};
pub use dynamics::{
    collision_bv, evolve, evolve_with, rhs_all, rhs_gamma, rhs_lambda, rhs_phi, strang_step,
    Rhs, Trajectory,
};
pub use error::{CoreError, Result};
pub use field::Field;
pub use grid::Grid;
pub use kernel::{Kernel, KernelSymmetry};
pub use norms::{
    admissible_pairs, bourgain_partition, dual_strichartz, frame_norm, mixed_sobolev,
    mixed_space_norm, restricted_strichartz, rotated_mixed_norm, spacetime_strichartz_norm,
    Frame, OuterAxis, ADMISSIBLE_SAMPLE,
};
pub use observables::{
    cauchy_schwarz_defect, continuity_residual, interaction_force, kinetic_density,
    momentum_density, morawetz_action, morawetz_rate_terms, particle_number,
    stress_and_pressure, total_energy, StressPressure,
};
pub use potential::{Potential, Profile};
pub use scalar::{abs2, cabs, cis, Scalar};
pub use state::{sinh_series, HfbState};

/// Default real scalar.
pub type Real = f64;
/// Default complex scalar.
pub type C64 = num_complex::Complex<f64>;
/// Grid over the default scalar.
pub type Grid64 = Grid<f64>;
/// Field over the default scalar.
pub type Field64 = Field<f64>;
