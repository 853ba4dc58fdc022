//! Numerical laboratory for the 3D compressible upper convected Maxwell
//! (UCM) viscoelastic system in spherical symmetry.
//!
//! The crate provides:
//! - the constitutive layer (stress/conformation conversion, pressure,
//!   energy densities, characteristic speed bounds) in [`model`],
//! - construction of admissible large initial data in [`initial_data`],
//! - a second-order radial finite-volume solver and a first-order 3D
//!   Cartesian oracle in [`solver`],
//! - functional diagnostics (mass, momentum moment, energy identity and
//!   inequality checks) in [`diagnostics`],
//! - blow-up criterion evaluation and Riccati lifespan bounds in
//!   [`riccati`],
//! - run configuration and file formats in [`config`] and [`io`].
//!
//! All core math is generic over the scalar type via [`scalar::Real`]
//! (f32 or f64); the aliases below pin the default f64 instantiation.

pub mod config;
pub mod diagnostics;
pub mod grid;
pub mod initial_data;
pub mod io;
pub mod mat3;
pub mod model;
pub mod riccati;
pub mod scalar;
pub mod solver;

pub use scalar::Real;

/// Default scalar for solvers and the CLI.
pub type Scalar = f64;

pub type Parameters64 = model::Parameters<Scalar>;
pub type PointState64 = model::PointState<Scalar>;
pub type RadialPointState64 = model::RadialPointState<Scalar>;
pub type RadialGrid64 = grid::RadialGrid<Scalar>;
pub type ProfileSpec64 = initial_data::ProfileSpec<Scalar>;
pub type InitialData64 = initial_data::InitialData<Scalar>;
pub type BlowupReport64 = riccati::BlowupReport<Scalar>;
pub type DiagnosticsRecord64 = diagnostics::DiagnosticsRecord<Scalar>;
