//! Time-marching solvers: the production spherically symmetric solver and
//! a low-order 3D Cartesian oracle used for cross-validation.

pub mod cart3d;
pub mod radial;

pub use cart3d::{run_compare, CartesianState, CompareReport};
pub use radial::{
    cfl_dt, evolve_t_form, rhs_radial, run, step, BreakdownReason, RadialState, RunOutcome,
    RunResult, RunSetup, SchemeConfig, StepOutcome,
};
