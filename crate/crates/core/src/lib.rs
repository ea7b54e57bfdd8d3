//! Solver-plus-theory laboratory for the one-dimensional semilinear wave
//! equation with characteristic weights
//!
//! ```text
//! u_tt - u_xx = |u_t|^p / (<t+<x>>^{1+a} <t-<x>>^{1+b}),   <x> = sqrt(1+x^2),
//! u(x,0) = eps f(x),  u_t(x,0) = eps g(x).
//! ```
//!
//! * [`model`]: parameters, initial data, lattice and run records.
//! * [`kernels`]: weights, free waves and Duhamel quadratures.
//! * [`solver`]: characteristic time marching and Picard diagnostics.
//! * [`oracle`]: an independent leapfrog finite-difference solver.
//! * [`theory`]: regime tables, lifespan bounds and blow-up iteration algebra.
//! * [`harness`]: sweeps, exponent fits, a-priori ratio checks and the CLI.

// negated float comparisons are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod kernels;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
pub use model::{
    validate, BlowupCause, CharField, Family, GridSpec, InitialData, Lattice, LifespanEstimate,
    LifespanStatus, ModelParams, NodeField, Profile, RunConfig, Violation,
};
