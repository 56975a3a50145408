//! Numerical laboratory for nonlinear parabolic problems of p-Laplacian type
//! with a singular lower-order drift.
//!
//! The crate is organised bottom-up:
//!
//! * [`lorentz`] computes distribution functions, Lorentz and Marcinkiewicz
//!   norms, truncations and the distance of a function to `L^∞`.
//! * [`grid`] provides structured cell-centred grids, discrete gradients and
//!   the discrete norms used everywhere else.
//! * [`flux`], [`solver`] and [`psi`] integrate the Cauchy–Dirichlet problem
//!   in time, keep the discrete energy books, run the frozen-coefficient
//!   fixed-point and truncation schemes and evaluate the level-set estimate.
//! * [`gronwall`] solves scalar comparison ODEs, evaluates the closed-form
//!   decay majorants and fits decay rates to energy traces.
//! * [`experiments`] turns configuration files into runs, sweeps and
//!   on-disk artifacts, and hosts the acceptance criteria.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod experiments;
pub mod flux;
pub mod grid;
pub mod gronwall;
pub mod linalg;
pub mod lorentz;
pub mod psi;
pub mod solver;

pub use error::{Error, Result};
pub use flux::{Flux, ModelFlux, Truncated};
pub use grid::{Grid, GridFunction, GridKind, Point};
pub use lorentz::{LorentzExponents, SampledFunction, SobolevConstants};
pub use solver::{EnergyTrace, ProblemSpec, Trajectory};
