//! Storage dynamics of a waveguide-QED quantum battery.
//!
//! `L` two-level atoms sit in front of a mirror and decay collectively into a
//! one-dimensional waveguide. The first `M` atoms (the battery) start fully
//! excited; the crate propagates the collective Lindblad master equation and
//! tracks how much energy and ergotropy the battery keeps over time, for
//! ordered and position-disordered arrays.
//!
//! Units are fixed throughout: the single-atom waveguide emission rate is 1,
//! the excitation energy is 1, and every time is measured in inverse rate
//! units.
//!
//! Module map:
//! - [`qubit`] and [`sector`]: basis bookkeeping, operator kernels, partial
//!   trace and excitation-sector blocking.
//! - [`model`]: geometry, collective decay matrix and the master-equation
//!   right-hand side.
//! - [`propagator`]: adaptive and fixed-step Runge-Kutta propagation plus a
//!   small-system exponential oracle.
//! - [`observables`]: battery energy, site energies, ergotropy and the
//!   single-atom closed forms.
//! - [`ensemble`]: seeded disorder realizations and their aggregation.
//! - [`analysis`]: decay-rate fits, power-law scaling and the spacing sweep.

pub mod analysis;
pub mod ensemble;
mod error;
pub mod exec;
pub mod model;
pub mod observables;
pub mod policy;
pub mod propagator;
pub mod qubit;
pub mod sector;
mod sparse;

pub use error::{Error, Result};
pub use exec::Execution;

/// Complex scalar used for every state and operator entry.
pub type C64 = num_complex::Complex64;
