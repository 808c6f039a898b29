//! Straight-line track reconstruction for a four-layer pixel tracker,
//! formulated as a quadratic unconstrained binary optimisation over
//! triplet candidates.
//!
//! The pipeline is:
//!
//! 1. [`fastsim`] generates toy events in the [`detector`] geometry.
//! 2. [`preselect`] builds doublets and triplets and applies the
//!    `dx/x0` and `delta_theta` cuts.
//! 3. [`qubo`] turns triplets into a QUBO (and its Ising form).
//! 4. [`solve`] minimises it, exactly, by simulated annealing, or through
//!    impact-ordered sub-QUBO iteration with a pluggable sub-solver such as
//!    the statevector [`vqe`].
//! 5. [`trackbuild`] joins selected triplets into four-hit tracks, fits
//!    them and resolves ambiguities.
//! 6. [`metrics`] scores the result against truth.
//!
//! [`pipeline`] wires the stages together and [`io`] holds the CSV/JSON
//! exchange formats used by the command-line front-end.

// Validation uses `!(x > 0.0)` style checks on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detector;
pub mod error;
pub mod event;
pub mod fastsim;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod preselect;
pub mod qubo;
pub mod rng;
pub mod solve;
pub mod trackbuild;
pub mod vqe;

pub use error::{Error, Result};
