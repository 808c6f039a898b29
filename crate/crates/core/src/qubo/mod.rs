//! The triplet-selection objective, its Ising form, and coefficient
//! assembly from triplet candidates.

mod build;
mod ising;
mod model;

pub use build::{
    assemble_qubo, chained_angle_spread, linear_coefficient, pair_relation, percentile,
    quadratic_coefficient, truth_quadruplet_spreads, PairRelation, QuboScaling, DEFAULT_S_MAX,
};
pub use ising::{to_ising, IsingHamiltonian};
pub use model::{Assignment, Qubo};
