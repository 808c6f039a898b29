//! QUBO minimisers: exhaustive enumeration, simulated annealing, and the
//! impact-ordered iterative sub-QUBO scheme with a pluggable sub-solver.

mod anneal;
mod exact;
mod iterative;

pub use anneal::{solve_annealing, AnnealSchedule};
pub use exact::{solve_exact, MAX_EXACT_VARIABLES, TIE_TOLERANCE};
pub use iterative::{
    connected_impact_groups, extract_subqubo, extract_subqubos, extract_subqubos_with,
    group_variables, impact_groups, Grouping, solve_iterative, IterativeConfig,
    SolveReport, SubQubo, UpdateRule,
};

use crate::error::Result;
use crate::qubo::{Assignment, Qubo};

/// Anything that can minimise a small QUBO.
pub trait SubSolver: Sync {
    fn name(&self) -> &'static str;

    /// `seed` is derived per sub-problem; deterministic solvers ignore it.
    fn solve(&self, qubo: &Qubo, seed: u64) -> Result<Assignment>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolver;

impl SubSolver for ExactSolver {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, qubo: &Qubo, _seed: u64) -> Result<Assignment> {
        solve_exact(qubo)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnnealSolver(pub AnnealSchedule);

impl SubSolver for AnnealSolver {
    fn name(&self) -> &'static str {
        "anneal"
    }

    fn solve(&self, qubo: &Qubo, seed: u64) -> Result<Assignment> {
        solve_annealing(qubo, &self.0, seed)
    }
}
