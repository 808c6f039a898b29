use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SubSolver;
use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};
use crate::rng::derive_seed;

/// Restriction of a QUBO to a variable subset, with interactions to the
/// frozen outside variables folded into the linear terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SubQubo {
    /// Global variable indices, ascending. Local variable `l` is
    /// `indices[l]`.
    pub indices: Vec<usize>,
    /// Local problem; its linear terms are `a_i + sum_{j outside} b_ij T_j`.
    pub qubo: Qubo,
    /// Objective contributed by the outside variables alone, so that
    /// `full(merge(s)) = qubo(s) + outside_objective`.
    pub outside_objective: f64,
}

impl SubQubo {
    pub fn linear_effective(&self) -> &[f64] {
        self.qubo.linear()
    }

    /// Write a local solution into a copy of `base`.
    pub fn merge(&self, base: &Assignment, local: &Assignment) -> Assignment {
        let mut out = base.clone();
        for (l, &g) in self.indices.iter().enumerate() {
            out.set(g, local.get(l));
        }
        out
    }
}

/// Restrict `qubo` to `indices` (sorted internally) at `assignment`.
pub fn extract_subqubo(qubo: &Qubo, assignment: &Assignment, indices: &[usize]) -> Result<SubQubo> {
    let n = qubo.n();
    if assignment.len() != n {
        return Err(Error::Contract(format!(
            "assignment length {} does not match QUBO size {n}",
            assignment.len()
        )));
    }
    let mut indices = indices.to_vec();
    indices.sort_unstable();
    indices.dedup();
    let mut local = vec![usize::MAX; n];
    for (l, &g) in indices.iter().enumerate() {
        if g >= n {
            return Err(Error::Contract(format!("variable {g} out of range")));
        }
        local[g] = l;
    }

    let bits = assignment.bits();
    let mut linear: Vec<f64> = indices.iter().map(|&g| qubo.linear()[g]).collect();
    let mut couplings = Vec::new();
    let mut outside_objective = 0.0;
    for (g, &a) in qubo.linear().iter().enumerate() {
        if local[g] == usize::MAX && bits[g] {
            outside_objective += a;
        }
    }
    for &(i, j, b) in qubo.quadratic() {
        match (local[i] != usize::MAX, local[j] != usize::MAX) {
            (true, true) => couplings.push((local[i], local[j], b)),
            (true, false) if bits[j] => linear[local[i]] += b,
            (false, true) if bits[i] => linear[local[j]] += b,
            (false, false) if bits[i] && bits[j] => outside_objective += b,
            _ => {}
        }
    }
    Ok(SubQubo {
        indices,
        qubo: Qubo::new(linear, couplings)?,
        outside_objective,
    })
}

/// Variable groups in descending `|impact|` order (ties by index), each
/// group of at most `k` variables.
pub fn impact_groups(qubo: &Qubo, assignment: &Assignment, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::Config("sub-QUBO size must be at least 1".into()));
    }
    let mut order: Vec<(usize, f64)> = (0..qubo.n())
        .map(|i| qubo.impact(assignment, i).map(|v| (i, v.abs())))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(order
        .chunks(k)
        .map(|c| c.iter().map(|&(i, _)| i).collect())
        .collect())
}

/// Groups grown along couplings: the highest-|impact| unassigned variable
/// seeds a group, which then absorbs its highest-|impact| unassigned
/// neighbour until it holds `k` variables. A group with no free neighbours
/// left continues with the next unassigned variable in impact order, so
/// without couplings this reduces to [`impact_groups`], and a connected
/// block of exactly `k` variables always forms its own group.
pub fn connected_impact_groups(
    qubo: &Qubo,
    assignment: &Assignment,
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::Config("sub-QUBO size must be at least 1".into()));
    }
    let n = qubo.n();
    let mut rank = vec![0usize; n];
    let order: Vec<usize> = impact_groups(qubo, assignment, 1)?
        .into_iter()
        .flatten()
        .collect();
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut assigned = vec![false; n];
    let mut groups = Vec::new();
    let mut next_free = 0;
    while let Some(off) = order[next_free..].iter().position(|&i| !assigned[i]) {
        next_free += off;
        let seed = order[next_free];
        assigned[seed] = true;
        let mut group = vec![seed];
        // candidates keyed by impact rank
        let mut frontier = std::collections::BTreeSet::new();
        let push = |v: usize, f: &mut std::collections::BTreeSet<(usize, usize)>, a: &[bool]| {
            for &(j, _) in qubo.neighbours(v) {
                if !a[j] {
                    f.insert((rank[j], j));
                }
            }
        };
        push(seed, &mut frontier, &assigned);
        while group.len() < k {
            let v = match frontier.pop_first() {
                Some((_, v)) if assigned[v] => continue,
                Some((_, v)) => v,
                // no free neighbour left: continue with the next variable in
                // impact order
                None => match order[next_free..].iter().position(|&i| !assigned[i]) {
                    Some(off) => order[next_free + off],
                    None => break,
                },
            };
            assigned[v] = true;
            group.push(v);
            push(v, &mut frontier, &assigned);
        }
        groups.push(group);
    }
    Ok(groups)
}

/// How variables are cut into sub-QUBOs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Consecutive runs of `k` in descending `|impact|` order.
    Impact,
    /// Impact-seeded groups grown along non-zero couplings.
    #[default]
    ConnectedImpact,
}

pub fn group_variables(
    qubo: &Qubo,
    assignment: &Assignment,
    k: usize,
    grouping: Grouping,
) -> Result<Vec<Vec<usize>>> {
    match grouping {
        Grouping::Impact => impact_groups(qubo, assignment, k),
        Grouping::ConnectedImpact => connected_impact_groups(qubo, assignment, k),
    }
}

/// Impact-ordered partition of all variables into sub-QUBOs of size `<= k`,
/// using the default [`Grouping`].
pub fn extract_subqubos(qubo: &Qubo, assignment: &Assignment, k: usize) -> Result<Vec<SubQubo>> {
    extract_subqubos_with(qubo, assignment, k, Grouping::default())
}

pub fn extract_subqubos_with(
    qubo: &Qubo,
    assignment: &Assignment,
    k: usize,
    grouping: Grouping,
) -> Result<Vec<SubQubo>> {
    group_variables(qubo, assignment, k, grouping)?
        .iter()
        .map(|g| extract_subqubo(qubo, assignment, g))
        .collect()
}

/// How sub-solutions within one iteration see each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// All sub-QUBOs of an iteration are extracted from the same assignment
    /// and solved concurrently, then merged in order.
    #[default]
    Jacobi,
    /// Each sub-QUBO is extracted after the previous one was merged.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterativeConfig {
    pub subqubo_size: usize,
    pub max_iterations: usize,
    pub update_rule: UpdateRule,
    pub grouping: Grouping,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        Self {
            subqubo_size: 7,
            max_iterations: 10,
            update_rule: UpdateRule::Jacobi,
            grouping: Grouping::ConnectedImpact,
        }
    }
}

impl IterativeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subqubo_size == 0 || self.max_iterations == 0 {
            return Err(Error::Config(format!(
                "subqubo_size ({}) and max_iterations ({}) must be at least 1",
                self.subqubo_size, self.max_iterations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub subqubo_size: usize,
    pub n_variables: usize,
    pub best_assignment: Assignment,
    pub best_objective: f64,
    pub iterations_run: usize,
    /// Sub-problems solved over all iterations.
    pub subqubo_count: usize,
    /// Objective of the starting assignment, then after each iteration.
    pub objective_trace: Vec<f64>,
    /// Set when a sub-solve failed and the run stopped early.
    pub warning: Option<String>,
}

/// Iterative sub-QUBO minimisation starting from all variables selected.
///
/// Each iteration orders variables by `|impact|`, cuts them into groups of
/// `subqubo_size`, solves every group with `subsolver` and merges the
/// results one by one, keeping a merge only if the global objective does
/// not increase. Stops after `max_iterations` or when an iteration leaves
/// the assignment unchanged.
pub fn solve_iterative(
    qubo: &Qubo,
    subsolver: &dyn SubSolver,
    config: &IterativeConfig,
    seed: u64,
) -> Result<SolveReport> {
    config.validate()?;
    let mut current = Assignment::ones(qubo.n());
    let mut value = qubo.objective(&current)?;
    let mut report = SolveReport {
        solver: subsolver.name().to_string(),
        subqubo_size: config.subqubo_size,
        n_variables: qubo.n(),
        best_assignment: current.clone(),
        best_objective: value,
        iterations_run: 0,
        subqubo_count: 0,
        objective_trace: vec![value],
        warning: None,
    };
    if qubo.n() == 0 {
        return Ok(report);
    }

    for iteration in 0..config.max_iterations {
        let before = current.clone();
        let outcome = match config.update_rule {
            UpdateRule::Jacobi => jacobi_step(
                qubo, subsolver, config, seed, iteration, &mut current, &mut value,
            ),
            UpdateRule::GaussSeidel => gauss_seidel_step(
                qubo, subsolver, config, seed, iteration, &mut current, &mut value,
            ),
        };
        report.iterations_run = iteration + 1;
        match outcome {
            Ok(count) => report.subqubo_count += count,
            Err(e) => {
                warn!("iteration {iteration} aborted: {e}");
                report.warning = Some(format!("iteration {iteration} aborted: {e}"));
                current = before;
                value = qubo.objective(&current)?;
                report.objective_trace.push(value);
                break;
            }
        }
        report.objective_trace.push(value);
        if current == before {
            break;
        }
    }
    report.best_objective = value;
    report.best_assignment = current;
    Ok(report)
}

/// Merge `local` if it does not raise the objective.
fn accept(
    qubo: &Qubo,
    sub: &SubQubo,
    local: &Assignment,
    current: &mut Assignment,
    value: &mut f64,
) -> Result<()> {
    if local.len() != sub.indices.len() {
        return Err(Error::Solver(format!(
            "sub-solver returned {} bits for a {}-variable problem",
            local.len(),
            sub.indices.len()
        )));
    }
    let candidate = sub.merge(current, local);
    let v = qubo.objective(&candidate)?;
    if v <= *value {
        *current = candidate;
        *value = v;
    }
    Ok(())
}

fn jacobi_step(
    qubo: &Qubo,
    subsolver: &dyn SubSolver,
    config: &IterativeConfig,
    seed: u64,
    iteration: usize,
    current: &mut Assignment,
    value: &mut f64,
) -> Result<usize> {
    let subs = extract_subqubos_with(qubo, current, config.subqubo_size, config.grouping)?;
    let solutions: Vec<Result<Assignment>> = subs
        .par_iter()
        .enumerate()
        .map(|(g, sub)| subsolver.solve(&sub.qubo, derive_seed(seed, &[iteration as u64, g as u64])))
        .collect();
    // Validate everything first so a failure leaves `current` untouched.
    let solutions: Vec<Assignment> = solutions.into_iter().collect::<Result<_>>()?;
    for (sub, local) in subs.iter().zip(&solutions) {
        accept(qubo, sub, local, current, value)?;
    }
    Ok(subs.len())
}

fn gauss_seidel_step(
    qubo: &Qubo,
    subsolver: &dyn SubSolver,
    config: &IterativeConfig,
    seed: u64,
    iteration: usize,
    current: &mut Assignment,
    value: &mut f64,
) -> Result<usize> {
    let groups = group_variables(qubo, current, config.subqubo_size, config.grouping)?;
    for (g, group) in groups.iter().enumerate() {
        let sub = extract_subqubo(qubo, current, group)?;
        let local = subsolver.solve(&sub.qubo, derive_seed(seed, &[iteration as u64, g as u64]))?;
        accept(qubo, &sub, &local, current, value)?;
    }
    Ok(groups.len())
}
