//! Statevector VQE for diagonal Ising Hamiltonians.
//!
//! The ansatz is one `R_Y` layer, a linear CNOT chain and a second `R_Y`
//! layer. Parameters are optimised one at a time with the
//! Nakanishi-Fujii-Todo rule, which exploits the exact sinusoidal
//! dependence of the energy on each rotation angle.
//!
//! Readout convention: a QUBO variable `T_i = 1` maps to `Z_i = +1`, which
//! is qubit `i` measured as 0. Results are reported with that inversion
//! undone, so bit `i = 1` means triplet `i` is selected.

mod nft;
mod statevector;

pub use nft::{nft_update, wrap_angle, Sinusoid, FLAT_AMPLITUDE};
pub use statevector::{prepare_state, AnsatzParams, Statevector, MAX_QUBITS};

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{to_ising, Assignment, IsingHamiltonian, Qubo};
use crate::rng::{rng_from_seed, Rng};
use crate::solve::SubSolver;

/// Probability below which a basis state is not considered part of the
/// final state's support when `shots = 0`.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeConfig {
    /// Samples per energy estimate; 0 uses the exact expectation.
    pub shots: usize,
    /// Total number of energy evaluations.
    pub max_evaluations: usize,
    pub seed: u64,
    /// Independent bit-flip probability applied to every measured bit.
    pub readout_error: f64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            shots: 512,
            max_evaluations: 300,
            seed: 0,
            readout_error: 0.0,
        }
    }
}

impl VqeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations < 3 {
            return Err(Error::Config(format!(
                "max_evaluations {} too small for one parameter update",
                self.max_evaluations
            )));
        }
        if !(0.0..=1.0).contains(&self.readout_error) {
            return Err(Error::Config(format!(
                "readout_error {} outside [0, 1]",
                self.readout_error
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeResult {
    /// Lowest-energy bitstring encountered (bit = 1 selects the variable).
    pub best_bitstring: Assignment,
    pub best_energy: f64,
    /// Histogram of `shots` samples from the final state, most frequent
    /// first (ties by bitstring). Empty when `shots = 0`.
    pub counts: Vec<(Assignment, usize)>,
    pub final_params: AnsatzParams,
    pub evaluations: usize,
    /// Exact expectation value in the final state.
    pub final_expectation: f64,
}

impl VqeResult {
    pub fn most_frequent(&self) -> Option<&Assignment> {
        self.counts.first().map(|(a, _)| a)
    }
}

/// Selection bits of a measured basis index.
pub fn readout(index: usize, n: usize) -> Assignment {
    Assignment::from_bits((0..n).map(|q| (index >> q) & 1 == 0).collect())
}

/// Expected energy: exact for `shots = 0`, otherwise the mean over sampled
/// basis states.
pub fn energy_expectation(state: &Statevector, diagonal: &[f64], shots: usize, rng: &mut Rng) -> f64 {
    if shots == 0 {
        return state.expectation(diagonal);
    }
    let samples = state.sample(shots, 0.0, rng);
    samples.iter().map(|&m| diagonal[m]).sum::<f64>() / shots as f64
}

/// Histogram of `shots` samples, keyed by basis index.
pub fn sample_counts(
    state: &Statevector,
    shots: usize,
    readout_error: f64,
    rng: &mut Rng,
) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for m in state.sample(shots, readout_error, rng) {
        *counts.entry(m).or_default() += 1;
    }
    counts
}

struct Tracker<'a> {
    diagonal: &'a [f64],
    config: &'a VqeConfig,
    rng: Rng,
    evaluations: usize,
    best_index: Option<usize>,
    best_energy: f64,
}

impl Tracker<'_> {
    fn cost(&mut self, params: &AnsatzParams, n: usize) -> Result<f64> {
        self.evaluations += 1;
        let psi = prepare_state(params, n)?;
        if self.config.shots == 0 {
            return Ok(psi.expectation(self.diagonal));
        }
        let samples = psi.sample(self.config.shots, self.config.readout_error, &mut self.rng);
        let mut sum = 0.0;
        for m in samples {
            let e = self.diagonal[m];
            sum += e;
            self.consider(m, e);
        }
        Ok(sum / self.config.shots as f64)
    }

    fn consider(&mut self, m: usize, e: f64) {
        let better = match self.best_index {
            None => true,
            Some(b) => e < self.best_energy || (e == self.best_energy && m > b),
        };
        if better {
            self.best_index = Some(m);
            self.best_energy = e;
        }
    }
}

/// Minimise `<H>` over the ansatz with NFT coordinate sweeps until the
/// evaluation budget is spent.
///
/// The first update of a run samples all three points; later updates reuse
/// the reconstructed minimum as the value at the current angle, so each
/// costs two evaluations.
pub fn run_vqe(ising: &IsingHamiltonian, config: &VqeConfig) -> Result<VqeResult> {
    config.validate()?;
    let n = ising.n();
    if n > MAX_QUBITS {
        return Err(Error::Size {
            n,
            max: MAX_QUBITS,
            what: "statevector simulation",
        });
    }
    let diagonal = ising.diagonal()?;
    let mut rng = rng_from_seed(config.seed);
    let mut params = AnsatzParams {
        thetas: (0..2 * n).map(|_| rng.random_range(-PI..PI)).collect(),
    };
    let mut t = Tracker {
        diagonal: &diagonal,
        config,
        rng,
        evaluations: 0,
        best_index: None,
        best_energy: f64::INFINITY,
    };

    let mut current: Option<f64> = None;
    if n > 0 {
        'sweeps: loop {
            for p in 0..2 * n {
                let needed = if current.is_some() { 2 } else { 3 };
                if t.evaluations + needed > config.max_evaluations {
                    break 'sweeps;
                }
                let theta0 = params.thetas[p];
                let at = match current {
                    Some(v) => v,
                    None => t.cost(&params, n)?,
                };
                params.thetas[p] = theta0 + FRAC_PI_2;
                let plus = t.cost(&params, n)?;
                params.thetas[p] = theta0 - FRAC_PI_2;
                let minus = t.cost(&params, n)?;
                let (theta, value) = nft::step(theta0, at, plus, minus);
                params.thetas[p] = theta;
                current = Some(value);
            }
        }
    }

    let psi = prepare_state(&params, n)?;
    let final_expectation = psi.expectation(&diagonal);
    let mut counts_map = BTreeMap::new();
    if config.shots > 0 {
        counts_map = sample_counts(&psi, config.shots, config.readout_error, &mut t.rng);
        for &m in counts_map.keys() {
            t.consider(m, diagonal[m]);
        }
    } else {
        for (m, p) in psi.probabilities().iter().enumerate() {
            if *p > SUPPORT_THRESHOLD {
                t.consider(m, diagonal[m]);
            }
        }
    }
    let best_index = t
        .best_index
        .ok_or_else(|| Error::Solver("VQE produced no sample".into()))?;

    let mut counts: Vec<(Assignment, usize)> = counts_map
        .into_iter()
        .map(|(m, c)| (readout(m, n), c))
        .collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    Ok(VqeResult {
        best_bitstring: readout(best_index, n),
        best_energy: t.best_energy,
        counts,
        final_params: params,
        evaluations: t.evaluations,
        final_expectation,
    })
}

/// VQE as a sub-QUBO solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct VqeSolver(pub VqeConfig);

impl SubSolver for VqeSolver {
    fn name(&self) -> &'static str {
        "vqe"
    }

    fn solve(&self, qubo: &Qubo, seed: u64) -> Result<Assignment> {
        let config = VqeConfig { seed, ..self.0 };
        Ok(run_vqe(&to_ising(qubo), &config)?.best_bitstring)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::solve_exact;

    #[test]
    fn single_variable_selected() {
        let q = Qubo::new(vec![-1.0], []).unwrap();
        let r = run_vqe(&to_ising(&q), &VqeConfig::default()).unwrap();
        assert_eq!(r.best_bitstring.to_bitstring(), "1");
        assert_eq!(r.best_energy, -1.0);
        assert_eq!(r.counts.iter().map(|c| c.1).sum::<usize>(), 512);
    }

    #[test]
    fn readout_inverts_measured_bits() {
        assert_eq!(readout(0b001, 3).to_bitstring(), "011");
    }

    #[test]
    fn exact_mode_reaches_ground_state() {
        let q = Qubo::new(vec![0.4, -0.7, 0.2], [(0, 1, -0.95), (1, 2, 1.0)]).unwrap();
        let cfg = VqeConfig {
            shots: 0,
            ..Default::default()
        };
        let r = run_vqe(&to_ising(&q), &cfg).unwrap();
        assert_eq!(r.best_bitstring, solve_exact(&q).unwrap());
        assert!(r.counts.is_empty());
        assert!(r.evaluations <= cfg.max_evaluations);
    }

    #[test]
    fn uniform_superposition_average() {
        let mut psi = Statevector::zero(2).unwrap();
        psi.apply_ry(0, FRAC_PI_2);
        psi.apply_ry(1, FRAC_PI_2);
        let diag = [1.0, -2.0, 0.5, 4.5];
        let mut rng = rng_from_seed(0);
        assert!((energy_expectation(&psi, &diag, 0, &mut rng) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let q = Qubo::new(vec![0.1, -0.3], [(0, 1, 1.0)]).unwrap();
        let h = to_ising(&q);
        let cfg = VqeConfig {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(run_vqe(&h, &cfg).unwrap(), run_vqe(&h, &cfg).unwrap());
    }
}
