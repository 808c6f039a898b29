use serde::{Deserialize, Serialize};

use super::model::{Assignment, Qubo};
use crate::error::{Error, Result};

/// Diagonal spin Hamiltonian
/// `H = c + sum_i h_i Z_i + sum_{i<j} J_ij Z_i Z_j`.
///
/// Obtained from a [`Qubo`] through `T_i = (1 + Z_i) / 2`, so `T_i = 1`
/// corresponds to `Z_i = +1`, i.e. qubit `i` in `|0>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingHamiltonian {
    pub constant: f64,
    pub field: Vec<f64>,
    pub coupling: Vec<(usize, usize, f64)>,
}

impl IsingHamiltonian {
    pub fn n(&self) -> usize {
        self.field.len()
    }

    /// Energy of a spin configuration, `spins[i]` in `{-1, +1}`.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = self.constant;
        for (h, &s) in self.field.iter().zip(spins) {
            e += h * s as f64;
        }
        for &(i, j, jij) in &self.coupling {
            e += jij * (spins[i] * spins[j]) as f64;
        }
        e
    }

    /// Spins corresponding to a binary assignment (`T = 1 -> Z = +1`).
    pub fn spins_of(assignment: &Assignment) -> Vec<i8> {
        assignment
            .bits()
            .iter()
            .map(|&t| if t { 1 } else { -1 })
            .collect()
    }

    /// Energy of every computational basis state. Entry `m` is the state in
    /// which qubit `i` reads `(m >> i) & 1`; reading 0 means `Z_i = +1`.
    pub fn diagonal(&self) -> Result<Vec<f64>> {
        let n = self.n();
        if n > 30 {
            return Err(Error::Size {
                n,
                max: 30,
                what: "dense Ising diagonal",
            });
        }
        let dim = 1usize << n;
        let mut out = Vec::with_capacity(dim);
        for m in 0..dim {
            let z = |i: usize| if (m >> i) & 1 == 0 { 1.0 } else { -1.0 };
            let mut e = self.constant;
            for (i, h) in self.field.iter().enumerate() {
                e += h * z(i);
            }
            for &(i, j, jij) in &self.coupling {
                e += jij * z(i) * z(j);
            }
            out.push(e);
        }
        Ok(out)
    }
}

/// Substitute `T_i = (1 + Z_i) / 2` into the QUBO objective.
pub fn to_ising(qubo: &Qubo) -> IsingHamiltonian {
    let mut constant = 0.0;
    let mut field: Vec<f64> = qubo.linear().iter().map(|a| a / 2.0).collect();
    constant += qubo.linear().iter().sum::<f64>() / 2.0;
    let mut coupling = Vec::with_capacity(qubo.quadratic().len());
    for &(i, j, b) in qubo.quadratic() {
        constant += b / 4.0;
        field[i] += b / 4.0;
        field[j] += b / 4.0;
        coupling.push((i, j, b / 4.0));
    }
    IsingHamiltonian {
        constant,
        field,
        coupling,
    }
}
