use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 20;

/// Dense `2^n` amplitude vector. Qubit `q` is bit `q` of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::Size {
                n,
                max: MAX_QUBITS,
                what: "statevector simulation",
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `R_Y(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]]`.
    pub fn apply_ry(&mut self, q: usize, theta: f64) {
        assert!(q < self.n, "qubit {q} out of range");
        let (s, c) = (theta / 2.0).sin_cos();
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = a0 * c - a1 * s;
                self.amps[i | bit] = a0 * s + a1 * c;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        assert!(control < self.n && target < self.n && control != target);
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    /// `sum_z |psi(z)|^2 E(z)`.
    pub fn expectation(&self, diagonal: &[f64]) -> f64 {
        self.amps
            .iter()
            .zip(diagonal)
            .map(|(a, e)| a.norm_sqr() * e)
            .sum()
    }

    /// Draw `shots` basis-state indices. Each measured bit is flipped with
    /// probability `readout_error`.
    pub fn sample(&self, shots: usize, readout_error: f64, rng: &mut Rng) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        let last_nonzero = cdf
            .iter()
            .rposition(|&c| c > 0.0)
            .unwrap_or(0);
        (0..shots)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let mut m = cdf.partition_point(|&c| c <= u).min(last_nonzero);
                if readout_error > 0.0 {
                    for q in 0..self.n {
                        if rng.random::<f64>() < readout_error {
                            m ^= 1 << q;
                        }
                    }
                }
                m
            })
            .collect()
    }
}

/// Rotation angles of the two-layer ansatz: `thetas[..n]` for the first
/// `R_Y` layer, `thetas[n..]` for the second.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzParams {
    pub thetas: Vec<f64>,
}

impl AnsatzParams {
    pub fn zeros(n: usize) -> Self {
        Self {
            thetas: vec![0.0; 2 * n],
        }
    }
}

/// `R_Y` layer, CNOT chain `q0 -> q1 -> ... -> q_{n-1}`, `R_Y` layer,
/// applied to `|0...0>`.
pub fn prepare_state(params: &AnsatzParams, n: usize) -> Result<Statevector> {
    if params.thetas.len() != 2 * n {
        return Err(Error::Contract(format!(
            "ansatz on {n} qubits needs {} angles, got {}",
            2 * n,
            params.thetas.len()
        )));
    }
    let mut psi = Statevector::zero(n)?;
    for q in 0..n {
        psi.apply_ry(q, params.thetas[q]);
    }
    for q in 1..n {
        psi.apply_cnot(q - 1, q);
    }
    for q in 0..n {
        psi.apply_ry(q, params.thetas[n + q]);
    }
    Ok(psi)
}
