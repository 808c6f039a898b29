//! Independent oracles and instance generators shared by the integration
//! tests. Nothing here calls into the solver code under test.

#![allow(dead_code)]

use rand::Rng;
use trackqubo::qubo::{Assignment, Qubo};
use trackqubo::rng::{rng_from_seed, Rng as ChaCha};

/// A QUBO kept as raw coefficient lists.
#[derive(Debug, Clone)]
pub struct RawQubo {
    pub linear: Vec<f64>,
    pub couplings: Vec<(usize, usize, f64)>,
}

impl RawQubo {
    pub fn build(&self) -> Qubo {
        Qubo::new(self.linear.clone(), self.couplings.iter().copied()).unwrap()
    }

    /// Sum over `a_i T_i` plus `b_ij T_i T_j`, with bit `i` of `index` as `T_i`.
    pub fn objective(&self, index: u64) -> f64 {
        let t = |i: usize| (index >> i) & 1 == 1;
        let mut e = 0.0;
        for (i, a) in self.linear.iter().enumerate() {
            if t(i) {
                e += a;
            }
        }
        for &(i, j, b) in &self.couplings {
            if t(i) && t(j) {
                e += b;
            }
        }
        e
    }

    /// Smallest index attaining the minimum, scanning every state.
    pub fn brute_force(&self) -> (Assignment, f64) {
        let n = self.linear.len();
        let mut best = (0u64, self.objective(0));
        for m in 1..1u64 << n {
            let e = self.objective(m);
            if e < best.1 {
                best = (m, e);
            }
        }
        (Assignment::from_index(best.0, n), best.1)
    }
}

/// Uniform coefficients in `[-1, 1]`, each pair coupled with probability
/// `density`.
pub fn random_qubo(rng: &mut ChaCha, n: usize, density: f64) -> RawQubo {
    let linear = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                couplings.push((i, j, rng.random_range(-1.0..=1.0)));
            }
        }
    }
    RawQubo { linear, couplings }
}

/// Coefficients shaped like triplet-selection problems: linear terms in
/// `[-1, 1]`, couplings either a conflict (+1) or a chain in `[-1, -0.9]`.
pub fn tracking_like_qubo(rng: &mut ChaCha, n: usize, density: f64) -> RawQubo {
    let linear = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let b = if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0 + 0.1 * rng.random::<f64>()
                };
                couplings.push((i, j, b));
            }
        }
    }
    RawQubo { linear, couplings }
}

pub fn is_connected(n: usize, couplings: &[(usize, usize, f64)]) -> bool {
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(i, j, _) in couplings {
            let other = if i == v {
                j
            } else if j == v {
                i
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                stack.push(other);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn rng(seed: u64) -> ChaCha {
    rng_from_seed(seed)
}
