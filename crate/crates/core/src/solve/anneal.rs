use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{Assignment, Qubo};
use crate::rng::rng_from_seed;

/// Geometric cooling schedule for single-flip Metropolis annealing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub initial_temperature: f64,
    pub final_temperature: f64,
    /// One sweep proposes a flip of every variable once.
    pub sweeps: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: 2.0,
            final_temperature: 0.01,
            sweeps: 500,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature > 0.0)
            || !(self.final_temperature > 0.0)
            || self.final_temperature > self.initial_temperature
        {
            return Err(Error::Config(format!(
                "annealing temperatures must satisfy 0 < final ({}) <= initial ({})",
                self.final_temperature, self.initial_temperature
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::Config("annealing needs at least one sweep".into()));
        }
        Ok(())
    }
}

/// Simulated annealing from a random start; returns the best state seen.
pub fn solve_annealing(qubo: &Qubo, schedule: &AnnealSchedule, seed: u64) -> Result<Assignment> {
    schedule.validate()?;
    let n = qubo.n();
    let mut rng = rng_from_seed(seed);
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut value = qubo.objective_unchecked(&bits);
    let mut best = bits.clone();
    let mut best_value = value;
    if n == 0 {
        return Ok(Assignment::from_bits(best));
    }

    let ratio = if schedule.sweeps > 1 {
        (schedule.final_temperature / schedule.initial_temperature)
            .powf(1.0 / (schedule.sweeps - 1) as f64)
    } else {
        1.0
    };
    let mut temperature = schedule.initial_temperature;
    for _ in 0..schedule.sweeps {
        for i in 0..n {
            let delta = qubo.flip_delta(&bits, i);
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp() {
                bits[i] = !bits[i];
                value += delta;
                if value < best_value {
                    best_value = value;
                    best.clone_from(&bits);
                }
            }
        }
        temperature *= ratio;
    }
    Ok(Assignment::from_bits(best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_negative_variable_selected() {
        let q = Qubo::new(vec![-1.0], []).unwrap();
        let ok = (0..100)
            .filter(|&s| {
                solve_annealing(&q, &AnnealSchedule::default(), s)
                    .unwrap()
                    .get(0)
            })
            .count();
        assert!(ok >= 99);
    }

    #[test]
    fn deterministic_per_seed() {
        let q = Qubo::new(vec![-0.3, 0.2, -0.1], [(0, 1, -0.95), (1, 2, 1.0)]).unwrap();
        let s = AnnealSchedule::default();
        assert_eq!(
            solve_annealing(&q, &s, 42).unwrap(),
            solve_annealing(&q, &s, 42).unwrap()
        );
    }

    #[test]
    fn invalid_schedule_rejected() {
        let q = Qubo::zero(1);
        let s = AnnealSchedule {
            initial_temperature: 0.0,
            ..Default::default()
        };
        assert!(solve_annealing(&q, &s, 0).is_err());
        let s = AnnealSchedule {
            sweeps: 0,
            ..Default::default()
        };
        assert!(solve_annealing(&q, &s, 0).is_err());
    }
}
