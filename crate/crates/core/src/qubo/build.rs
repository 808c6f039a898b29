use serde::{Deserialize, Serialize};

use super::model::Qubo;
use crate::error::{Error, Result};
use crate::preselect::Triplet;

/// Default `s_max` when no truth calibration is available (rad).
pub const DEFAULT_S_MAX: f64 = 5e-4;

/// Scaling constants for the QUBO coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuboScaling {
    /// `delta_theta` mapped to `a = +1` (rad).
    pub theta_scale: f64,
    /// Angle spread mapped to `b = -0.9` (rad).
    pub s_max: f64,
    /// Percentile of the truth-quadruplet spread used for `s_max`.
    pub s_max_percentile: f64,
}

impl Default for QuboScaling {
    fn default() -> Self {
        Self {
            theta_scale: 1e-3,
            s_max: DEFAULT_S_MAX,
            s_max_percentile: 99.0,
        }
    }
}

impl QuboScaling {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_scale > 0.0) || !(self.s_max > 0.0) {
            return Err(Error::Config(format!(
                "theta_scale ({}) and s_max ({}) must be positive",
                self.theta_scale, self.s_max
            )));
        }
        if !(0.0..=100.0).contains(&self.s_max_percentile) {
            return Err(Error::Config(format!(
                "s_max_percentile {} outside [0, 100]",
                self.s_max_percentile
            )));
        }
        Ok(())
    }
}

/// `a_i = clamp(2 delta_theta / theta_scale - 1, -1, 1)`.
pub fn linear_coefficient(triplet: &Triplet, theta_scale: f64) -> f64 {
    (2.0 * triplet.delta_theta / theta_scale - 1.0).clamp(-1.0, 1.0)
}

/// How two triplets relate through their hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRelation {
    /// Share two hits and extend each other into a four-hit quadruplet.
    /// `first` is the triplet on the inner layers.
    Chained { first_is_i: bool },
    /// Share at least one hit without chaining.
    Conflict,
    Disjoint,
}

pub fn pair_relation(ti: &Triplet, tj: &Triplet) -> PairRelation {
    let chains = |a: &Triplet, b: &Triplet| a.hits[1] == b.hits[0] && a.hits[2] == b.hits[1];
    if chains(ti, tj) {
        return PairRelation::Chained { first_is_i: true };
    }
    if chains(tj, ti) {
        return PairRelation::Chained { first_is_i: false };
    }
    if ti.hits.iter().any(|h| tj.hits.contains(h)) {
        PairRelation::Conflict
    } else {
        PairRelation::Disjoint
    }
}

/// Combined spread of the doublet angles of a chained pair:
/// `sqrt(var(theta_xz) + var(theta_yz))` over its three distinct doublets
/// (population variance).
pub fn chained_angle_spread(first: &Triplet, second: &Triplet) -> f64 {
    let d = [
        first.doublet_angles[0],
        first.doublet_angles[1],
        second.doublet_angles[1],
    ];
    // var = (1/n^2) sum_{i<j} (x_i - x_j)^2, exactly zero for equal angles
    let var = |f: fn(&(f64, f64)) -> f64| {
        let (a, b, c) = (f(&d[0]), f(&d[1]), f(&d[2]));
        ((a - b).powi(2) + (a - c).powi(2) + (b - c).powi(2)) / 9.0
    };
    (var(|a| a.0) + var(|a| a.1)).sqrt()
}

/// `b_ij`: `-1 + 0.1 clamp(s / s_max)` for chained pairs, `1` for
/// conflicts, `0` otherwise.
pub fn quadratic_coefficient(ti: &Triplet, tj: &Triplet, s_max: f64) -> f64 {
    match pair_relation(ti, tj) {
        PairRelation::Chained { first_is_i } => {
            let s = if first_is_i {
                chained_angle_spread(ti, tj)
            } else {
                chained_angle_spread(tj, ti)
            };
            -1.0 + 0.1 * (s / s_max).clamp(0.0, 1.0)
        }
        PairRelation::Conflict => 1.0,
        PairRelation::Disjoint => 0.0,
    }
}

/// One variable per triplet, all pairwise couplings.
///
/// Only triplets sharing a hit can couple, so pairs are found through a
/// hit-to-triplet index rather than an all-pairs scan.
pub fn assemble_qubo(triplets: &[Triplet], scaling: &QuboScaling) -> Result<Qubo> {
    if triplets.is_empty() {
        return Err(Error::EmptyProblem("no triplet candidates".into()));
    }
    let linear = triplets
        .iter()
        .map(|t| linear_coefficient(t, scaling.theta_scale))
        .collect();

    let mut by_hit: std::collections::HashMap<usize, Vec<usize>> = Default::default();
    for (k, t) in triplets.iter().enumerate() {
        for &h in &t.hits {
            by_hit.entry(h).or_default().push(k);
        }
    }
    let mut pairs = std::collections::BTreeSet::new();
    for list in by_hit.values() {
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let couplings = pairs
        .into_iter()
        .map(|(i, j)| (i, j, quadratic_coefficient(&triplets[i], &triplets[j], scaling.s_max)));
    Qubo::new(linear, couplings)
}

/// Spreads of all chained truth triplet pairs, for `s_max` calibration.
pub fn truth_quadruplet_spreads(triplets: &[Triplet], is_truth: impl Fn(&Triplet) -> bool) -> Vec<f64> {
    let truth: Vec<&Triplet> = triplets.iter().filter(|t| is_truth(t)).collect();
    let mut out = Vec::new();
    for a in &truth {
        for b in &truth {
            if let PairRelation::Chained { first_is_i: true } = pair_relation(a, b) {
                out.push(chained_angle_spread(a, b));
            }
        }
    }
    out
}

/// Linear-interpolated percentile (`p` in [0, 100]).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}
