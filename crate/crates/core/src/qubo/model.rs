use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary assignment, one bit per QUBO variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Bit `i` is `(index >> i) & 1`, i.e. variable 0 is the least
    /// significant bit.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|i| (index >> i) & 1 == 1).collect())
    }

    pub fn index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// `"0101"`-style string, variable 0 leftmost.
    pub fn to_bitstring(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Contract(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl Serialize for Assignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bitstring())
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Assignment::from_bitstring(&s).map_err(serde::de::Error::custom)
    }
}

/// Quadratic unconstrained binary objective
/// `O(T) = sum_{i<j} b_ij T_i T_j + sum_i a_i T_i`.
///
/// Couplings are stored once per unordered pair with `i < j`, plus an
/// adjacency list for O(degree) flip evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl Qubo {
    /// Build from linear terms and pair couplings. Pairs may be given in
    /// either order; repeated pairs are summed and zero couplings dropped.
    pub fn new(
        linear: Vec<f64>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let n = linear.len();
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, b) in couplings {
            if i == j {
                return Err(Error::Contract(format!("self-pair ({i}, {i}) in QUBO")));
            }
            if i >= n || j >= n {
                return Err(Error::Contract(format!(
                    "pair ({i}, {j}) out of range for n = {n}"
                )));
            }
            if !b.is_finite() {
                return Err(Error::Contract(format!("non-finite coupling on ({i}, {j})")));
            }
            *map.entry((i.min(j), i.max(j))).or_default() += b;
        }
        if let Some(a) = linear.iter().find(|a| !a.is_finite()) {
            return Err(Error::Contract(format!("non-finite linear term {a}")));
        }
        let quadratic: Vec<_> = map
            .into_iter()
            .filter(|&(_, b)| b != 0.0)
            .map(|((i, j), b)| (i, j, b))
            .collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, b) in &quadratic {
            adjacency[i].push((j, b));
            adjacency[j].push((i, b));
        }
        Ok(Self {
            linear,
            quadratic,
            adjacency,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![0.0; n], []).expect("zero QUBO is valid")
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Non-zero couplings `(i, j, b_ij)` with `i < j`, sorted.
    pub fn quadratic(&self) -> &[(usize, usize, f64)] {
        &self.quadratic
    }

    pub fn neighbours(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |&(_, b)| b)
    }

    fn check_len(&self, a: &Assignment) -> Result<()> {
        if a.len() != self.n() {
            return Err(Error::Contract(format!(
                "assignment length {} does not match QUBO size {}",
                a.len(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn objective(&self, a: &Assignment) -> Result<f64> {
        self.check_len(a)?;
        Ok(self.objective_unchecked(a.bits()))
    }

    pub(crate) fn objective_unchecked(&self, bits: &[bool]) -> f64 {
        let mut o = 0.0;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                o += self.linear[i];
            }
        }
        for &(i, j, b) in &self.quadratic {
            if bits[i] && bits[j] {
                o += b;
            }
        }
        o
    }

    /// `a_i + sum_j b_ij T_j`: the objective change from switching `T_i` on,
    /// given the other variables.
    pub fn local_field(&self, bits: &[bool], i: usize) -> f64 {
        self.linear[i]
            + self.adjacency[i]
                .iter()
                .filter(|(j, _)| bits[*j])
                .map(|(_, b)| b)
                .sum::<f64>()
    }

    /// Objective change when `T_i -> 1 - T_i`.
    pub fn impact(&self, a: &Assignment, i: usize) -> Result<f64> {
        self.check_len(a)?;
        if i >= self.n() {
            return Err(Error::Contract(format!("variable {i} out of range")));
        }
        Ok(self.flip_delta(a.bits(), i))
    }

    pub(crate) fn flip_delta(&self, bits: &[bool], i: usize) -> f64 {
        let field = self.local_field(bits, i);
        if bits[i] {
            -field
        } else {
            field
        }
    }

    /// Whether the coefficients lie in the ranges produced by tracking
    /// assembly: `a_i in [-1, 1]`, `b_ij in [-1, -0.9] or {0, 1}`.
    pub fn has_tracking_ranges(&self) -> bool {
        self.linear.iter().all(|a| (-1.0..=1.0).contains(a))
            && self
                .quadratic
                .iter()
                .all(|&(_, _, b)| (-1.0..=-0.9).contains(&b) || b == 1.0)
    }
}
