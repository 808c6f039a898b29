//! Run configuration shared by every pipeline stage, and its hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{build_geometry, DetectorGeometry, GeometryConfig};
use crate::error::{Error, Result};
use crate::fastsim::{xi_to_multiplicity, SimConfig};
use crate::qubo::QuboScaling;
use crate::solve::{AnnealSchedule, IterativeConfig};
use crate::vqe::VqeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreselectConfig {
    pub n_sigma: f64,
    /// rad.
    pub max_delta_theta: f64,
    /// Fixed `(mean, sigma)` of the `dx/x0` window. When absent the window
    /// is calibrated on truth-matched doublets.
    pub dx_window: Option<(f64, f64)>,
}

impl Default for PreselectConfig {
    fn default() -> Self {
        Self {
            n_sigma: 3.0,
            max_delta_theta: 1e-3,
            dx_window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Exact,
    Anneal,
    Vqe,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Anneal => "anneal",
            SolverKind::Vqe => "vqe",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "anneal" => Ok(SolverKind::Anneal),
            "vqe" => Ok(SolverKind::Vqe),
            other => Err(Error::Config(format!(
                "unknown solver {other:?} (expected exact, anneal or vqe)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sub-QUBO solver used inside the iterative scheme.
    pub kind: SolverKind,
    pub iterative: IterativeConfig,
    pub anneal: AnnealSchedule,
    /// The seed field is ignored; per-sub-problem seeds are derived from the
    /// run seed.
    pub vqe: VqeConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Exact,
            iterative: IterativeConfig::default(),
            anneal: AnnealSchedule::default(),
            vqe: VqeConfig::default(),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    /// `sim.rng_seed` is replaced by `seed`.
    pub sim: SimConfig,
    pub preselect: PreselectConfig,
    pub qubo: QuboScaling,
    /// Calibrate `qubo.s_max` on truth quadruplets when truth is available.
    pub calibrate_s_max: bool,
    pub solver: SolverConfig,
    pub seed: u64,
    /// Worker threads; `None` uses every available core. Not hashed.
    pub jobs: Option<usize>,
    /// Not hashed.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            sim: SimConfig::default(),
            preselect: PreselectConfig::default(),
            qubo: QuboScaling::default(),
            calibrate_s_max: true,
            solver: SolverConfig::default(),
            seed: 0,
            jobs: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Set the multiplicity and label from a laser intensity scenario.
    pub fn apply_xi(&mut self, xi: f64) -> Result<()> {
        self.sim.mean_multiplicity = xi_to_multiplicity(xi)?;
        self.sim.xi_label = Some(xi);
        Ok(())
    }

    /// Simulation settings with the run seed applied.
    pub fn effective_sim(&self) -> SimConfig {
        SimConfig {
            rng_seed: self.seed,
            ..self.sim.clone()
        }
    }

    pub fn geometry(&self) -> Result<DetectorGeometry> {
        build_geometry(&self.geometry)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.sim.validate()?;
        self.qubo.validate()?;
        self.solver.iterative.validate()?;
        self.solver.anneal.validate()?;
        self.solver.vqe.validate()?;
        if !(self.preselect.n_sigma > 0.0) || !(self.preselect.max_delta_theta > 0.0) {
            return Err(Error::Config(
                "preselect.n_sigma and preselect.max_delta_theta must be positive".into(),
            ));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding `jobs` and
    /// `output_dir`, which do not affect results.
    pub fn config_hash(&self) -> String {
        let canonical = RunConfig {
            jobs: None,
            output_dir: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_jobs_and_paths() {
        let a = RunConfig::default();
        let b = RunConfig {
            jobs: Some(8),
            output_dir: Some("/tmp/x".into()),
            ..a.clone()
        };
        assert_eq!(a.config_hash(), b.config_hash());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn json_round_trip() {
        let mut a = RunConfig::default();
        a.solver.kind = SolverKind::Vqe;
        a.preselect.dx_window = Some((0.17, 0.02));
        let back = RunConfig::from_json(&a.to_json_pretty()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn partial_json_and_unknown_keys() {
        let a = RunConfig::from_json(r#"{"seed": 5, "solver": {"kind": "anneal"}}"#).unwrap();
        assert_eq!(a.seed, 5);
        assert_eq!(a.solver.kind, SolverKind::Anneal);
        assert!(RunConfig::from_json(r#"{"sead": 5}"#).is_err());
    }

    #[test]
    fn xi_preset_sets_multiplicity() {
        let mut a = RunConfig::default();
        a.apply_xi(5.0).unwrap();
        assert!((a.sim.mean_multiplicity - 1.05e4).abs() < 1e-6);
        assert_eq!(a.sim.xi_label, Some(5.0));
        assert!(a.apply_xi(8.0).is_err());
    }

    #[test]
    fn solver_names_parse() {
        assert_eq!("vqe".parse::<SolverKind>().unwrap(), SolverKind::Vqe);
        assert!("qaoa".parse::<SolverKind>().is_err());
    }
}
