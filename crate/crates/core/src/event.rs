//! Event data model: hits, truth particles and their links.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detector::{DetectorGeometry, N_LAYERS};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParticle {
    pub particle_id: u64,
    /// GeV.
    pub energy: f64,
    /// Production vertex (m).
    pub origin: Vec3,
    /// Unit direction at production, before the dipole.
    pub direction: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub hit_id: u64,
    pub layer: usize,
    pub position: Vec3,
    /// Absent for noise hits.
    pub truth_particle_id: Option<u64>,
}

/// One bunch crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: u64,
    pub xi_label: Option<f64>,
    pub hits: Vec<Hit>,
    pub particles: Vec<TruthParticle>,
}

impl Event {
    pub fn empty(event_id: u64) -> Self {
        Self {
            event_id,
            xi_label: None,
            hits: Vec::new(),
            particles: Vec::new(),
        }
    }

    pub fn particle(&self, id: u64) -> Option<&TruthParticle> {
        self.particles.iter().find(|p| p.particle_id == id)
    }

    /// Map from hit id to index in `hits`.
    pub fn hit_index(&self) -> HashMap<u64, usize> {
        self.hits
            .iter()
            .enumerate()
            .map(|(i, h)| (h.hit_id, i))
            .collect()
    }

    /// Bitmask of layers hit, per truth particle.
    pub fn layer_masks(&self) -> HashMap<u64, u8> {
        let mut masks: HashMap<u64, u8> = HashMap::new();
        for h in &self.hits {
            if let Some(pid) = h.truth_particle_id {
                *masks.entry(pid).or_default() |= 1 << h.layer;
            }
        }
        masks
    }

    /// Particles that left a hit on every layer.
    pub fn reconstructable_particles(&self) -> Vec<&TruthParticle> {
        let full = (1u8 << N_LAYERS) - 1;
        let masks = self.layer_masks();
        self.particles
            .iter()
            .filter(|p| masks.get(&p.particle_id) == Some(&full))
            .collect()
    }
}

/// A single problem found by [`validate_event`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    DuplicateHitId { hit_id: u64 },
    BadLayer { hit_id: u64, layer: usize },
    OffLayerHit { hit_id: u64, z: f64, layer_z: f64 },
    OutsideExtent { hit_id: u64, x: f64, y: f64 },
    DanglingTruthLink { hit_id: u64, particle_id: u64 },
    DuplicateParticleId { particle_id: u64 },
    NonPositiveEnergy { particle_id: u64, energy: f64 },
    UnnormalizedDirection { particle_id: u64, norm: f64 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateHitId { hit_id } => write!(f, "duplicate hit id {hit_id}"),
            Diagnostic::BadLayer { hit_id, layer } => {
                write!(f, "hit {hit_id}: layer {layer} out of range")
            }
            Diagnostic::OffLayerHit { hit_id, z, layer_z } => {
                write!(f, "off-layer hit {hit_id}: z={z} but layer at {layer_z}")
            }
            Diagnostic::OutsideExtent { hit_id, x, y } => {
                write!(f, "hit {hit_id} outside layer extent at ({x}, {y})")
            }
            Diagnostic::DanglingTruthLink {
                hit_id,
                particle_id,
            } => write!(
                f,
                "dangling truth link: hit {hit_id} references missing particle {particle_id}"
            ),
            Diagnostic::DuplicateParticleId { particle_id } => {
                write!(f, "duplicate particle id {particle_id}")
            }
            Diagnostic::NonPositiveEnergy {
                particle_id,
                energy,
            } => write!(f, "particle {particle_id}: non-positive energy {energy}"),
            Diagnostic::UnnormalizedDirection { particle_id, norm } => {
                write!(f, "particle {particle_id}: direction norm {norm}")
            }
        }
    }
}

/// Check every hit/particle invariant of `event` against `geometry`.
/// Returns an empty list when the event is consistent.
pub fn validate_event(event: &Event, geometry: &DetectorGeometry) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut particle_ids = HashSet::new();
    for p in &event.particles {
        if !particle_ids.insert(p.particle_id) {
            out.push(Diagnostic::DuplicateParticleId {
                particle_id: p.particle_id,
            });
        }
        if !(p.energy > 0.0) {
            out.push(Diagnostic::NonPositiveEnergy {
                particle_id: p.particle_id,
                energy: p.energy,
            });
        }
        let norm = p.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            out.push(Diagnostic::UnnormalizedDirection {
                particle_id: p.particle_id,
                norm,
            });
        }
    }

    let mut hit_ids = HashSet::new();
    for h in &event.hits {
        if !hit_ids.insert(h.hit_id) {
            out.push(Diagnostic::DuplicateHitId { hit_id: h.hit_id });
        }
        if h.layer >= N_LAYERS {
            out.push(Diagnostic::BadLayer {
                hit_id: h.hit_id,
                layer: h.layer,
            });
        } else if h.position[2] != geometry.layer_z[h.layer] {
            out.push(Diagnostic::OffLayerHit {
                hit_id: h.hit_id,
                z: h.position[2],
                layer_z: geometry.layer_z[h.layer],
            });
        }
        if !geometry.contains(h.position[0], h.position[1]) {
            out.push(Diagnostic::OutsideExtent {
                hit_id: h.hit_id,
                x: h.position[0],
                y: h.position[1],
            });
        }
        if let Some(pid) = h.truth_particle_id {
            if !particle_ids.contains(&pid) {
                out.push(Diagnostic::DanglingTruthLink {
                    hit_id: h.hit_id,
                    particle_id: pid,
                });
            }
        }
    }
    out
}
