use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::physics::{dipole_deflection, scattering_kick};
use crate::detector::{DetectorGeometry, N_LAYERS};
use crate::error::{Error, Result};
use crate::event::{Event, Hit, TruthParticle};
use crate::rng::{event_seed, rng_from_seed};

/// Positron energy spectrum (GeV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergySpectrum {
    /// Gamma distribution truncated to `[min, max]` by rejection.
    Gamma {
        shape: f64,
        scale: f64,
        min: f64,
        max: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    Monoenergetic {
        energy: f64,
    },
}

impl Default for EnergySpectrum {
    fn default() -> Self {
        EnergySpectrum::Gamma {
            shape: 3.0,
            scale: 1.3,
            min: 0.5,
            max: 14.0,
        }
    }
}

impl EnergySpectrum {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            EnergySpectrum::Gamma {
                shape,
                scale,
                min,
                max,
            } => {
                if !(shape > 0.0 && scale > 0.0 && min >= 0.0 && max > min) {
                    return bad(format!("invalid gamma spectrum {self:?}"));
                }
                let mass = truncated_mass(shape, scale, min, max);
                if !(mass > 1e-3) {
                    return bad(format!(
                        "gamma spectrum window [{min}, {max}] holds only {mass:e} of the probability"
                    ));
                }
                Ok(())
            }
            EnergySpectrum::Uniform { min, max } => {
                if min > 0.0 && max > min {
                    Ok(())
                } else {
                    bad(format!("invalid uniform spectrum {self:?}"))
                }
            }
            EnergySpectrum::Monoenergetic { energy } => {
                if energy > 0.0 {
                    Ok(())
                } else {
                    bad(format!("invalid monoenergetic spectrum {self:?}"))
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EnergySpectrum::Gamma {
                shape,
                scale,
                min,
                max,
            } => {
                let g = Gamma::new(shape, scale).expect("validated gamma parameters");
                loop {
                    let e: f64 = g.sample(rng);
                    if (min..=max).contains(&e) && e > 0.0 {
                        return e;
                    }
                }
            }
            EnergySpectrum::Uniform { min, max } => Uniform::new_inclusive(min, max)
                .expect("validated uniform bounds")
                .sample(rng),
            EnergySpectrum::Monoenergetic { energy } => energy,
        }
    }

    /// Mean of the (truncated) distribution.
    pub fn mean(&self) -> f64 {
        match *self {
            EnergySpectrum::Gamma {
                shape,
                scale,
                min,
                max,
            } => {
                let p = |a: f64, x: f64| statrs::function::gamma::gamma_lr(a, x);
                let num = p(shape + 1.0, max / scale) - p(shape + 1.0, min / scale);
                let den = p(shape, max / scale) - p(shape, min / scale);
                shape * scale * num / den
            }
            EnergySpectrum::Uniform { min, max } => 0.5 * (min + max),
            EnergySpectrum::Monoenergetic { energy } => energy,
        }
    }
}

fn truncated_mass(shape: f64, scale: f64, min: f64, max: f64) -> f64 {
    let p = |x: f64| statrs::function::gamma::gamma_lr(shape, x);
    p(max / scale) - p(min / scale)
}

/// Toy generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Expected positrons per event.
    pub mean_multiplicity: f64,
    /// Use `round(mean_multiplicity)` particles instead of a Poisson draw.
    pub fixed_multiplicity: bool,
    /// Scenario tag carried into every event.
    pub xi_label: Option<f64>,
    pub energy_spectrum: EnergySpectrum,
    /// Gaussian interaction-point smearing (sigma_x, sigma_y, sigma_z), m.
    pub ip_smear: [f64; 3],
    /// Gaussian width of each projected production angle, rad.
    pub emittance_angle_sigma: f64,
    pub multiple_scattering: bool,
    pub hit_smearing: bool,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mean_multiplicity: 100.0,
            fixed_multiplicity: false,
            xi_label: None,
            energy_spectrum: EnergySpectrum::default(),
            ip_smear: [5e-6, 5e-6, 24e-6],
            emittance_angle_sigma: 1e-3,
            multiple_scattering: true,
            hit_smearing: true,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    /// No smearing, scattering, or angular spread: every particle leaves
    /// exactly collinear hits.
    pub fn noiseless() -> Self {
        Self {
            ip_smear: [0.0; 3],
            emittance_angle_sigma: 0.0,
            multiple_scattering: false,
            hit_smearing: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_multiplicity >= 0.0 && self.mean_multiplicity.is_finite()) {
            return Err(Error::Config(format!(
                "mean_multiplicity must be >= 0, got {}",
                self.mean_multiplicity
            )));
        }
        if self.ip_smear.iter().any(|s| !(*s >= 0.0)) || !(self.emittance_angle_sigma >= 0.0) {
            return Err(Error::Config("smearing widths must be >= 0".into()));
        }
        self.energy_spectrum.validate()
    }
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let g: f64 = StandardNormal.sample(rng);
    sigma * g
}

fn rotate_slope(slope: f64, angle: f64) -> f64 {
    (slope.atan() + angle).tan()
}

/// Generate event `event_id`. Pure in `(sim, geometry, event_id)`; the
/// random stream is seeded with `sim.rng_seed ^ event_id`.
///
/// Hits are sorted by `(layer, x, y)` and numbered in that order, so hit ids
/// carry no truth information.
pub fn generate_event(sim: &SimConfig, geometry: &DetectorGeometry, event_id: u64) -> Event {
    let mut rng = rng_from_seed(event_seed(sim.rng_seed, event_id));

    let n_particles = if sim.fixed_multiplicity {
        sim.mean_multiplicity.round() as u64
    } else if sim.mean_multiplicity > 0.0 {
        let n: f64 = Poisson::new(sim.mean_multiplicity)
            .expect("validated multiplicity")
            .sample(&mut rng);
        n as u64
    } else {
        0
    };

    let mut particles = Vec::with_capacity(n_particles as usize);
    // (layer, x, y, truth id) before id assignment
    let mut raw_hits: Vec<(usize, f64, f64, u64)> = Vec::new();

    for pid in 0..n_particles {
        let energy = sim.energy_spectrum.sample(&mut rng);
        let origin = [
            geometry.ip_position[0] + gauss(&mut rng, sim.ip_smear[0]),
            geometry.ip_position[1] + gauss(&mut rng, sim.ip_smear[1]),
            geometry.ip_position[2] + gauss(&mut rng, sim.ip_smear[2]),
        ];
        let mut tx = gauss(&mut rng, sim.emittance_angle_sigma).tan();
        let mut ty = gauss(&mut rng, sim.emittance_angle_sigma).tan();
        let norm = (tx * tx + ty * ty + 1.0).sqrt();
        particles.push(TruthParticle {
            particle_id: pid,
            energy,
            origin,
            direction: [tx / norm, ty / norm, 1.0 / norm],
        });

        let Ok(bend) =
            dipole_deflection(energy, geometry.dipole_field, geometry.dipole_length)
        else {
            continue;
        };

        let zc = geometry.dipole_center_z;
        let mut x = origin[0] + (zc - origin[2]) * tx;
        let mut y = origin[1] + (zc - origin[2]) * ty;
        let mut z = zc;
        tx = rotate_slope(tx, bend);

        for layer in 0..N_LAYERS {
            let zl = geometry.layer_z[layer];
            x += (zl - z) * tx;
            y += (zl - z) * ty;
            z = zl;
            if !geometry.contains(x, y) {
                continue;
            }
            let (mx, my) = if sim.hit_smearing {
                (
                    x + gauss(&mut rng, geometry.hit_resolution),
                    y + gauss(&mut rng, geometry.hit_resolution),
                )
            } else {
                (x, y)
            };
            if geometry.contains(mx, my) {
                raw_hits.push((layer, mx, my, pid));
            }
            if sim.multiple_scattering {
                let (dx, dy) = scattering_kick(energy, geometry.layer_thickness_x0, &mut rng);
                tx = rotate_slope(tx, dx);
                ty = rotate_slope(ty, dy);
            }
        }
    }

    raw_hits.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let hits = raw_hits
        .into_iter()
        .enumerate()
        .map(|(i, (layer, x, y, pid))| Hit {
            hit_id: i as u64,
            layer,
            position: [x, y, geometry.layer_z[layer]],
            truth_particle_id: Some(pid),
        })
        .collect();

    Event {
        event_id,
        xi_label: sim.xi_label,
        hits,
        particles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::validate_event;

    fn fit_residual_max(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mz = points.iter().map(|p| p.0).sum::<f64>() / n;
        let mv = points.iter().map(|p| p.1).sum::<f64>() / n;
        let szz: f64 = points.iter().map(|p| (p.0 - mz).powi(2)).sum();
        let szv: f64 = points.iter().map(|p| (p.0 - mz) * (p.1 - mv)).sum();
        let slope = szv / szz;
        points
            .iter()
            .map(|p| (p.1 - (mv + slope * (p.0 - mz))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_multiplicity_gives_empty_event() {
        let sim = SimConfig {
            mean_multiplicity: 0.0,
            ..Default::default()
        };
        let ev = generate_event(&sim, &DetectorGeometry::default(), 3);
        assert!(ev.particles.is_empty());
        assert!(ev.hits.is_empty());
    }

    #[test]
    fn same_seed_same_event() {
        let g = DetectorGeometry::default();
        let sim = SimConfig::default();
        let a = generate_event(&sim, &g, 5);
        let b = generate_event(&sim, &g, 5);
        assert_eq!(a, b);
        let c = generate_event(&sim, &g, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_particles_are_collinear() {
        let g = DetectorGeometry::default();
        let sim = SimConfig {
            mean_multiplicity: 50.0,
            fixed_multiplicity: true,
            emittance_angle_sigma: 1e-3,
            ..SimConfig::noiseless()
        };
        let ev = generate_event(&sim, &g, 1);
        let mut checked = 0;
        for p in &ev.particles {
            let hits: Vec<_> = ev
                .hits
                .iter()
                .filter(|h| h.truth_particle_id == Some(p.particle_id))
                .collect();
            assert!(hits.len() <= 4);
            if hits.len() == 4 {
                let xs: Vec<_> = hits.iter().map(|h| (h.position[2], h.position[0])).collect();
                let ys: Vec<_> = hits.iter().map(|h| (h.position[2], h.position[1])).collect();
                assert!(fit_residual_max(&xs) < 1e-12);
                assert!(fit_residual_max(&ys) < 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 30);
    }

    #[test]
    fn generated_events_validate() {
        let g = DetectorGeometry::default();
        let sim = SimConfig::default();
        for seed in 0..100 {
            let ev = generate_event(
                &SimConfig {
                    rng_seed: seed,
                    mean_multiplicity: 20.0,
                    ..sim.clone()
                },
                &g,
                seed,
            );
            let diags = validate_event(&ev, &g);
            assert!(diags.is_empty(), "seed {seed}: {diags:?}");
        }
    }

    #[test]
    fn at_most_four_hits_per_particle() {
        let ev = generate_event(&SimConfig::default(), &DetectorGeometry::default(), 0);
        let mut counts = std::collections::HashMap::new();
        for h in &ev.hits {
            *counts.entry(h.truth_particle_id.unwrap()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c <= 4));
    }

    #[test]
    fn spectrum_sample_mean_within_three_standard_errors() {
        let spec = EnergySpectrum::default();
        let mut rng = rng_from_seed(9);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| spec.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - spec.mean()).abs() < 3.0 * se, "{mean} vs {}", spec.mean());
    }

    #[test]
    fn truncated_gamma_mean_matches_quadrature() {
        // Independent: Simpson integration of x * pdf over the window.
        let (k, theta, a, b) = (3.0f64, 1.3f64, 0.5f64, 14.0f64);
        let pdf = |x: f64| x.powf(k - 1.0) * (-x / theta).exp();
        let m = 20_000;
        let h = (b - a) / m as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=m {
            let x = a + i as f64 * h;
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            num += w * x * pdf(x);
            den += w * pdf(x);
        }
        let expected = num / den;
        assert!((EnergySpectrum::default().mean() - expected).abs() < 1e-9);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SimConfig {
            mean_multiplicity: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EnergySpectrum::Gamma {
            shape: 3.0,
            scale: 1.3,
            min: 500.0,
            max: 600.0
        }
        .validate()
        .is_err());
        assert!(SimConfig::default().validate().is_ok());
    }
}
