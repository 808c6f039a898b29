//! Simplified tracker geometry.
//!
//! Four continuous planar layers perpendicular to the beam axis, downstream
//! of a dipole that bends positrons towards `+x`. Distances are in metres,
//! fields in tesla.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of tracking layers; quadruplet tracks need exactly four.
pub const N_LAYERS: usize = 4;

/// User-facing geometry configuration. Every field has a documented default,
/// so a partial JSON object is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Number of layers. Only 4 is accepted.
    pub n_layers: usize,
    /// z of the layer closest to the interaction point.
    pub first_layer_z: f64,
    /// Distance between adjacent layers along z.
    pub layer_pitch: f64,
    /// Explicit layer positions; overrides `first_layer_z`/`layer_pitch`
    /// when present and must be strictly increasing with uniform spacing.
    pub layer_z: Option<Vec<f64>>,
    /// x coordinate of the layer centres.
    pub layer_center_x: f64,
    pub layer_half_extent_x: f64,
    pub layer_half_extent_y: f64,
    /// Gaussian in-plane hit resolution.
    pub hit_resolution: f64,
    /// Layer thickness as a fraction of a radiation length.
    pub layer_thickness_x0: f64,
    pub dipole_field: f64,
    pub dipole_length: f64,
    /// z of the thin-lens kick (magnet centre).
    pub dipole_center_z: f64,
    pub ip_position: [f64; 3],
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            n_layers: N_LAYERS,
            first_layer_z: 1.0,
            layer_pitch: 0.10,
            layer_z: None,
            layer_center_x: 0.25,
            layer_half_extent_x: 0.27,
            layer_half_extent_y: 0.0075,
            hit_resolution: 5e-6,
            layer_thickness_x0: 0.357e-2,
            dipole_field: 0.95,
            dipole_length: 1.0,
            dipole_center_z: 0.5,
            ip_position: [0.0; 3],
        }
    }
}

/// Validated detector geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorGeometry {
    pub layer_z: [f64; N_LAYERS],
    pub layer_pitch: f64,
    pub layer_center_x: f64,
    pub layer_half_extent_x: f64,
    pub layer_half_extent_y: f64,
    pub hit_resolution: f64,
    pub layer_thickness_x0: f64,
    pub dipole_field: f64,
    pub dipole_length: f64,
    pub dipole_center_z: f64,
    pub ip_position: [f64; 3],
}

impl Default for DetectorGeometry {
    fn default() -> Self {
        build_geometry(&GeometryConfig::default()).expect("default geometry is valid")
    }
}

impl DetectorGeometry {
    /// Whether an in-plane point `(x, y)` lies on the sensitive area.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.layer_center_x).abs() <= self.layer_half_extent_x
            && y.abs() <= self.layer_half_extent_y
    }

    /// Transverse momentum kick of the dipole in GeV.
    pub fn pt_kick(&self) -> f64 {
        crate::fastsim::PT_KICK_PER_TESLA_METRE * self.dipole_field * self.dipole_length
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be non-negative, got {v}")))
    }
}

/// Validate a [`GeometryConfig`] and build the geometry from it.
pub fn build_geometry(config: &GeometryConfig) -> Result<DetectorGeometry> {
    if config.n_layers != N_LAYERS {
        return Err(Error::Config(format!(
            "{} layers requested; the quadruplet pipeline requires exactly {N_LAYERS}",
            config.n_layers
        )));
    }

    let (layer_z, pitch) = match &config.layer_z {
        Some(zs) => {
            if zs.len() != N_LAYERS {
                return Err(Error::Config(format!(
                    "layer_z has {} entries, expected {N_LAYERS}",
                    zs.len()
                )));
            }
            if zs.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config(format!(
                    "layer positions must be strictly increasing: {zs:?}"
                )));
            }
            let pitch = zs[1] - zs[0];
            if zs
                .windows(2)
                .any(|w| ((w[1] - w[0]) - pitch).abs() > 1e-9 * pitch.abs().max(1.0))
            {
                return Err(Error::Config(format!(
                    "layer spacing must be uniform: {zs:?}"
                )));
            }
            let mut arr = [0.0; N_LAYERS];
            arr.copy_from_slice(zs);
            (arr, pitch)
        }
        None => {
            if !(config.layer_pitch > 0.0) || !config.layer_pitch.is_finite() {
                return Err(Error::Config(format!(
                    "layer pitch {} gives non-monotonic layer positions",
                    config.layer_pitch
                )));
            }
            let mut arr = [0.0; N_LAYERS];
            for (i, z) in arr.iter_mut().enumerate() {
                *z = config.first_layer_z + i as f64 * config.layer_pitch;
            }
            (arr, config.layer_pitch)
        }
    };

    positive("layer_half_extent_x", config.layer_half_extent_x)?;
    positive("layer_half_extent_y", config.layer_half_extent_y)?;
    positive("hit_resolution", config.hit_resolution)?;
    non_negative("layer_thickness_x0", config.layer_thickness_x0)?;
    non_negative("dipole_field", config.dipole_field)?;
    non_negative("dipole_length", config.dipole_length)?;
    if !config.layer_center_x.is_finite() || !config.dipole_center_z.is_finite() {
        return Err(Error::Config("non-finite position in geometry".into()));
    }
    if config.dipole_center_z >= layer_z[0] {
        return Err(Error::Config(format!(
            "dipole centre z={} must lie upstream of the first layer z={}",
            config.dipole_center_z, layer_z[0]
        )));
    }
    if config.ip_position.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite ip_position".into()));
    }

    Ok(DetectorGeometry {
        layer_z,
        layer_pitch: pitch,
        layer_center_x: config.layer_center_x,
        layer_half_extent_x: config.layer_half_extent_x,
        layer_half_extent_y: config.layer_half_extent_y,
        hit_resolution: config.hit_resolution,
        layer_thickness_x0: config.layer_thickness_x0,
        dipole_field: config.dipole_field,
        dipole_length: config.dipole_length,
        dipole_center_z: config.dipole_center_z,
        ip_position: config.ip_position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_layout() {
        let g = build_geometry(&GeometryConfig::default()).unwrap();
        for w in g.layer_z.windows(2) {
            assert!((w[1] - w[0] - 0.10).abs() < 1e-12);
        }
        assert_eq!(g.hit_resolution, 5e-6);
        assert_eq!(g.layer_thickness_x0, 0.357e-2);
        assert_eq!(g.dipole_field, 0.95);
    }

    #[test]
    fn three_layers_rejected() {
        let cfg = GeometryConfig {
            n_layers: 3,
            ..Default::default()
        };
        assert!(matches!(build_geometry(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn non_monotonic_layers_rejected() {
        let cfg = GeometryConfig {
            layer_z: Some(vec![1.0, 1.2, 1.1, 1.3]),
            ..Default::default()
        };
        assert!(build_geometry(&cfg).is_err());
        let cfg = GeometryConfig {
            layer_pitch: -0.1,
            ..Default::default()
        };
        assert!(build_geometry(&cfg).is_err());
    }

    #[test]
    fn explicit_uniform_layers_accepted() {
        let cfg = GeometryConfig {
            layer_z: Some(vec![2.0, 2.2, 2.4, 2.6]),
            ..Default::default()
        };
        let g = build_geometry(&cfg).unwrap();
        assert!((g.layer_pitch - 0.2).abs() < 1e-12);
    }

    #[test]
    fn non_positive_resolution_rejected() {
        let cfg = GeometryConfig {
            hit_resolution: 0.0,
            ..Default::default()
        };
        assert!(build_geometry(&cfg).is_err());
    }

    #[test]
    fn geometry_json_round_trip_is_bit_exact() {
        let cfg = GeometryConfig {
            first_layer_z: 1.0 + 1.0 / 3.0,
            hit_resolution: 1.0 / 3.0 * 1e-5,
            ..Default::default()
        };
        let g = build_geometry(&cfg).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: DetectorGeometry = serde_json::from_str(&s).unwrap();
        for (a, b) in g.layer_z.iter().zip(back.layer_z.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(g.hit_resolution.to_bits(), back.hit_resolution.to_bits());
        assert_eq!(g, back);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg: GeometryConfig = serde_json::from_str(r#"{"hit_resolution": 1e-5}"#).unwrap();
        assert_eq!(cfg.hit_resolution, 1e-5);
        assert_eq!(cfg.layer_pitch, 0.10);
    }
}
