use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// hbar*c in eV*m.
pub const HBAR_C_EV_M: f64 = 1.973_269_804e-7;

/// Laser and QED constants entering the intensity parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaserConfig {
    /// Peak field strength, V/m.
    pub field_strength: f64,
    /// Laser photon energy hbar*omega, eV.
    pub frequency: f64,
    /// Electron mass, eV.
    pub electron_mass: f64,
    /// Fine-structure constant.
    pub fine_structure: f64,
    /// Critical (Schwinger) field, V/m.
    pub critical_field: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            field_strength: 2.0e13,
            frequency: 1.55,
            electron_mass: 0.510_998_95e6,
            fine_structure: 1.0 / 137.035_999_084,
            critical_field: 1.32e18,
        }
    }
}

impl LaserConfig {
    fn check(&self) -> Result<()> {
        let fields = [
            ("field_strength", self.field_strength),
            ("frequency", self.frequency),
            ("electron_mass", self.electron_mass),
            ("fine_structure", self.fine_structure),
            ("critical_field", self.critical_field),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Critical field implied by `electron_mass` (m_e^2 / (e hbar c)), V/m.
    pub fn consistent_critical_field(&self) -> f64 {
        self.electron_mass * self.electron_mass / HBAR_C_EV_M
    }
}

/// Intensity parameter `sqrt(4 pi alpha) * eps_L / (omega_L * m_e)`.
///
/// `eps_L` is converted from V/m to natural Heaviside-Lorentz units (eV^2)
/// with `e = sqrt(4 pi alpha)` before the product is formed.
pub fn compute_xi(laser: &LaserConfig) -> Result<f64> {
    laser.check()?;
    let charge = (4.0 * std::f64::consts::PI * laser.fine_structure).sqrt();
    let field_natural = laser.field_strength * HBAR_C_EV_M / charge;
    Ok(charge * field_natural / (laser.frequency * laser.electron_mass))
}

/// Same quantity via `m_e * eps_L / (omega_L * eps_cr)`.
pub fn xi_from_critical_field(laser: &LaserConfig) -> Result<f64> {
    laser.check()?;
    Ok(laser.electron_mass * laser.field_strength / (laser.frequency * laser.critical_field))
}

const MULTIPLICITY_ANCHORS: [(f64, f64); 3] = [(3.0, 1.0e2), (5.0, 1.05e4), (7.0, 7.0e4)];

/// Expected positrons per bunch crossing for a 40 TW scenario label, by
/// log-linear interpolation between anchor points at xi = 3, 5, 7.
pub fn xi_to_multiplicity(xi: f64) -> Result<f64> {
    let (lo, hi) = (MULTIPLICITY_ANCHORS[0].0, MULTIPLICITY_ANCHORS[2].0);
    if !(lo..=hi).contains(&xi) {
        return Err(Error::Range {
            value: xi,
            min: lo,
            max: hi,
        });
    }
    for w in MULTIPLICITY_ANCHORS.windows(2) {
        let ((x0, n0), (x1, n1)) = (w[0], w[1]);
        if xi <= x1 {
            if xi == x0 {
                return Ok(n0);
            }
            if xi == x1 {
                return Ok(n1);
            }
            let f = (xi - x0) / (x1 - x0);
            return Ok((n0.ln() + f * (n1.ln() - n0.ln())).exp());
        }
    }
    unreachable!("xi within anchor range")
}
