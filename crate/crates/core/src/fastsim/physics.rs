use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Transverse momentum (GeV) acquired per tesla-metre of field integral.
pub const PT_KICK_PER_TESLA_METRE: f64 = 0.2998;

/// Bending angle in the x-z plane of a particle of `energy` GeV crossing a
/// dipole of `field` T and effective `length` m.
pub fn dipole_deflection(energy: f64, field: f64, length: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::Domain(format!("energy must be positive, got {energy}")));
    }
    let kick = PT_KICK_PER_TESLA_METRE * field * length;
    if kick >= energy {
        return Err(Error::BelowCutoff { energy, kick });
    }
    Ok((kick / energy).asin())
}

/// Highland width of the projected scattering angle (rad) for a layer of
/// `thickness_x0` radiation lengths.
pub fn highland_sigma(energy: f64, thickness_x0: f64) -> f64 {
    if thickness_x0 <= 0.0 {
        return 0.0;
    }
    13.6e-3 / energy * thickness_x0.sqrt() * (1.0 + 0.038 * thickness_x0.ln())
}

/// Independent Gaussian kicks `(d_theta_x, d_theta_y)`.
pub fn scattering_kick<R: Rng + ?Sized>(energy: f64, thickness_x0: f64, rng: &mut R) -> (f64, f64) {
    let sigma = highland_sigma(energy, thickness_x0);
    if sigma == 0.0 {
        return (0.0, 0.0);
    }
    let gx: f64 = StandardNormal.sample(rng);
    let gy: f64 = StandardNormal.sample(rng);
    (sigma * gx, sigma * gy)
}
