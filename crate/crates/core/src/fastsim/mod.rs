//! Toy event generation: positron sampling, dipole kick, straight-line
//! propagation with multiple scattering, and Gaussian hit smearing.

mod generator;
mod laser;
mod physics;

pub use generator::{generate_event, EnergySpectrum, SimConfig};
pub use laser::{compute_xi, xi_from_critical_field, xi_to_multiplicity, LaserConfig, HBAR_C_EV_M};
pub use physics::{dipole_deflection, highland_sigma, scattering_kick, PT_KICK_PER_TESLA_METRE};
