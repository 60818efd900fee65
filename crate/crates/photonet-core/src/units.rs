//! Rate, frequency, and quality-factor conversions.
//!
//! Conventions used everywhere in this crate:
//!
//! * Decay and coupling rates are angular rates in rad/ns. The lab-style
//!   "GHz" label means 10⁹ rad/s, so GHz values and rad/ns values are
//!   numerically identical and [`ghz_to_rad_per_ns`] is the identity.
//! * Optical carrier frequencies are angular, in rad/s.
//! * Quality factors follow the convention `Q = 2ω/κ` of the modelled
//!   device papers. This differs by a constant factor from the textbook
//!   `Q = ω/Δω`; use [`q_to_kappa`]/[`kappa_to_q`] consistently and the
//!   factor never leaks.

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Angular frequency (rad/s) of a vacuum wavelength in nm.
pub fn wavelength_nm_to_omega(wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(Error::Domain("wavelength must be positive and finite"));
    }
    Ok(2.0 * core::f64::consts::PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9))
}

/// Field decay rate (rad/s) for a quality factor, `κ = 2ω/Q`.
pub fn q_to_kappa(q: f64, omega0: f64) -> Result<f64> {
    if !(q > 0.0) || !(omega0 > 0.0) {
        return Err(Error::Domain("q_to_kappa requires q > 0 and omega0 > 0"));
    }
    Ok(2.0 * omega0 / q)
}

/// Quality factor for a field decay rate (rad/s), inverse of [`q_to_kappa`].
pub fn kappa_to_q(kappa: f64, omega0: f64) -> Result<f64> {
    if !(kappa > 0.0) || !(omega0 > 0.0) {
        return Err(Error::Domain("kappa_to_q requires kappa > 0 and omega0 > 0"));
    }
    Ok(2.0 * omega0 / kappa)
}

/// rad/s to the crate-internal rad/ns.
pub fn rad_per_s_to_rad_per_ns(rate: f64) -> f64 {
    rate * 1e-9
}

/// Lab-convention GHz (≡ 10⁹ rad/s) to rad/ns. Numerically the identity;
/// exists so call sites state their units.
pub fn ghz_to_rad_per_ns(rate_ghz: f64) -> f64 {
    rate_ghz
}

/// rad/ns to lab-convention GHz. Numerically the identity.
pub fn rad_per_ns_to_ghz(rate: f64) -> f64 {
    rate
}

/// Decay rate (rad/ns) for an exponential lifetime in ps.
pub fn lifetime_ps_to_rate(tau_ps: f64) -> Result<f64> {
    if !(tau_ps > 0.0) {
        return Err(Error::Domain("lifetime must be positive"));
    }
    Ok(1000.0 / tau_ps)
}

/// Exponential lifetime (ps) for a decay rate in rad/ns.
pub fn rate_to_lifetime_ps(rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Domain("rate must be positive"));
    }
    Ok(1000.0 / rate)
}

/// Relaxation time of a photonic resonance, `τ = Q/ω`, in ps.
pub fn photonic_relaxation_time_ps(q: f64, omega0: f64) -> Result<f64> {
    if !(q > 0.0) || !(omega0 > 0.0) {
        return Err(Error::Domain("relaxation time requires q > 0 and omega0 > 0"));
    }
    Ok(q / omega0 * 1e12)
}
