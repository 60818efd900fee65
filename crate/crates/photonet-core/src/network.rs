//! Domain types for a cavity-waveguide-cavity network instance: coupling
//! rates, cavity and emitter specifications, loss bookkeeping, mode-volume
//! computation from a sampled field, and bundled parameter presets.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::units;
use crate::{Error, Result};

/// Field decay and coupling rates of one network instance, rad/ns.
///
/// `kappa_perp` is the vertical (free-space) cavity loss, `kappa_par` the
/// cavity-waveguide coupling, `kappa_w` the intrinsic waveguide loss (other
/// than loss into the end cavities), and `gamma_mat` material absorption.
/// Both end cavities share the same rates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingRates {
    pub kappa_perp: f64,
    pub kappa_par: f64,
    pub kappa_w: f64,
    pub gamma_mat: f64,
}

impl CouplingRates {
    pub fn new(kappa_perp: f64, kappa_par: f64, kappa_w: f64, gamma_mat: f64) -> Result<Self> {
        for r in [kappa_perp, kappa_par, kappa_w, gamma_mat] {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::Domain("coupling rates must be finite and >= 0"));
            }
        }
        Ok(Self {
            kappa_perp,
            kappa_par,
            kappa_w,
            gamma_mat,
        })
    }

    /// Split a total cavity decay `κ = κ⊥ + κ∥ + γ` into components using
    /// the in-plane/vertical ratio `κ∥/κ⊥`.
    pub fn from_total_and_ratio(
        total: f64,
        par_over_perp: f64,
        kappa_w: f64,
        gamma_mat: f64,
    ) -> Result<Self> {
        if !(total > 0.0) || !(par_over_perp >= 0.0) || gamma_mat >= total {
            return Err(Error::Domain("invalid total-rate split"));
        }
        let kappa_perp = (total - gamma_mat) / (1.0 + par_over_perp);
        let kappa_par = par_over_perp * kappa_perp;
        Self::new(kappa_perp, kappa_par, kappa_w, gamma_mat)
    }

    /// Total cavity field decay rate `κ⊥ + κ∥ + γ`.
    pub fn total_cavity_decay(&self) -> f64 {
        self.kappa_perp + self.kappa_par + self.gamma_mat
    }

    /// Damping rate entering the cavity amplitude equations (`κ⊥ + γ`;
    /// the in-plane part acts through the coherent waveguide coupling).
    pub fn cavity_damping(&self) -> f64 {
        self.kappa_perp + self.gamma_mat
    }

    /// Largest rate in the set, used by integrator step-size guards.
    pub fn max_rate(&self) -> f64 {
        self.kappa_perp
            .max(self.kappa_par)
            .max(self.kappa_w)
            .max(self.gamma_mat)
    }
}

/// Fractions of the cavity decay budget per loss channel. Sums to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    /// Vertical free-space fraction, `κ⊥ / κ`.
    pub vertical: f64,
    /// In-plane (waveguide-coupled) fraction, `κ∥ / κ`.
    pub waveguide: f64,
    /// Material absorption fraction, `γ / κ`.
    pub material: f64,
}

/// Fraction of the total cavity decay going into each channel.
pub fn loss_budget(rates: &CouplingRates) -> Result<LossBudget> {
    let total = rates.total_cavity_decay();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("all cavity rates are zero"));
    }
    Ok(LossBudget {
        vertical: rates.kappa_perp / total,
        waveguide: rates.kappa_par / total,
        material: rates.gamma_mat / total,
    })
}

/// Optical parameters of one end cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CavitySpec {
    /// Angular resonance frequency, rad/s.
    pub omega0: f64,
    /// Vacuum wavelength, nm.
    pub wavelength_nm: f64,
    pub refractive_index: f64,
    pub q_perp: f64,
    pub q_par: f64,
    /// Mode volume in units of (λ/n)³.
    pub v_mode: f64,
}

impl CavitySpec {
    pub fn new(
        wavelength_nm: f64,
        refractive_index: f64,
        q_perp: f64,
        q_par: f64,
        v_mode: f64,
    ) -> Result<Self> {
        if !(q_perp > 0.0) || !(q_par > 0.0) || !(v_mode > 0.0) || !(refractive_index > 0.0) {
            return Err(Error::Domain("cavity Q, index, and mode volume must be positive"));
        }
        Ok(Self {
            omega0: units::wavelength_nm_to_omega(wavelength_nm)?,
            wavelength_nm,
            refractive_index,
            q_perp,
            q_par,
            v_mode,
        })
    }

    /// Vertical field decay rate in rad/ns.
    pub fn kappa_perp(&self) -> f64 {
        units::rad_per_s_to_rad_per_ns(units::q_to_kappa(self.q_perp, self.omega0).expect("valid"))
    }

    /// In-plane field decay rate in rad/ns.
    pub fn kappa_par(&self) -> f64 {
        units::rad_per_s_to_rad_per_ns(units::q_to_kappa(self.q_par, self.omega0).expect("valid"))
    }
}

/// Two-level emitter coupled to the source cavity.
///
/// `gamma_emitter` is the total measured spontaneous-emission rate
/// (rad/ns); the fraction decaying into non-cavity modes is reconstructed
/// from `f_pc` and `tau_bulk_ns` (see [`EmitterSpec::leaky_rate`]).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmitterSpec {
    /// Emitter-field coupling strength, rad/ns.
    pub g0: f64,
    /// Total measured SE rate, rad/ns.
    pub gamma_emitter: f64,
    /// Bulk (uncoupled) lifetime, ns.
    pub tau_bulk_ns: f64,
    /// SE-rate suppression factor into non-cavity modes.
    pub f_pc: f64,
    /// Excitation jitter (relaxation) time, ps.
    pub rise_time_ps: f64,
}

impl EmitterSpec {
    pub fn new(
        g0: f64,
        gamma_emitter: f64,
        tau_bulk_ns: f64,
        f_pc: f64,
        rise_time_ps: f64,
    ) -> Result<Self> {
        if !(g0 >= 0.0) || !(gamma_emitter > 0.0) || !(tau_bulk_ns > 0.0) {
            return Err(Error::Domain("emitter rates must be positive (g0 >= 0)"));
        }
        if !(f_pc >= 0.0) || !(rise_time_ps >= 0.0) {
            return Err(Error::Domain("f_pc and rise time must be >= 0"));
        }
        Ok(Self {
            g0,
            gamma_emitter,
            tau_bulk_ns,
            f_pc,
            rise_time_ps,
        })
    }

    /// Decay rate into non-cavity (bandgap-suppressed leaky) modes,
    /// `F_PC / τ_bulk`, rad/ns. This is the bare dipole decay entering the
    /// coupled equations; cavity emission arises dynamically through `g0`.
    pub fn leaky_rate(&self) -> f64 {
        self.f_pc / self.tau_bulk_ns
    }

    /// Exponential emission lifetime implied by the measured SE rate, ps.
    pub fn lifetime_ps(&self) -> f64 {
        1000.0 / self.gamma_emitter
    }
}

/// Sampled field-energy density for a mode-volume integral.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    /// Volume of one cell (any length unit cubed, shared by all cells).
    pub cell_volume: f64,
    /// Relative permittivity per cell.
    pub epsilon: Vec<f64>,
    /// |E|² per cell, arbitrary common scale.
    pub field_sq: Vec<f64>,
}

impl FieldGrid {
    pub fn new(cell_volume: f64, epsilon: Vec<f64>, field_sq: Vec<f64>) -> Result<Self> {
        if !(cell_volume > 0.0) {
            return Err(Error::Domain("cell volume must be positive"));
        }
        if epsilon.len() != field_sq.len() || epsilon.is_empty() {
            return Err(Error::Domain("epsilon and field arrays must match and be non-empty"));
        }
        if epsilon.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Domain("epsilon must be positive everywhere"));
        }
        if field_sq.iter().any(|&f| !(f >= 0.0) || !f.is_finite()) {
            return Err(Error::Domain("field must be finite and >= 0"));
        }
        Ok(Self {
            cell_volume,
            epsilon,
            field_sq,
        })
    }
}

/// Mode volume `V = ∫ε|E|² / max(ε|E|²)` of a sampled field, in the same
/// units as `cell_volume`. Independent of the overall field scale.
pub fn mode_volume(grid: &FieldGrid) -> Result<f64> {
    let mut sum = 0.0;
    let mut peak = 0.0_f64;
    for (&eps, &fsq) in grid.epsilon.iter().zip(&grid.field_sq) {
        let u = eps * fsq;
        sum += u;
        peak = peak.max(u);
    }
    if peak == 0.0 {
        return Err(Error::DegenerateInput("field is zero everywhere"));
    }
    Ok(grid.cell_volume * sum / peak)
}

/// Express an absolute mode volume in the conventional (λ/n)³ units.
/// `wavelength` must be in the length unit underlying `volume`.
pub fn relative_mode_volume(volume: f64, wavelength: f64, refractive_index: f64) -> Result<f64> {
    if !(volume > 0.0) || !(wavelength > 0.0) || !(refractive_index > 0.0) {
        return Err(Error::Domain("volume, wavelength, and index must be positive"));
    }
    let unit = wavelength / refractive_index;
    Ok(volume / (unit * unit * unit))
}

/// Origin of a bundled preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Provenance {
    /// The fabricated structure the measurements were taken on.
    System1,
    /// Best values observed among sibling structures on the same sample.
    BestObserved,
    /// Design-target predictions.
    Theoretical,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::System1 => "system1",
            Provenance::BestObserved => "best_observed",
            Provenance::Theoretical => "theoretical",
        }
    }
}

/// A named, ready-to-run parameter set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParameterPreset {
    pub name: String,
    pub rates: CouplingRates,
    pub emitter: EmitterSpec,
    /// Measured mean wavepacket overlap, when reported.
    pub indistinguishability: Option<f64>,
    pub provenance: Provenance,
}

/// Names accepted by [`load_preset`].
pub const PRESET_NAMES: [&str; 3] = ["system1", "best_observed", "theoretical"];

/// Look up a bundled preset by name.
///
/// * `system1` — the measured structure: total cavity decay κ = 800 GHz
///   split with κ∥/κ⊥ = 0.62; g0 = 50 GHz, Γ = 10 GHz, I = 0.67. The
///   waveguide loss is the fitted κ_W = 322 GHz of the same structure.
/// * `best_observed` — κ = 210 GHz, κ∥/κ⊥ = 1.9 from the best
///   sibling structure. No emitter was coupled there (g0 = 0, bare bulk
///   decay). κ_W is chosen so the preset reproduces the highest observed
///   transfer intensity ratio of 0.49.
/// * `theoretical` — design targets: g0 = 230 GHz, κ = 46 GHz,
///   κ∥/κ⊥ = 4.4, Γ ≈ 180 GHz (onset of strong coupling), ideal
///   lossless waveguide.
pub fn load_preset(name: &str) -> Result<ParameterPreset> {
    match name {
        "system1" => Ok(ParameterPreset {
            name: String::from("system1"),
            rates: CouplingRates::from_total_and_ratio(800.0, 0.62, 322.0, 0.0)?,
            emitter: EmitterSpec::new(50.0, 10.0, 1.4, 0.3, 23.0)?,
            indistinguishability: Some(0.67),
            provenance: Provenance::System1,
        }),
        "best_observed" => {
            let kappa_perp = 210.0 / (1.0 + 1.9);
            let kappa_par = 1.9 * kappa_perp;
            // κ_W such that the closed-form transfer intensity ratio is 0.49.
            let kappa_w = crate::dynamics::kappa_w_for_intensity_ratio(0.49, kappa_perp, kappa_par)?;
            Ok(ParameterPreset {
                name: String::from("best_observed"),
                rates: CouplingRates::new(kappa_perp, kappa_par, kappa_w, 0.0)?,
                emitter: EmitterSpec::new(0.0, 1.0 / 1.4, 1.4, 0.3, 23.0)?,
                indistinguishability: None,
                provenance: Provenance::BestObserved,
            })
        }
        "theoretical" => Ok(ParameterPreset {
            name: String::from("theoretical"),
            rates: CouplingRates::from_total_and_ratio(46.0, 4.4, 0.0, 0.0)?,
            emitter: EmitterSpec::new(230.0, 180.0, 1.4, 0.3, 23.0)?,
            indistinguishability: None,
            provenance: Provenance::Theoretical,
        }),
        other => Err(Error::UnknownPreset(String::from(other))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn loss_budget_paper_rates() {
        let rates = CouplingRates::new(455.0, 283.0, 322.0, 0.0).unwrap();
        let b = loss_budget(&rates).unwrap();
        assert_relative_eq!(b.waveguide, 283.0 / 738.0, max_relative = 1e-12);
        assert_relative_eq!(b.waveguide, 0.3835, max_relative = 1e-3);
        assert_relative_eq!(b.vertical + b.waveguide + b.material, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn loss_budget_pure_vertical() {
        let rates = CouplingRates::new(455.0, 0.0, 0.0, 0.0).unwrap();
        let b = loss_budget(&rates).unwrap();
        assert_eq!(b.vertical, 1.0);
        assert_eq!(b.waveguide, 0.0);
    }

    #[test]
    fn loss_budget_rejects_all_zero() {
        let rates = CouplingRates::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(loss_budget(&rates), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn rates_reject_negative_and_nan() {
        assert!(CouplingRates::new(-1.0, 0.0, 0.0, 0.0).is_err());
        assert!(CouplingRates::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(CouplingRates::new(f64::INFINITY, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn total_and_ratio_split() {
        let r = CouplingRates::from_total_and_ratio(800.0, 0.62, 322.0, 0.0).unwrap();
        assert_relative_eq!(r.kappa_par / r.kappa_perp, 0.62, max_relative = 1e-12);
        assert_relative_eq!(r.total_cavity_decay(), 800.0, max_relative = 1e-12);
    }

    #[test]
    fn mode_volume_uniform_field() {
        let n = 40;
        let grid = FieldGrid::new(0.125, vec![2.25; n], vec![3.0; n]).unwrap();
        assert_relative_eq!(mode_volume(&grid).unwrap(), 0.125 * n as f64, max_relative = 1e-12);
    }

    #[test]
    fn mode_volume_single_hot_cell() {
        let mut field = vec![0.0; 64];
        field[17] = 5.0;
        let grid = FieldGrid::new(0.2, vec![1.0; 64], field).unwrap();
        assert_relative_eq!(mode_volume(&grid).unwrap(), 0.2, max_relative = 1e-12);
    }

    #[test]
    fn mode_volume_gaussian_matches_analytic() {
        // |E|² = exp(-r²/σ²) on a uniform-ε grid integrates to π^{3/2}σ³
        // relative to its peak.
        let sigma = 1.0_f64;
        let h = 0.2;
        let half = 25; // ±5σ
        let mut eps = Vec::new();
        let mut field = Vec::new();
        for i in -half..=half {
            for j in -half..=half {
                for k in -half..=half {
                    let r2 = (i as f64 * h).powi(2) + (j as f64 * h).powi(2) + (k as f64 * h).powi(2);
                    eps.push(1.0);
                    field.push((-r2 / (sigma * sigma)).exp());
                }
            }
        }
        let grid = FieldGrid::new(h * h * h, eps, field).unwrap();
        let v = mode_volume(&grid).unwrap();
        let analytic = core::f64::consts::PI.powf(1.5) * sigma.powi(3);
        assert_relative_eq!(v, analytic, max_relative = 0.01);
    }

    #[test]
    fn mode_volume_rejects_zero_field() {
        let grid = FieldGrid::new(1.0, vec![1.0; 8], vec![0.0; 8]).unwrap();
        assert!(matches!(mode_volume(&grid), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn relative_mode_volume_near_minimum_cavity() {
        // 0.74 (λ/n)³ at 897.3 nm in GaAs (n = 3.46), cell unit = nm.
        let unit = 897.3 / 3.46;
        let v_abs = 0.74 * unit * unit * unit;
        assert_relative_eq!(
            relative_mode_volume(v_abs, 897.3, 3.46).unwrap(),
            0.74,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cavity_spec_is_wavelength_consistent() {
        let cavity = CavitySpec::new(897.3, 3.46, 23_000.0, 5_200.0, 0.74).unwrap();
        // omega0 = 2πc/λ round trip.
        let lambda_back =
            2.0 * core::f64::consts::PI * crate::units::SPEED_OF_LIGHT / cavity.omega0 * 1e9;
        assert_relative_eq!(lambda_back, cavity.wavelength_nm, max_relative = 1e-12);
        assert_relative_eq!(cavity.kappa_perp(), 182.6, max_relative = 1e-3);
        assert_relative_eq!(cavity.kappa_par() / cavity.kappa_perp(), 4.423, max_relative = 1e-3);
        assert!(CavitySpec::new(897.3, 3.46, 0.0, 5_200.0, 0.74).is_err());
        assert!(CavitySpec::new(897.3, 3.46, 23_000.0, 5_200.0, -0.1).is_err());
    }

    #[test]
    fn presets_match_reported_rows() {
        let s1 = load_preset("system1").unwrap();
        assert_relative_eq!(s1.emitter.g0, 50.0);
        assert_relative_eq!(s1.rates.total_cavity_decay(), 800.0, max_relative = 1e-12);
        assert_relative_eq!(s1.rates.kappa_par / s1.rates.kappa_perp, 0.62, max_relative = 1e-12);
        assert_relative_eq!(s1.emitter.gamma_emitter, 10.0);
        assert_eq!(s1.indistinguishability, Some(0.67));

        let th = load_preset("theoretical").unwrap();
        assert_relative_eq!(th.rates.kappa_par / th.rates.kappa_perp, 4.4, max_relative = 1e-12);
        assert_relative_eq!(th.rates.total_cavity_decay(), 46.0, max_relative = 1e-12);
        assert_relative_eq!(th.emitter.g0, 230.0);

        let best = load_preset("best_observed").unwrap();
        assert_relative_eq!(best.rates.total_cavity_decay(), 210.0, max_relative = 1e-12);
        assert_relative_eq!(best.rates.kappa_par / best.rates.kappa_perp, 1.9, max_relative = 1e-12);
        assert_eq!(best.emitter.g0, 0.0);
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(matches!(load_preset("system2"), Err(Error::UnknownPreset(_))));
    }

    proptest! {
        #[test]
        fn budget_fractions_sum_to_one(
            kp in 1e-3..1e4f64,
            kpar in 0.0..1e4f64,
            gm in 0.0..1e4f64,
        ) {
            let rates = CouplingRates::new(kp, kpar, 0.0, gm).unwrap();
            let b = loss_budget(&rates).unwrap();
            prop_assert!(b.vertical >= 0.0 && b.vertical <= 1.0);
            prop_assert!(b.waveguide >= 0.0 && b.waveguide <= 1.0);
            prop_assert!(b.material >= 0.0 && b.material <= 1.0);
            prop_assert!((b.vertical + b.waveguide + b.material - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mode_volume_scale_invariant(scale in 1e-6..1e6f64) {
            let field: Vec<f64> = (0..27).map(|i| ((i * 7 + 3) % 11) as f64 / 10.0 + 0.01).collect();
            let eps: Vec<f64> = (0..27).map(|i| 1.0 + ((i * 5) % 13) as f64 / 6.0).collect();
            let g1 = FieldGrid::new(0.3, eps.clone(), field.clone()).unwrap();
            let scaled: Vec<f64> = field.iter().map(|f| f * scale).collect();
            let g2 = FieldGrid::new(0.3, eps, scaled).unwrap();
            let v1 = mode_volume(&g1).unwrap();
            let v2 = mode_volume(&g2).unwrap();
            prop_assert!((v1 - v2).abs() <= 1e-9 * v1.abs());
        }
    }
}
