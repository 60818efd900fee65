//! Scenario configuration files.
//!
//! Configurations are TOML with explicit units in the key names
//! (`kappa_perp_ghz`, `t_end_ns`, ...). Every file carries a schema
//! `version` and exactly one `[scenario.<kind>]` table; stochastic kinds
//! require a `master_seed`. See the README for the full schema.

use std::path::{Path, PathBuf};

use photonet_core::counting::{BackgroundSpec, EmissionModel};
use photonet_core::dynamics::{Detunings, DriveTerm};
use photonet_core::network::{load_preset, CouplingRates, EmitterSpec};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Schema version accepted by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    pub master_seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    SteadyState(SteadyStateParams),
    Evolve(EvolveParams),
    Exciton(ExcitonParams),
    G2(G2Params),
    Hom(HomParams),
    Fit(FitParams),
    DropFilter(DropFilterParams),
    PresetReport(PresetReportParams),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::SteadyState(_) => "steady-state",
            Scenario::Evolve(_) => "evolve",
            Scenario::Exciton(_) => "exciton",
            Scenario::G2(_) => "g2",
            Scenario::Hom(_) => "hom",
            Scenario::Fit(_) => "fit",
            Scenario::DropFilter(_) => "drop-filter",
            Scenario::PresetReport(_) => "preset-report",
        }
    }

    pub fn needs_seed(&self) -> bool {
        match self {
            Scenario::G2(p) => p.input_record.is_none(),
            Scenario::Hom(_) => true,
            Scenario::Fit(p) => p.synthesize.as_ref().is_some_and(|s| s.noise_sigma > 0.0),
            _ => false,
        }
    }
}

/// Coupling rates: either a named preset or an explicit triple.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub preset: Option<String>,
    pub kappa_perp_ghz: Option<f64>,
    pub kappa_par_ghz: Option<f64>,
    pub kappa_w_ghz: Option<f64>,
    pub gamma_mat_ghz: Option<f64>,
}

impl RatesConfig {
    pub fn resolve(&self) -> CliResult<CouplingRates> {
        let explicit = [self.kappa_perp_ghz, self.kappa_par_ghz, self.kappa_w_ghz];
        match (&self.preset, explicit.iter().any(Option::is_some)) {
            (Some(name), false) => {
                if self.gamma_mat_ghz.is_some() {
                    return Err(CliError::validation(
                        "rates: gamma_mat_ghz cannot be combined with a preset",
                    ));
                }
                Ok(load_preset(name)?.rates)
            }
            (None, true) => {
                let [kp, kpar, kw] = explicit.map(|v| v.unwrap_or(f64::NAN));
                if !kp.is_finite() || !kpar.is_finite() || !kw.is_finite() {
                    return Err(CliError::validation(
                        "rates: kappa_perp_ghz, kappa_par_ghz, and kappa_w_ghz must all be given",
                    ));
                }
                Ok(CouplingRates::new(kp, kpar, kw, self.gamma_mat_ghz.unwrap_or(0.0))?)
            }
            (None, false) => Err(CliError::validation(
                "rates: give a preset or an explicit kappa triple",
            )),
            (Some(_), true) => Err(CliError::validation(
                "rates: preset and explicit kappas are mutually exclusive",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningsConfig {
    #[serde(default)]
    pub delta_s_ghz: f64,
    #[serde(default)]
    pub delta_t_ghz: f64,
    #[serde(default)]
    pub delta_w_ghz: f64,
}

impl DetuningsConfig {
    pub fn resolve(&self) -> CliResult<Detunings> {
        Ok(Detunings::new(self.delta_s_ghz, self.delta_t_ghz, self.delta_w_ghz)?)
    }
}

/// Detunings from an optional config block (matched when absent).
pub fn detunings_or_matched(d: &Option<DetuningsConfig>) -> CliResult<Detunings> {
    d.map_or(Ok(Detunings::matched()), |c| c.resolve())
}

/// Emitter parameters: a named preset or explicit values.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    pub preset: Option<String>,
    pub g0_ghz: Option<f64>,
    pub gamma_emitter_ghz: Option<f64>,
    pub tau_bulk_ns: Option<f64>,
    pub f_pc: Option<f64>,
    pub rise_time_ps: Option<f64>,
}

impl EmitterConfig {
    pub fn resolve(&self) -> CliResult<EmitterSpec> {
        if let Some(name) = &self.preset {
            if self.g0_ghz.is_some() || self.gamma_emitter_ghz.is_some() {
                return Err(CliError::validation(
                    "emitter: preset and explicit values are mutually exclusive",
                ));
            }
            return Ok(load_preset(name)?.emitter);
        }
        let g0 = self
            .g0_ghz
            .ok_or_else(|| CliError::validation("emitter: g0_ghz or preset required"))?;
        let gamma = self
            .gamma_emitter_ghz
            .ok_or_else(|| CliError::validation("emitter: gamma_emitter_ghz or preset required"))?;
        Ok(EmitterSpec::new(
            g0,
            gamma,
            self.tau_bulk_ns.unwrap_or(1.4),
            self.f_pc.unwrap_or(0.3),
            self.rise_time_ps.unwrap_or(23.0),
        )?)
    }
}

/// Emission-time model: explicit lifetimes or derived from an emitter.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionConfig {
    pub preset: Option<String>,
    pub lifetime_ps: Option<f64>,
    pub rise_ps: Option<f64>,
}

impl EmissionConfig {
    pub fn resolve(&self) -> CliResult<EmissionModel> {
        if let Some(name) = &self.preset {
            if self.lifetime_ps.is_some() {
                return Err(CliError::validation(
                    "emission: preset and lifetime_ps are mutually exclusive",
                ));
            }
            let spec = load_preset(name)?.emitter;
            let mut model = EmissionModel::from_emitter(&spec);
            if let Some(rise) = self.rise_ps {
                model = EmissionModel::new(rise, model.lifetime_ps)?;
            }
            return Ok(model);
        }
        let lifetime = self
            .lifetime_ps
            .ok_or_else(|| CliError::validation("emission: lifetime_ps or preset required"))?;
        Ok(EmissionModel::new(self.rise_ps.unwrap_or(0.0), lifetime)?)
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    #[serde(default)]
    pub mean_photons_per_pulse: f64,
    /// Calibrate the background level to hit this pulsed g²(0) first.
    pub calibrate_target_g2: Option<f64>,
    pub decay_time_ps: Option<f64>,
    #[serde(default)]
    pub dark_rate_hz: f64,
    pub filter_width_ghz: Option<f64>,
}

impl BackgroundConfig {
    pub fn resolve(&self) -> CliResult<BackgroundSpec> {
        Ok(BackgroundSpec::new(
            self.mean_photons_per_pulse,
            self.decay_time_ps.unwrap_or(100.0),
            self.dark_rate_hz,
            self.filter_width_ghz,
        )?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateParams {
    pub rates: RatesConfig,
    pub detunings: Option<DetuningsConfig>,
    pub drive_amplitude: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub kind: DriveKind,
    pub amplitude: Option<f64>,
    pub detuning_ghz: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DriveKind {
    None,
    Constant,
    Harmonic,
}

impl DriveConfig {
    pub fn resolve(&self) -> CliResult<DriveTerm> {
        let amplitude = self.amplitude.unwrap_or(1.0);
        Ok(match self.kind {
            DriveKind::None => DriveTerm::None,
            DriveKind::Constant => DriveTerm::constant(amplitude),
            DriveKind::Harmonic => DriveTerm::Harmonic {
                amplitude: photonet_core::Complex64::new(amplitude, 0.0),
                detuning: self.detuning_ghz.unwrap_or(0.0),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    #[serde(default)]
    pub source: f64,
    #[serde(default)]
    pub target: f64,
    #[serde(default)]
    pub waveguide: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub rates: RatesConfig,
    pub detunings: Option<DetuningsConfig>,
    pub drive: Option<DriveConfig>,
    pub initial: Option<InitialStateConfig>,
    pub t_end_ns: f64,
    pub dt_ns: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ExcitonModel {
    /// Full exciton + three-mode network integration.
    Network,
    /// Single-mode reduction against the total cavity linewidth.
    SingleMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitonParams {
    pub rates: RatesConfig,
    pub emitter: EmitterConfig,
    pub detunings: Option<DetuningsConfig>,
    pub model: Option<ExcitonModel>,
    pub t_end_ns: f64,
    pub dt_ns: Option<f64>,
    /// Window for the exponential decay fit of |e(t)|², ns.
    pub fit_window_ns: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Params {
    /// Analyze an existing click stream (CSV: time_ns,detector) instead
    /// of simulating one.
    pub input_record: Option<PathBuf>,
    pub emission: Option<EmissionConfig>,
    pub background: Option<BackgroundConfig>,
    pub n_pulses: Option<usize>,
    pub rep_period_ns: Option<f64>,
    pub excitation_prob: Option<f64>,
    pub bin_width_ns: Option<f64>,
    pub window_ns: Option<f64>,
    /// Also write the raw click stream (large).
    #[serde(default)]
    pub write_record: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomParams {
    pub emission: EmissionConfig,
    pub background: Option<BackgroundConfig>,
    pub overlap: f64,
    pub visibility: Option<f64>,
    pub path_delay_ns: Option<f64>,
    pub splitter_ratio: Option<f64>,
    pub dark_fraction: Option<f64>,
    pub n_reps: usize,
    pub rep_period_ns: Option<f64>,
    pub bin_width_ns: Option<f64>,
    /// Additive multiphoton correction fed to the overlap estimator.
    pub g2_correction: Option<f64>,
    #[serde(default)]
    pub write_record: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeConfig {
    pub rates: RatesConfig,
    pub detunings: Option<DetuningsConfig>,
    /// Configuration labels, e.g. ["SS", "ST", "WG-T"].
    pub configurations: Vec<String>,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Optional explicit grid; otherwise adapted to the rates.
    pub grid_half_span_ghz: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    /// CSV file with a detuning column and one column per configuration.
    pub input: Option<PathBuf>,
    /// Synthesize the input instead of reading it.
    pub synthesize: Option<SynthesizeConfig>,
    pub initial_guess: RatesConfig,
    #[serde(default)]
    pub free_gamma: bool,
    #[serde(default)]
    pub fix_detunings: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropFilterParams {
    pub rates: RatesConfig,
    pub detunings: Option<DetuningsConfig>,
    pub bandwidth_ghz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetReportParams {
    /// A preset name, or all presets when omitted.
    pub name: Option<String>,
}

/// A parsed and validated configuration plus its provenance hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    /// First 16 hex digits of the SHA-256 of the raw file.
    pub hash: String,
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let file: ConfigFile = toml::from_str(&raw)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    if file.version != CONFIG_VERSION {
        return Err(CliError::validation(format!(
            "unsupported config version {} (this build reads version {CONFIG_VERSION})",
            file.version
        )));
    }
    Ok(LoadedConfig { file, hash: short_sha256(raw.as_bytes()) })
}

pub fn short_sha256(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
