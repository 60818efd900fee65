//! Preset serialization: the bundled parameter sets rendered as a
//! versioned, human-readable TOML document with explicit units in the
//! key names.

use photonet_core::network::{load_preset, ParameterPreset, PRESET_NAMES};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

/// Schema version of the preset document.
pub const PRESET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PresetDoc {
    pub schema_version: u32,
    pub presets: Vec<PresetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PresetEntry {
    pub name: String,
    pub provenance: String,
    pub indistinguishability: Option<f64>,
    pub rates: PresetRates,
    pub emitter: PresetEmitter,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PresetRates {
    pub kappa_perp_ghz: f64,
    pub kappa_par_ghz: f64,
    pub kappa_w_ghz: f64,
    pub gamma_mat_ghz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PresetEmitter {
    pub g0_ghz: f64,
    pub gamma_emitter_ghz: f64,
    pub tau_bulk_ns: f64,
    pub f_pc: f64,
    pub rise_time_ps: f64,
}

impl PresetEntry {
    pub fn from_preset(p: &ParameterPreset) -> Self {
        Self {
            name: p.name.clone(),
            provenance: p.provenance.as_str().to_string(),
            indistinguishability: p.indistinguishability,
            rates: PresetRates {
                kappa_perp_ghz: p.rates.kappa_perp,
                kappa_par_ghz: p.rates.kappa_par,
                kappa_w_ghz: p.rates.kappa_w,
                gamma_mat_ghz: p.rates.gamma_mat,
            },
            emitter: PresetEmitter {
                g0_ghz: p.emitter.g0,
                gamma_emitter_ghz: p.emitter.gamma_emitter,
                tau_bulk_ns: p.emitter.tau_bulk_ns,
                f_pc: p.emitter.f_pc,
                rise_time_ps: p.emitter.rise_time_ps,
            },
        }
    }

    pub fn to_preset(&self) -> CliResult<ParameterPreset> {
        use photonet_core::network::{CouplingRates, EmitterSpec, Provenance};
        let provenance = match self.provenance.as_str() {
            "system1" => Provenance::System1,
            "best_observed" => Provenance::BestObserved,
            "theoretical" => Provenance::Theoretical,
            other => return Err(CliError::validation(format!("unknown provenance '{other}'"))),
        };
        Ok(ParameterPreset {
            name: self.name.clone(),
            rates: CouplingRates::new(
                self.rates.kappa_perp_ghz,
                self.rates.kappa_par_ghz,
                self.rates.kappa_w_ghz,
                self.rates.gamma_mat_ghz,
            )?,
            emitter: EmitterSpec::new(
                self.emitter.g0_ghz,
                self.emitter.gamma_emitter_ghz,
                self.emitter.tau_bulk_ns,
                self.emitter.f_pc,
                self.emitter.rise_time_ps,
            )?,
            indistinguishability: self.indistinguishability,
            provenance,
        })
    }
}

/// The bundled presets as a TOML document.
pub fn bundled_document() -> CliResult<String> {
    let doc = PresetDoc {
        schema_version: PRESET_SCHEMA_VERSION,
        presets: PRESET_NAMES
            .iter()
            .map(|name| Ok(PresetEntry::from_preset(&load_preset(name)?)))
            .collect::<CliResult<Vec<_>>>()?,
    };
    toml::to_string_pretty(&doc).map_err(|e| CliError::runtime(format!("toml encoding: {e}")))
}

/// One preset rendered as TOML.
pub fn show(name: &str) -> CliResult<String> {
    let doc = PresetDoc {
        schema_version: PRESET_SCHEMA_VERSION,
        presets: vec![PresetEntry::from_preset(&load_preset(name)?)],
    };
    toml::to_string_pretty(&doc).map_err(|e| CliError::runtime(format!("toml encoding: {e}")))
}

/// One line per bundled preset.
pub fn listing() -> CliResult<String> {
    let mut out = String::new();
    for name in PRESET_NAMES {
        let p = load_preset(name)?;
        out.push_str(&format!(
            "{:<14} kappa_total={:>6.1} GHz  kappa_par/kappa_perp={:<5.2} g0={:>5.1} GHz  gamma={:>5.1} GHz\n",
            p.name,
            p.rates.total_cavity_decay(),
            p.rates.kappa_par / p.rates.kappa_perp,
            p.emitter.g0,
            p.emitter.gamma_emitter,
        ));
    }
    Ok(out)
}
