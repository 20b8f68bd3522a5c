//! Experiment configuration: a TOML file of flat key-value sections, every
//! key overridable by a command-line flag (flags win). Each run writes its
//! fully resolved configuration beside its outputs so experiments are
//! self-describing and reproducible byte-for-byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Build identifier embedded in every artifact.
pub fn build_id() -> String {
    format!(
        "hydroflux {}{}",
        env!("CARGO_PKG_VERSION"),
        option_env!("HYDROFLUX_BUILD_ID")
            .map(|s| format!("+{s}"))
            .unwrap_or_default()
    )
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub format_version: Option<u32>,
    pub build: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Monthly forcing CSV.
    pub forcing: Option<PathBuf>,
    /// Daily climate CSV (alternative input, aggregated on load).
    pub daily: Option<PathBuf>,
    pub latitude_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Inclusive ranges, `YYYY-MM:YYYY-MM` (or `YYYY:YYYY` for whole years).
    pub warmup: Option<String>,
    pub train: Option<String>,
    pub test: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcdSection {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub sm0: Option<f64>,
    pub gw0: Option<f64>,
    /// Parameter file written by `calibrate` (flags above override it).
    pub params_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoSection {
    pub case: Option<String>,
    pub swarm: Option<usize>,
    pub iterations: Option<usize>,
    pub inertia: Option<f64>,
    pub cognitive: Option<f64>,
    pub social: Option<f64>,
    pub calibrate_init: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlSection {
    pub model: Option<String>,
    /// `p,t_avg` or `p,et`.
    pub inputs: Option<String>,
    #[serde(default)]
    pub hyper: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PimlSection {
    pub et_model: Option<String>,
    pub q_model: Option<String>,
    /// `predicted` (default) or `observed`.
    pub layer2_train_et: Option<String>,
    /// `observed` (default) or `simulated`.
    pub states: Option<String>,
    #[serde(default)]
    pub et_hyper: BTreeMap<String, f64>,
    #[serde(default)]
    pub q_hyper: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub months: Option<usize>,
    pub start: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub sm0: Option<f64>,
    pub gw0: Option<f64>,
    pub noise_et: Option<f64>,
    pub noise_sm: Option<f64>,
    pub noise_gw: Option<f64>,
    pub noise_q: Option<f64>,
    pub p_mean: Option<f64>,
    pub p_amplitude: Option<f64>,
    pub p_sigma: Option<f64>,
    pub t_mean: Option<f64>,
    pub t_amplitude: Option<f64>,
    pub latitude_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub predictions: Option<PathBuf>,
    pub variable: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterBalanceSection {
    pub observations: Option<PathBuf>,
    /// `label=et.csv,q.csv` entries.
    #[serde(default)]
    pub predictions: Vec<String>,
    pub period: Option<String>,
    pub storage_threshold_mm: Option<f64>,
    pub dsm: Option<f64>,
    pub dgw: Option<f64>,
}

/// The whole configuration file; unknown sections are rejected so typos
/// surface instead of silently falling back to defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub abcd: AbcdSection,
    #[serde(default)]
    pub pso: PsoSection,
    #[serde(default)]
    pub ml: MlSection,
    #[serde(default)]
    pub piml: PimlSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub water_balance: WaterBalanceSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("cannot parse {}: {e}", path.display())))
    }

    /// Stamp run metadata and write the resolved file beside the outputs.
    pub fn write_resolved(&mut self, command: &str, seed: u64, out_dir: &Path) -> Result<(), CliError> {
        self.run.command = Some(command.to_string());
        self.run.seed = Some(seed);
        self.run.format_version = Some(FORMAT_VERSION);
        self.run.build = Some(build_id());
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::config(format!("cannot serialize config: {e}")))?;
        std::fs::write(out_dir.join("config.toml"), text)
            .map_err(|e| CliError::config(format!("cannot write config: {e}")))?;
        Ok(())
    }
}

/// Flag beats config file beats default.
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn pick_opt<T: Clone>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}
