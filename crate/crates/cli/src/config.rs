//! JSON config schemas, one struct per subcommand. Unknown keys are
//! rejected everywhere so a typo fails loudly instead of silently running
//! with a default. Field names follow the notation users see in the
//! output files: capital F, J and N, lowercase greek.

use std::path::{Path, PathBuf};

use bdm_core::calibrate::{CalibrationConfig, ParamBounds, Theta};
use bdm_core::model::{ModelParams, RateFamily};
use bdm_core::simulate::InitialCondition;
use bdm_core::spectral::ZeitgeistSchedule;
use serde::Deserialize;

use crate::CliError;

/// Model parameters exactly as they appear in configs and sidecars.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(default)]
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "N")]
    pub n_agents: usize,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(
            self.f,
            self.j,
            self.alpha,
            self.beta,
            self.gamma,
            self.n_agents,
        )?)
    }
}

fn default_family() -> RateFamily {
    RateFamily::Logit
}

/// How the initial state is chosen. `delta` starts every run exactly at
/// n0; `binomial` draws each agent's initial decision independently.
#[derive(Deserialize, Clone, Copy)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialConfig {
    Delta { n0: usize },
    Binomial { p: f64 },
}

impl InitialConfig {
    pub fn condition(&self) -> InitialCondition {
        match *self {
            InitialConfig::Delta { n0 } => InitialCondition::FixedCount(n0),
            InitialConfig::Binomial { p } => InitialCondition::BinomialRandom(p),
        }
    }
}

/// Piecewise-constant field: `values[j]` holds up to `breakpoints[j]`.
/// Revalidated through the library constructor after parsing.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<ZeitgeistSchedule, CliError> {
        Ok(ZeitgeistSchedule::new(
            self.breakpoints.clone(),
            self.values.clone(),
        )?)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub model: ModelConfig,
    #[serde(default = "default_family")]
    pub rates: RateFamily,
    pub initial: InitialConfig,
    pub times: Vec<f64>,
    /// Also write steady.csv next to the evolved distributions.
    #[serde(default)]
    pub write_steady: bool,
    /// Optional external-field schedule; when present the model's F is
    /// ignored and each time is evolved through the schedule.
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub model: ModelConfig,
    #[serde(default = "default_family")]
    pub rates: RateFamily,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelConfig,
    #[serde(default = "default_family")]
    pub rates: RateFamily,
    pub initial: InitialConfig,
    pub t_max: f64,
    pub dt: f64,
    pub trajectories: usize,
    pub seed: u64,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    /// Sample times at which histogram.csv is written; defaults to t_max.
    #[serde(default)]
    pub histogram_times: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Dataset CSV with columns traj_id,t,m.
    pub dataset: PathBuf,
    /// JSON sidecar {"N": .., "beta": 1.0, "alpha": 0.0}; defaults to
    /// dataset_meta.json next to the dataset.
    #[serde(default)]
    pub meta: Option<PathBuf>,
    #[serde(default)]
    pub bounds: Option<ParamBounds>,
    #[serde(default = "default_pop_size")]
    pub pop_size: usize,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// When the generating parameters are known, include the recovery
    /// error metrics in calibration.json.
    #[serde(default)]
    pub truth: Option<Theta>,
}

fn default_pop_size() -> usize {
    CalibrationConfig::default().pop_size
}

fn default_n_steps() -> usize {
    CalibrationConfig::default().n_steps
}

impl CalibrateConfig {
    pub fn meta_path(&self) -> PathBuf {
        match &self.meta {
            Some(p) => p.clone(),
            None => self
                .dataset
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("dataset_meta.json"),
        }
    }
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
