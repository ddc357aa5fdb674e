//! Experiment configuration files.
//!
//! TOML with three sections; every key carries its unit in the name and
//! unknown keys are rejected. Omitted keys take the defaults below.
//!
//! ```toml
//! [system]
//! num_antennas = 3                 # N
//! num_users = 6                    # M
//! num_targets = 1                  # K
//! slots_per_episode = 100          # T
//! slot_duration_s = 1.0
//! max_user_power_w = 0.5
//! energy_budget_j = 180.0          # default 0.6 * M * T * P0 * slot_duration_s
//! snr_threshold_db = 10.0
//! reward_weight = 0.1
//! snr_reward_domain = "db"         # "db" | "linear"
//! snr_floor_db = -40.0
//! area_side_m = 150.0
//! max_antenna_step_m = 5.0
//! max_user_step_m = 1.0
//! mobility = "env-mobility"        # "env-mobility" | "paper-literal"
//! carrier_frequency_hz = 28e9
//! noise_power_dbm = -90.0
//! waveguide_height_m = 3.0
//! effective_refractive_index = 1.4
//! min_spacing_wavelengths = 0.5
//! feed_x_m = 0.0
//! waveguide_x_min_m = 0.0
//! waveguide_x_max_m = 150.0
//!
//! [agent]                          # see AgentConfig
//!
//! [experiment]
//! algorithms = ["merl", "td3", "ddpg", "random"]
//! learning_rates = []              # empty: agent.learning_rate only
//! episodes = 500
//! seeds = [0, 1, 2]
//! eval_every_episodes = 1
//! eval_episodes = 10
//! output_dir = "runs"
//! moving_average_window = 10
//! final_window_fraction = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{AgentConfig, Algorithm};
use crate::env::{MobilityMode, SnrDomain, SystemConfig};
use crate::physics::{db_to_linear, CarrierConfig, WaveguideConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub slots_per_episode: usize,
    pub slot_duration_s: f64,
    pub max_user_power_w: f64,
    pub energy_budget_j: Option<f64>,
    pub snr_threshold_db: f64,
    pub reward_weight: f64,
    pub snr_reward_domain: SnrDomain,
    pub snr_floor_db: f64,
    pub area_side_m: f64,
    pub max_antenna_step_m: f64,
    pub max_user_step_m: f64,
    pub mobility: MobilityMode,
    pub carrier_frequency_hz: f64,
    pub noise_power_dbm: f64,
    pub waveguide_height_m: f64,
    pub effective_refractive_index: f64,
    pub min_spacing_wavelengths: f64,
    pub feed_x_m: f64,
    pub waveguide_x_min_m: f64,
    pub waveguide_x_max_m: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            num_antennas: 3,
            num_users: 6,
            num_targets: 1,
            slots_per_episode: 100,
            slot_duration_s: 1.0,
            max_user_power_w: 0.5,
            energy_budget_j: None,
            snr_threshold_db: 10.0,
            reward_weight: 0.1,
            snr_reward_domain: SnrDomain::Db,
            snr_floor_db: -40.0,
            area_side_m: 150.0,
            max_antenna_step_m: 5.0,
            max_user_step_m: 1.0,
            mobility: MobilityMode::EnvMobility,
            carrier_frequency_hz: 28e9,
            noise_power_dbm: -90.0,
            waveguide_height_m: 3.0,
            effective_refractive_index: 1.4,
            min_spacing_wavelengths: 0.5,
            feed_x_m: 0.0,
            waveguide_x_min_m: 0.0,
            waveguide_x_max_m: 150.0,
        }
    }
}

impl SystemSection {
    pub fn to_system_config(&self) -> Result<SystemConfig> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if !(self.min_spacing_wavelengths.is_finite() && self.min_spacing_wavelengths > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "min_spacing_wavelengths must be positive, got {}",
                self.min_spacing_wavelengths
            )));
        }
        let carrier = CarrierConfig::from_dbm(self.carrier_frequency_hz, self.noise_power_dbm)
            .map_err(|e| invalid(&e))?;
        let waveguide = WaveguideConfig::new(
            &carrier,
            self.feed_x_m,
            self.waveguide_height_m,
            self.effective_refractive_index,
            self.min_spacing_wavelengths * carrier.wavelength_m,
            self.waveguide_x_min_m,
            self.waveguide_x_max_m,
        )
        .map_err(|e| invalid(&e))?;
        let energy_budget_j = self.energy_budget_j.unwrap_or(
            0.6 * self.num_users as f64
                * self.slots_per_episode as f64
                * self.max_user_power_w
                * self.slot_duration_s,
        );
        let config = SystemConfig {
            num_antennas: self.num_antennas,
            num_users: self.num_users,
            num_targets: self.num_targets,
            slots_per_episode: self.slots_per_episode,
            slot_duration_s: self.slot_duration_s,
            energy_budget_j,
            max_user_power_w: self.max_user_power_w,
            snr_threshold_linear: db_to_linear(self.snr_threshold_db),
            reward_weight: self.reward_weight,
            snr_domain: self.snr_reward_domain,
            snr_floor_db: self.snr_floor_db,
            area_side_m: self.area_side_m,
            max_antenna_step_m: self.max_antenna_step_m,
            max_user_step_m: self.max_user_step_m,
            mobility: self.mobility,
            carrier,
            waveguide,
        };
        config.validate().map_err(|e| invalid(&e))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub algorithms: Vec<Algorithm>,
    pub learning_rates: Vec<f64>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub eval_every_episodes: usize,
    pub eval_episodes: usize,
    pub output_dir: PathBuf,
    pub moving_average_window: usize,
    pub final_window_fraction: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            learning_rates: Vec::new(),
            episodes: 500,
            seeds: vec![0, 1, 2],
            eval_every_episodes: 1,
            eval_episodes: 10,
            output_dir: PathBuf::from("runs"),
            moving_average_window: 10,
            final_window_fraction: 0.1,
        }
    }
}

/// The file as written, before unit conversion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub system: SystemSection,
    pub agent: AgentConfig,
    pub experiment: ExperimentSection,
}

/// A validated configuration ready for a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub file: ConfigFile,
    pub system: SystemConfig,
}

impl ExperimentConfig {
    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let system = file.system.to_system_config()?;
        file.agent.validate().map_err(ConfigError::Invalid)?;
        let ex = &file.experiment;
        if ex.algorithms.is_empty() {
            return Err(ConfigError::Invalid("experiment.algorithms is empty".into()));
        }
        if ex.seeds.is_empty() {
            return Err(ConfigError::Invalid("experiment.seeds is empty".into()));
        }
        if ex.episodes == 0 {
            return Err(ConfigError::Invalid("experiment.episodes must be at least 1".into()));
        }
        if ex.eval_every_episodes == 0 || ex.eval_episodes == 0 {
            return Err(ConfigError::Invalid(
                "eval_every_episodes and eval_episodes must be at least 1".into(),
            ));
        }
        if ex.moving_average_window == 0 {
            return Err(ConfigError::Invalid("moving_average_window must be at least 1".into()));
        }
        if !(ex.final_window_fraction > 0.0 && ex.final_window_fraction <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "final_window_fraction must be in (0, 1], got {}",
                ex.final_window_fraction
            )));
        }
        if let Some(lr) = ex.learning_rates.iter().find(|lr| !(lr.is_finite() && **lr > 0.0)) {
            return Err(ConfigError::Invalid(format!("learning rate {lr} must be positive")));
        }
        Ok(Self { file, system })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn agent(&self) -> &AgentConfig {
        &self.file.agent
    }

    pub fn experiment(&self) -> &ExperimentSection {
        &self.file.experiment
    }

    /// Learning rates to sweep; the agent's own rate when none are listed.
    pub fn learning_rates(&self) -> Vec<f64> {
        if self.file.experiment.learning_rates.is_empty() {
            vec![self.file.agent.learning_rate]
        } else {
            self.file.experiment.learning_rates.clone()
        }
    }

    /// Hex SHA-256 of the canonical JSON form of the parsed file. Formatting,
    /// comments and key order in the source do not affect it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.file).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("config serializes")
    }
}
