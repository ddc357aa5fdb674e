//! Learners for the antenna/power control problem: the maximum-entropy
//! actor-critic, TD3, DDPG and a uniform random baseline.
//!
//! Agents see flattened observations and emit raw actions in `[-1, 1]^d`;
//! mapping those onto the physical decision is the environment's job.
//! Every agent owns its random stream, so a run is reproducible from its
//! seed alone.

pub mod checkpoint;
mod critic;
mod deterministic;
mod merl;
mod random;
mod replay;

pub use critic::{bootstrap_targets, elementwise_min, min_q_action_gradient, QNetwork};
pub use deterministic::{DeterministicAgent, DeterministicKind};
pub use merl::{CriticTargets, MerlAgent, PolicyUpdate};
pub use random::RandomAgent;
pub use replay::{Batch, ReplayBuffer, Transition};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("replay buffer: {0}")]
    Buffer(String),
    #[error("non-finite {0}; training halted")]
    NonFinite(String),
    #[error("observation has {got} components, agent expects {expected}")]
    ObservationDimension { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AgentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Merl,
    Td3,
    Ddpg,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Merl, Algorithm::Td3, Algorithm::Ddpg, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Merl => "merl",
            Algorithm::Td3 => "td3",
            Algorithm::Ddpg => "ddpg",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "merl" => Ok(Algorithm::Merl),
            "td3" => Ok(Algorithm::Td3),
            "ddpg" => Ok(Algorithm::Ddpg),
            "random" => Ok(Algorithm::Random),
            other => Err(format!("unknown algorithm '{other}' (expected merl, td3, ddpg or random)")),
        }
    }
}

/// Whether an action is for data collection or for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Explore,
    Exploit,
}

/// Learner hyperparameters. Defaults follow the experiment table where it
/// has a value; the rest are common choices for this algorithm family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    /// Step size for the log-temperature; falls back to `learning_rate`.
    pub temperature_learning_rate: Option<f64>,
    pub discount: f64,
    pub soft_update_rate: f64,
    pub batch_size: usize,
    /// Update rounds (critics, then policy, temperature and targets) per
    /// stored transition once warm-up is over.
    pub updates_per_step: usize,
    pub warmup_transitions: usize,
    pub replay_capacity: usize,
    pub initial_temperature: f64,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
    pub exploration_noise: f64,
    pub target_policy_noise: f64,
    pub target_noise_clip: f64,
    pub policy_delay: usize,
    /// Output layers of actors and critics are drawn from
    /// `U(-b, b)` with this `b`; 0 keeps the fan-in scaling of the other
    /// layers.
    pub output_init_bound: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            learning_rate: 1e-5,
            temperature_learning_rate: None,
            discount: 0.97,
            soft_update_rate: 0.01,
            batch_size: 256,
            updates_per_step: 4,
            warmup_transitions: 1000,
            replay_capacity: 100_000,
            initial_temperature: 0.2,
            target_entropy: None,
            exploration_noise: 0.1,
            target_policy_noise: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
            output_init_bound: 3e-3,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err("hidden_sizes entries must be positive".into());
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("initial_temperature", self.initial_temperature),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(lr) = self.temperature_learning_rate {
            if !(lr.is_finite() && lr >= 0.0) {
                return Err(format!("temperature_learning_rate must be >= 0, got {lr}"));
            }
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(format!("discount must be in [0, 1), got {}", self.discount));
        }
        if !(self.soft_update_rate > 0.0 && self.soft_update_rate <= 1.0) {
            return Err(format!("soft_update_rate must be in (0, 1], got {}", self.soft_update_rate));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err("need 0 < batch_size <= replay_capacity".into());
        }
        if self.policy_delay == 0 || self.updates_per_step == 0 {
            return Err("policy_delay and updates_per_step must be at least 1".into());
        }
        for (name, v) in [
            ("exploration_noise", self.exploration_noise),
            ("target_policy_noise", self.target_policy_noise),
            ("target_noise_clip", self.target_noise_clip),
            ("output_init_bound", self.output_init_bound),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }

    /// First batch is drawn once the buffer holds this many transitions.
    pub fn updates_start_at(&self) -> usize {
        self.warmup_transitions.max(self.batch_size)
    }
}

/// What one call to [`Agent::train_step`] did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainDiagnostics {
    pub updated: bool,
    pub critic_losses: Vec<f64>,
    pub policy_loss: Option<f64>,
    pub temperature: Option<f64>,
    pub entropy: Option<f64>,
    /// Bootstrap values never exceeded any individual target critic.
    pub target_min_ok: Option<bool>,
}

pub trait Agent {
    fn algorithm(&self) -> Algorithm;

    fn action_dim(&self) -> usize;

    fn act(&mut self, obs: &[f64], mode: ActMode) -> Result<Vec<f64>>;

    /// Stores the transition and, past warm-up, runs one round of updates.
    fn train_step(&mut self, transition: Transition) -> Result<TrainDiagnostics>;
}

/// Closed set of the learners, for harness code that picks one at runtime.
#[derive(Debug, Clone)]
pub enum AnyAgent {
    Merl(MerlAgent),
    Deterministic(DeterministicAgent),
    Random(RandomAgent),
}

impl AnyAgent {
    pub fn new(algorithm: Algorithm, obs_dim: usize, action_dim: usize, config: &AgentConfig, seed: u64) -> Self {
        match algorithm {
            Algorithm::Merl => AnyAgent::Merl(MerlAgent::new(obs_dim, action_dim, config.clone(), seed)),
            Algorithm::Td3 => AnyAgent::Deterministic(DeterministicAgent::new(
                DeterministicKind::Td3,
                obs_dim,
                action_dim,
                config.clone(),
                seed,
            )),
            Algorithm::Ddpg => AnyAgent::Deterministic(DeterministicAgent::new(
                DeterministicKind::Ddpg,
                obs_dim,
                action_dim,
                config.clone(),
                seed,
            )),
            Algorithm::Random => AnyAgent::Random(RandomAgent::new(action_dim, seed)),
        }
    }

    fn inner(&self) -> &dyn Agent {
        match self {
            AnyAgent::Merl(a) => a,
            AnyAgent::Deterministic(a) => a,
            AnyAgent::Random(a) => a,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Agent {
        match self {
            AnyAgent::Merl(a) => a,
            AnyAgent::Deterministic(a) => a,
            AnyAgent::Random(a) => a,
        }
    }
}

impl Agent for AnyAgent {
    fn algorithm(&self) -> Algorithm {
        self.inner().algorithm()
    }

    fn action_dim(&self) -> usize {
        self.inner().action_dim()
    }

    fn act(&mut self, obs: &[f64], mode: ActMode) -> Result<Vec<f64>> {
        self.inner_mut().act(obs, mode)
    }

    fn train_step(&mut self, transition: Transition) -> Result<TrainDiagnostics> {
        self.inner_mut().train_step(transition)
    }
}

pub(crate) fn check_obs(obs: &[f64], expected: usize) -> Result<()> {
    if obs.len() != expected {
        return Err(AgentError::ObservationDimension {
            expected,
            got: obs.len(),
        });
    }
    Ok(())
}

/// Derives an independent sub-seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sac".parse::<Algorithm>().is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let c = AgentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.discount, 0.97);
        assert_eq!(c.soft_update_rate, 0.01);
        assert_eq!(c.batch_size, 256);
        assert_eq!(c.learning_rate, 1e-5);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
