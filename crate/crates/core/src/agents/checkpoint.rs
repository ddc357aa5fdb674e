//! Whole-agent checkpoints: one directory holding every network and
//! optimizer in the binary `nn` formats plus a JSON manifest.
//!
//! ```text
//! manifest.json          algorithm, dims, agent config, config hash,
//!                        RNG state, temperature, update count
//! policy.pnet/.padm      MERL policy and its optimizer
//! actor.pnet/.padm       TD3/DDPG actor and its optimizer
//! actor_target.pnet
//! critic{i}.pnet/.padm   online critic i and its optimizer
//! critic{i}_target.pnet
//! temperature.padm       MERL log-temperature optimizer
//! ```
//!
//! The replay buffer is not stored.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentConfig, AgentError, Algorithm, AnyAgent, QNetwork, Result};
use crate::nn::checkpoint::{load_adam, load_net, save_adam, save_net};
use crate::nn::{DeterministicPolicy, GaussianPolicy};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentManifest {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub config_hash: String,
    pub agent_config: AgentConfig,
    pub rng: ChaCha8Rng,
    pub log_temperature: Option<f64>,
    pub updates: u64,
}

fn save_critics(critics: &[QNetwork], dir: &Path) -> Result<()> {
    for (i, c) in critics.iter().enumerate() {
        save_net(&c.online, &dir.join(format!("critic{i}.pnet")))?;
        save_net(&c.target, &dir.join(format!("critic{i}_target.pnet")))?;
        save_adam(&c.opt, &dir.join(format!("critic{i}.padm")))?;
    }
    Ok(())
}

fn load_critics(n: usize, dir: &Path) -> Result<Vec<QNetwork>> {
    (0..n)
        .map(|i| {
            Ok(QNetwork::from_parts(
                load_net(&dir.join(format!("critic{i}.pnet")))?,
                load_net(&dir.join(format!("critic{i}_target.pnet")))?,
                load_adam(&dir.join(format!("critic{i}.padm")))?,
            ))
        })
        .collect()
}

/// Writes `agent` into `dir` (created if missing).
pub fn save_agent(agent: &AnyAgent, dir: &Path, config_hash: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = match agent {
        AnyAgent::Merl(a) => {
            save_net(&a.policy.net, &dir.join("policy.pnet"))?;
            save_adam(&a.policy_opt, &dir.join("policy.padm"))?;
            save_adam(a.temperature_opt(), &dir.join("temperature.padm"))?;
            save_critics(&a.critics, dir)?;
            AgentManifest {
                format_version: MANIFEST_VERSION,
                algorithm: Algorithm::Merl,
                obs_dim: a.obs_dim(),
                action_dim: a.policy.action_dim(),
                config_hash: config_hash.to_string(),
                agent_config: a.config().clone(),
                rng: a.rng().clone(),
                log_temperature: Some(a.log_temperature()),
                updates: a.updates(),
            }
        }
        AnyAgent::Deterministic(a) => {
            save_net(&a.actor.net, &dir.join("actor.pnet"))?;
            save_net(&a.actor_target.net, &dir.join("actor_target.pnet"))?;
            save_adam(&a.actor_opt, &dir.join("actor.padm"))?;
            save_critics(&a.critics, dir)?;
            AgentManifest {
                format_version: MANIFEST_VERSION,
                algorithm: a.algorithm(),
                obs_dim: a.obs_dim(),
                action_dim: a.action_dim(),
                config_hash: config_hash.to_string(),
                agent_config: a.config().clone(),
                rng: a.rng().clone(),
                log_temperature: None,
                updates: a.updates(),
            }
        }
        AnyAgent::Random(a) => {
            AgentManifest {
                format_version: MANIFEST_VERSION,
                algorithm: Algorithm::Random,
                obs_dim: 0,
                action_dim: a.action_dim(),
                config_hash: config_hash.to_string(),
                agent_config: AgentConfig::default(),
                rng: a.rng().clone(),
                log_temperature: None,
                updates: 0,
            }
        }
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| AgentError::Checkpoint(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<AgentManifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: AgentManifest =
        serde_json::from_str(&text).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(AgentError::Checkpoint(format!(
            "unsupported manifest version {}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Restores an agent saved by [`save_agent`].
pub fn load_agent(dir: &Path) -> Result<(AnyAgent, AgentManifest)> {
    let m = read_manifest(dir)?;
    let mut agent = AnyAgent::new(m.algorithm, m.obs_dim, m.action_dim, &m.agent_config, 0);
    match &mut agent {
        AnyAgent::Merl(a) => {
            let policy = GaussianPolicy::from_net(load_net(&dir.join("policy.pnet"))?)?;
            let critics: [QNetwork; 2] = load_critics(2, dir)?
                .try_into()
                .map_err(|_| AgentError::Checkpoint("expected two critics".into()))?;
            a.restore(
                policy,
                load_adam(&dir.join("policy.padm"))?,
                critics,
                m.log_temperature
                    .ok_or_else(|| AgentError::Checkpoint("missing log_temperature".into()))?,
                load_adam(&dir.join("temperature.padm"))?,
                m.rng.clone(),
                m.updates,
            );
        }
        AnyAgent::Deterministic(a) => {
            let n = a.critics.len();
            a.restore(
                DeterministicPolicy {
                    net: load_net(&dir.join("actor.pnet"))?,
                },
                DeterministicPolicy {
                    net: load_net(&dir.join("actor_target.pnet"))?,
                },
                load_adam(&dir.join("actor.padm"))?,
                load_critics(n, dir)?,
                m.rng.clone(),
                m.updates,
            );
        }
        AnyAgent::Random(a) => a.restore(m.rng.clone()),
    }
    Ok((agent, m))
}
