//! Training campaigns over (algorithm, seed, learning rate) tuples.
//!
//! Each tuple gets its own directory under the output root:
//!
//! ```text
//! <algo>_seed<seed>_lr<lr>/
//!   metrics.csv      one line per episode, appended as training proceeds
//!   manifest.json    config hash, tuple, status; no timing
//!   timing.json      wall-clock seconds
//!   checkpoint/      final agent state
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{EpisodeMetrics, MetricsWriter};
use crate::agents::checkpoint::save_agent;
use crate::agents::{derive_seed, ActMode, Agent, AgentConfig, AgentError, Algorithm, AnyAgent, Transition};
use crate::env::{EnvError, PinchingEnv, SystemConfig};
use crate::physics::linear_to_db;

const AGENT_STREAM: u64 = 11;
const TRAIN_STREAM: u64 = 1 << 20;
const EVAL_STREAM: u64 = 1 << 40;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub learning_rate: f64,
}

impl RunKey {
    pub fn dir_name(&self) -> String {
        format!("{}_seed{}_lr{:e}", self.algorithm, self.seed, self.learning_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Completed,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub key: RunKey,
    pub episodes: usize,
    pub config_hash: String,
    pub code_version: String,
    pub columns: Vec<String>,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: RunKey,
    pub status: RunStatus,
    pub episodes: Vec<EpisodeMetrics>,
    pub wall_clock_s: f64,
    pub checkpoint: Option<PathBuf>,
    pub dir: PathBuf,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        matches!(self.status, RunStatus::Failed(_))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Summary of one exploit-mode episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub reward: f64,
    pub mean_sum_rate: f64,
    pub mean_snr_linear: f64,
    pub mean_snr_db: f64,
    pub snr_violations: usize,
    pub steps: usize,
}

/// Every tuple in config order: algorithm-major, then learning rate, then
/// seed.
pub fn campaign_keys(config: &ExperimentConfig) -> Vec<RunKey> {
    let mut keys = Vec::new();
    for &algorithm in &config.experiment().algorithms {
        for &learning_rate in &config.learning_rates() {
            for &seed in &config.experiment().seeds {
                keys.push(RunKey {
                    algorithm,
                    seed,
                    learning_rate,
                });
            }
        }
    }
    keys
}

/// Runs every tuple, in parallel across tuples, writing under `out_dir`.
/// A tuple that fails is recorded as failed; the others continue. Only
/// failures to create `out_dir` abort the campaign.
pub fn run_campaign(config: &ExperimentConfig, out_dir: &Path) -> std::io::Result<Vec<RunRecord>> {
    std::fs::create_dir_all(out_dir)?;
    let hash = config.hash();
    let records = campaign_keys(config)
        .into_par_iter()
        .map(|key| run_one(config, key, &hash, out_dir))
        .collect();
    Ok(records)
}

/// Trains and evaluates one tuple. Never panics on training failure; the
/// returned record carries the status.
pub fn run_one(config: &ExperimentConfig, key: RunKey, config_hash: &str, out_dir: &Path) -> RunRecord {
    let dir = out_dir.join(key.dir_name());
    let started = Instant::now();
    let mut episodes = Vec::new();
    let mut checkpoint = None;
    let status = match train_run(config, key, config_hash, &dir, &mut episodes, &mut checkpoint) {
        Ok(()) => RunStatus::Completed,
        Err(e) => RunStatus::Failed(e.to_string()),
    };
    let wall_clock_s = started.elapsed().as_secs_f64();
    let _ = write_manifest(&dir, config, key, config_hash, status.clone());
    let _ = std::fs::write(
        dir.join(TIMING_FILE),
        serde_json::json!({ "wall_clock_s": wall_clock_s }).to_string(),
    );
    RunRecord {
        key,
        status,
        episodes,
        wall_clock_s,
        checkpoint,
        dir,
    }
}

fn write_manifest(
    dir: &Path,
    config: &ExperimentConfig,
    key: RunKey,
    config_hash: &str,
    status: RunStatus,
) -> std::io::Result<()> {
    let manifest = RunManifest {
        format_version: 1,
        key,
        episodes: config.experiment().episodes,
        config_hash: config_hash.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        columns: EpisodeMetrics::COLUMNS.iter().map(|c| c.to_string()).collect(),
        status,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(MANIFEST_FILE), text)
}

fn train_run(
    config: &ExperimentConfig,
    key: RunKey,
    config_hash: &str,
    dir: &Path,
    episodes: &mut Vec<EpisodeMetrics>,
    checkpoint: &mut Option<PathBuf>,
) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    write_manifest(dir, config, key, config_hash, RunStatus::Running)?;
    let mut writer = MetricsWriter::new(BufWriter::new(File::create(dir.join(METRICS_FILE))?))?;

    let system = &config.system;
    let agent_config = AgentConfig {
        learning_rate: key.learning_rate,
        ..config.agent().clone()
    };
    let mut agent = AnyAgent::new(
        key.algorithm,
        system.observation_dim(),
        system.action_dim(),
        &agent_config,
        derive_seed(key.seed, AGENT_STREAM),
    );
    let ex = config.experiment();
    let mut env = PinchingEnv::new(system.clone(), derive_seed(key.seed, TRAIN_STREAM))?;
    let mut eval_env = env.clone();

    for episode in 0..ex.episodes {
        let mut row = train_episode(
            &mut agent,
            &mut env,
            derive_seed(key.seed, TRAIN_STREAM + episode as u64),
        )?;
        row.episode = episode;
        if (episode + 1) % ex.eval_every_episodes == 0 || episode + 1 == ex.episodes {
            let mut acc = [0.0; 5];
            for j in 0..ex.eval_episodes {
                let seed = derive_seed(key.seed, EVAL_STREAM + (episode * ex.eval_episodes + j) as u64);
                let s = evaluate_episode(&mut agent, &mut eval_env, seed)?;
                acc[0] += s.reward;
                acc[1] += s.mean_sum_rate;
                acc[2] += s.mean_snr_linear;
                acc[3] += s.mean_snr_db;
                acc[4] += s.snr_violations as f64;
            }
            let n = ex.eval_episodes as f64;
            row.eval_reward = acc[0] / n;
            row.eval_sum_rate = acc[1] / n;
            row.eval_snr_linear = acc[2] / n;
            row.eval_snr_db = acc[3] / n;
            row.eval_snr_violations = acc[4] / n;
        }
        writer.append(&row)?;
        episodes.push(row);
    }
    writer.finish()?;

    let ckpt = dir.join(CHECKPOINT_DIR);
    save_agent(&agent, &ckpt, config_hash)?;
    *checkpoint = Some(ckpt);
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// One exploring episode with a learning update after every step.
fn train_episode(agent: &mut AnyAgent, env: &mut PinchingEnv, seed: u64) -> Result<EpisodeMetrics, RunError> {
    env.reset(seed)?;
    let mut row = EpisodeMetrics::blank();
    let mut obs = env.observation();
    let mut losses = (0.0, 0usize);
    let mut policy_losses = (0.0, 0usize);
    while !env.is_done() {
        let action = agent.act(&obs, ActMode::Explore)?;
        let out = env.step_raw(&action)?;
        let next_obs = env.observation();
        let diag = agent.train_step(Transition {
            obs: std::mem::take(&mut obs),
            action,
            reward: out.reward,
            next_obs: next_obs.clone(),
            terminal: out.terminal,
        })?;
        obs = next_obs;

        row.train_reward += out.reward;
        row.train_steps += 1;
        let r = &out.constraint_report;
        row.spacing_projections += r.spacing_projected as usize;
        row.power_clips += r.power_clipped as usize;
        row.energy_scaled += r.energy_scaled as usize;
        if diag.updated {
            row.updates += 1;
            losses.0 += diag.critic_losses.iter().sum::<f64>() / diag.critic_losses.len().max(1) as f64;
            losses.1 += 1;
        }
        if let Some(l) = diag.policy_loss {
            policy_losses.0 += l;
            policy_losses.1 += 1;
        }
        if let Some(t) = diag.temperature {
            row.temperature = t;
        }
        if let Some(h) = diag.entropy {
            row.entropy = h;
        }
    }
    if losses.1 > 0 {
        row.critic_loss = losses.0 / losses.1 as f64;
    }
    if policy_losses.1 > 0 {
        row.policy_loss = policy_losses.0 / policy_losses.1 as f64;
    }
    Ok(row)
}

/// Runs one exploit-mode episode without learning.
pub fn evaluate_episode(agent: &mut AnyAgent, env: &mut PinchingEnv, seed: u64) -> Result<EpisodeSummary, RunError> {
    env.reset(seed)?;
    let mut s = EpisodeSummary {
        reward: 0.0,
        mean_sum_rate: 0.0,
        mean_snr_linear: 0.0,
        mean_snr_db: 0.0,
        snr_violations: 0,
        steps: 0,
    };
    while !env.is_done() {
        let obs = env.observation();
        let action = agent.act(&obs, ActMode::Exploit)?;
        let out = env.step_raw(&action)?;
        let lin = mean(&out.per_target_snr_linear);
        let db = mean_snr_clamped_db(&out.per_target_snr_linear, env.config());
        s.reward += out.reward;
        s.mean_sum_rate += out.sum_rate;
        s.mean_snr_linear += lin;
        s.mean_snr_db += db;
        s.snr_violations += out.constraint_report.snr_violated() as usize;
        s.steps += 1;
    }
    if s.steps > 0 {
        let n = s.steps as f64;
        s.mean_sum_rate /= n;
        s.mean_snr_linear /= n;
        s.mean_snr_db /= n;
    }
    Ok(s)
}

/// Mean target SNR in dB with the reward's floor applied, so silent slots
/// stay finite.
fn mean_snr_clamped_db(snrs: &[f64], config: &SystemConfig) -> f64 {
    if snrs.is_empty() {
        return 0.0;
    }
    snrs.iter()
        .map(|&s| {
            if s > 0.0 {
                linear_to_db(s).max(config.snr_floor_db)
            } else {
                config.snr_floor_db
            }
        })
        .sum::<f64>()
        / snrs.len() as f64
}

/// Loads every run directory found directly under `root`, sorted by
/// directory name.
pub fn load_runs(root: &Path) -> std::io::Result<Vec<RunRecord>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file() && p.join(METRICS_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_run(d)).collect()
}

pub fn load_run(dir: &Path) -> std::io::Result<RunRecord> {
    let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let episodes = super::metrics::read_metrics(&std::fs::read_to_string(dir.join(METRICS_FILE))?)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let wall_clock_s = std::fs::read_to_string(dir.join(TIMING_FILE))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v["wall_clock_s"].as_f64())
        .unwrap_or(f64::NAN);
    let ckpt = dir.join(CHECKPOINT_DIR);
    Ok(RunRecord {
        key: manifest.key,
        status: manifest.status,
        episodes,
        wall_clock_s,
        checkpoint: ckpt.is_dir().then_some(ckpt),
        dir: dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_db_mean_uses_floor() {
        let c = SystemConfig::default();
        assert_eq!(mean_snr_clamped_db(&[0.0], &c), c.snr_floor_db);
        assert!((mean_snr_clamped_db(&[10.0, 1000.0], &c) - 20.0).abs() < 1e-12);
        assert_eq!(mean(&[]), 0.0);
    }

    #[test]
    fn dir_names_are_distinct() {
        let a = RunKey { algorithm: Algorithm::Merl, seed: 1, learning_rate: 1e-5 };
        let b = RunKey { learning_rate: 1e-4, ..a };
        assert_eq!(a.dir_name(), "merl_seed1_lr1e-5");
        assert_ne!(a.dir_name(), b.dir_name());
    }
}
