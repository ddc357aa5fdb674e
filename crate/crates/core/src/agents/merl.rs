//! Maximum-entropy actor-critic.
//!
//! A tanh-squashed Gaussian policy is trained against twin critics; the
//! critics regress onto soft Bellman targets built from the minimum of two
//! slowly tracking target critics, and the entropy temperature is tuned in
//! log space toward a target entropy.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::critic::{bootstrap_targets, elementwise_min, min_q_action_gradient, QNetwork};
use super::replay::{Batch, ReplayBuffer, Transition};
use super::{check_obs, derive_seed, ActMode, Agent, AgentConfig, AgentError, Algorithm, Result, TrainDiagnostics};
use crate::nn::{Adam, GaussianPolicy};

/// Soft Bellman targets for one batch and the pieces they were built from.
#[derive(Debug, Clone)]
pub struct CriticTargets {
    pub y: Array1<f64>,
    pub target_q1: Array1<f64>,
    pub target_q2: Array1<f64>,
    pub min_q: Array1<f64>,
    pub next_log_probs: Array1<f64>,
}

impl CriticTargets {
    /// The bootstrap value never exceeds either target critic.
    pub fn uses_min(&self) -> bool {
        self.min_q
            .iter()
            .zip(self.target_q1.iter().zip(&self.target_q2))
            .all(|(&m, (&a, &b))| m <= a && m <= b && (m == a || m == b))
    }
}

#[derive(Debug, Clone)]
pub struct PolicyUpdate {
    /// `mean (ρ log π(ã|s) - min_i Q_i(s, ã))` before the step.
    pub loss: f64,
    /// `-mean log π(ã|s)`.
    pub entropy: f64,
    pub log_probs: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct MerlAgent {
    config: AgentConfig,
    obs_dim: usize,
    action_dim: usize,
    pub policy: GaussianPolicy,
    pub policy_opt: Adam,
    pub critics: [QNetwork; 2],
    log_temperature: f64,
    temperature_opt: Adam,
    target_entropy: f64,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    updates: u64,
}

impl MerlAgent {
    pub fn new(obs_dim: usize, action_dim: usize, config: AgentConfig, seed: u64) -> Self {
        let mut init = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let lr = config.learning_rate;
        let mut policy = GaussianPolicy::new(obs_dim, action_dim, &config.hidden_sizes, &mut init);
        let mut critics = [
            QNetwork::new(obs_dim, action_dim, &config.hidden_sizes, lr, &mut init),
            QNetwork::new(obs_dim, action_dim, &config.hidden_sizes, lr, &mut init),
        ];
        if config.output_init_bound > 0.0 {
            policy.net.reinit_output_layer(config.output_init_bound, &mut init);
            for c in &mut critics {
                c.reinit_output_layer(config.output_init_bound, &mut init);
            }
        }
        let temperature_lr = config.temperature_learning_rate.unwrap_or(lr);
        Self {
            policy_opt: Adam::for_net(&policy.net, lr),
            policy,
            critics,
            log_temperature: config.initial_temperature.ln(),
            temperature_opt: Adam::new(1, temperature_lr),
            target_entropy: config.target_entropy.unwrap_or(-(action_dim as f64)),
            buffer: ReplayBuffer::new(config.replay_capacity),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
            updates: 0,
            obs_dim,
            action_dim,
            config,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Current entropy weight `ρ = exp(log ρ)`.
    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn log_temperature(&self) -> f64 {
        self.log_temperature
    }

    pub fn set_log_temperature(&mut self, value: f64) {
        self.log_temperature = value;
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub(crate) fn restore(
        &mut self,
        policy: GaussianPolicy,
        policy_opt: Adam,
        critics: [QNetwork; 2],
        log_temperature: f64,
        temperature_opt: Adam,
        rng: ChaCha8Rng,
        updates: u64,
    ) {
        self.policy = policy;
        self.policy_opt = policy_opt;
        self.critics = critics;
        self.log_temperature = log_temperature;
        self.temperature_opt = temperature_opt;
        self.rng = rng;
        self.updates = updates;
    }

    pub(crate) fn temperature_opt(&self) -> &Adam {
        &self.temperature_opt
    }

    fn standard_normal(&mut self, rows: usize) -> Array2<f64> {
        let rng = &mut self.rng;
        Array2::from_shape_simple_fn((rows, self.action_dim), || StandardNormal.sample(rng))
    }

    /// Soft Bellman targets with a freshly resampled next action.
    pub fn critic_target(&mut self, batch: &Batch) -> Result<CriticTargets> {
        let noise = self.standard_normal(batch.len());
        self.critic_target_with_noise(batch, noise.view())
    }

    /// As [`MerlAgent::critic_target`] with the reparameterization noise
    /// supplied: `y = r + γ (min_i Q'_i(s', ã') - ρ log π(ã'|s'))`, with the
    /// bootstrap dropped for terminal rows.
    pub fn critic_target_with_noise(&self, batch: &Batch, noise: ArrayView2<f64>) -> Result<CriticTargets> {
        let next = self.policy.sample(batch.next_obs.view(), noise)?;
        let target_q1 = self.critics[0].q_target(batch.next_obs.view(), next.actions.view())?;
        let target_q2 = self.critics[1].q_target(batch.next_obs.view(), next.actions.view())?;
        let min_q = elementwise_min(&target_q1, &target_q2);
        let rho = self.temperature();
        let soft_value = &min_q - &(next.log_probs.mapv(|lp| rho * lp));
        let y = bootstrap_targets(
            batch.rewards.view(),
            batch.terminals.view(),
            self.config.discount,
            soft_value.view(),
        );
        Ok(CriticTargets {
            y,
            target_q1,
            target_q2,
            min_q,
            next_log_probs: next.log_probs,
        })
    }

    /// One regression step per critic against the given targets; returns the
    /// pre-step losses.
    pub fn update_critics_toward(&mut self, batch: &Batch, targets: &Array1<f64>) -> Result<[f64; 2]> {
        let mut losses = [0.0; 2];
        for (loss, critic) in losses.iter_mut().zip(self.critics.iter_mut()) {
            *loss = critic.regress(batch.obs.view(), batch.actions.view(), targets.view())?;
        }
        Ok(losses)
    }

    pub fn update_critics(&mut self, batch: &Batch) -> Result<[f64; 2]> {
        let targets = self.critic_target(batch)?;
        self.update_critics_toward(batch, &targets.y)
    }

    /// Gradient ascent on `E[min_i Q_i(s, ã) - ρ log π(ã|s)]` with ã
    /// reparameterized; critics are read, never written.
    pub fn update_policy(&mut self, batch: &Batch) -> Result<PolicyUpdate> {
        let noise = self.standard_normal(batch.len());
        self.update_policy_with_noise(batch.obs.view(), noise.view())
    }

    pub fn update_policy_with_noise(&mut self, obs: ArrayView2<f64>, noise: ArrayView2<f64>) -> Result<PolicyUpdate> {
        let (loss, entropy, log_probs, grads) = self.policy_objective_gradient(obs, noise)?;
        if !loss.is_finite() {
            return Err(AgentError::NonFinite("policy loss".into()));
        }
        self.policy_opt.step_net(&mut self.policy.net, &grads)?;
        Ok(PolicyUpdate {
            loss,
            entropy,
            log_probs,
        })
    }

    /// Loss `mean (ρ log π - min Q)` and its gradient with respect to the
    /// policy parameters, without applying it.
    pub fn policy_objective_gradient(
        &self,
        obs: ArrayView2<f64>,
        noise: ArrayView2<f64>,
    ) -> Result<(f64, f64, Array1<f64>, crate::nn::Gradients)> {
        let b = obs.nrows() as f64;
        let rho = self.temperature();
        let sample = self.policy.sample(obs, noise)?;
        let (min_q, grad_actions) =
            min_q_action_gradient(&self.critics, obs, sample.actions.view(), -1.0 / b)?;
        let loss = (rho * sample.log_probs.sum() - min_q.sum()) / b;
        let entropy = -sample.log_probs.mean().unwrap_or(0.0);
        let grad_lp = Array1::from_elem(obs.nrows(), rho / b);
        let grads = self.policy.backward(&sample, grad_actions.view(), grad_lp.view())?;
        Ok((loss, entropy, sample.log_probs, grads))
    }

    /// `∂/∂ log ρ` of `mean(-ρ (log π + H̄))`.
    pub fn temperature_gradient(&self, log_probs: &Array1<f64>) -> f64 {
        let mean = log_probs.mean().unwrap_or(0.0);
        -self.temperature() * (mean + self.target_entropy)
    }

    /// One step on the log-temperature from already-sampled log-densities.
    pub fn update_temperature_from(&mut self, log_probs: &Array1<f64>) -> Result<f64> {
        let grad = self.temperature_gradient(log_probs);
        let mut param = [self.log_temperature];
        self.temperature_opt.step_slice(&mut param, &[grad])?;
        self.log_temperature = param[0];
        Ok(self.temperature())
    }

    /// Samples actions for the batch states and takes one temperature step.
    pub fn update_temperature(&mut self, batch: &Batch) -> Result<f64> {
        let noise = self.standard_normal(batch.len());
        let sample = self.policy.sample(batch.obs.view(), noise.view())?;
        self.update_temperature_from(&sample.log_probs)
    }

    pub fn soft_update(&mut self) -> Result<()> {
        let eps = self.config.soft_update_rate;
        for c in &mut self.critics {
            c.soft_update(eps)?;
        }
        Ok(())
    }
}

impl Agent for MerlAgent {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Merl
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn act(&mut self, obs: &[f64], mode: ActMode) -> Result<Vec<f64>> {
        check_obs(obs, self.obs_dim)?;
        match mode {
            ActMode::Exploit => Ok(self.policy.mode(obs)?),
            ActMode::Explore => {
                let noise = self.standard_normal(1);
                let view = ArrayView2::from_shape((1, obs.len()), obs).expect("row vector");
                let s = self.policy.sample(view, noise.view())?;
                Ok(s.actions.row(0).to_vec())
            }
        }
    }

    fn train_step(&mut self, transition: Transition) -> Result<TrainDiagnostics> {
        check_obs(&transition.obs, self.obs_dim)?;
        self.buffer.push(transition);
        if self.buffer.len() < self.config.updates_start_at() {
            return Ok(TrainDiagnostics::default());
        }
        let mut d = self.update_round()?;
        let mut min_ok = d.target_min_ok == Some(true);
        for _ in 1..self.config.updates_per_step {
            d = self.update_round()?;
            min_ok &= d.target_min_ok == Some(true);
        }
        d.target_min_ok = Some(min_ok);
        Ok(d)
    }
}

impl MerlAgent {
    fn update_round(&mut self) -> Result<TrainDiagnostics> {
        let batch = self.buffer.sample(self.config.batch_size, &mut self.rng)?;
        let targets = self.critic_target(&batch)?;
        let losses = self.update_critics_toward(&batch, &targets.y)?;
        let policy = self.update_policy(&batch)?;
        let temperature = self.update_temperature_from(&policy.log_probs)?;
        self.soft_update()?;
        self.updates += 1;
        Ok(TrainDiagnostics {
            updated: true,
            critic_losses: losses.to_vec(),
            policy_loss: Some(policy.loss),
            temperature: Some(temperature),
            entropy: Some(policy.entropy),
            target_min_ok: Some(targets.uses_min()),
        })
    }
}
