//! Deterministic-policy baselines: DDPG (one critic, actor updated every
//! step) and TD3 (twin critics, clipped target-policy smoothing, delayed
//! actor and target updates).

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::critic::{bootstrap_targets, min_q_action_gradient, QNetwork};
use super::replay::{Batch, ReplayBuffer, Transition};
use super::{check_obs, derive_seed, ActMode, Agent, AgentConfig, Algorithm, Result, TrainDiagnostics};
use crate::nn::{Adam, DeterministicPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeterministicKind {
    Td3,
    Ddpg,
}

#[derive(Debug, Clone)]
pub struct DeterministicAgent {
    kind: DeterministicKind,
    config: AgentConfig,
    obs_dim: usize,
    action_dim: usize,
    pub actor: DeterministicPolicy,
    pub actor_target: DeterministicPolicy,
    pub actor_opt: Adam,
    /// Two critics for TD3, one for DDPG.
    pub critics: Vec<QNetwork>,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    updates: u64,
}

impl DeterministicAgent {
    pub fn new(kind: DeterministicKind, obs_dim: usize, action_dim: usize, config: AgentConfig, seed: u64) -> Self {
        let mut init = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let lr = config.learning_rate;
        let mut actor = DeterministicPolicy::new(obs_dim, action_dim, &config.hidden_sizes, &mut init);
        let n_critics = match kind {
            DeterministicKind::Td3 => 2,
            DeterministicKind::Ddpg => 1,
        };
        let mut critics: Vec<QNetwork> = (0..n_critics)
            .map(|_| QNetwork::new(obs_dim, action_dim, &config.hidden_sizes, lr, &mut init))
            .collect();
        if config.output_init_bound > 0.0 {
            actor.net.reinit_output_layer(config.output_init_bound, &mut init);
            for c in &mut critics {
                c.reinit_output_layer(config.output_init_bound, &mut init);
            }
        }
        Self {
            kind,
            actor_target: actor.clone(),
            actor_opt: Adam::for_net(&actor.net, lr),
            actor,
            critics,
            buffer: ReplayBuffer::new(config.replay_capacity),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
            updates: 0,
            obs_dim,
            action_dim,
            config,
        }
    }

    pub fn kind(&self) -> DeterministicKind {
        self.kind
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub(crate) fn restore(
        &mut self,
        actor: DeterministicPolicy,
        actor_target: DeterministicPolicy,
        actor_opt: Adam,
        critics: Vec<QNetwork>,
        rng: ChaCha8Rng,
        updates: u64,
    ) {
        self.actor = actor;
        self.actor_target = actor_target;
        self.actor_opt = actor_opt;
        self.critics = critics;
        self.rng = rng;
        self.updates = updates;
    }

    /// Next actions from the target actor, with clipped Gaussian smoothing
    /// for TD3 when `smoothing` is set.
    fn next_actions(&mut self, next_obs: ArrayView2<f64>, smoothing: bool) -> Result<Array2<f64>> {
        let mut actions = self.actor_target.act(next_obs)?;
        if self.kind == DeterministicKind::Td3 && smoothing && self.config.target_policy_noise > 0.0 {
            let normal = Normal::new(0.0, self.config.target_policy_noise).expect("valid std");
            let clip = self.config.target_noise_clip;
            let rng = &mut self.rng;
            actions.mapv_inplace(|a| (a + normal.sample(rng).clamp(-clip, clip)).clamp(-1.0, 1.0));
        }
        Ok(actions)
    }

    /// Bootstrap targets `r + γ min_i Q'_i(s', a')`. `smoothing = false`
    /// disables the TD3 target noise.
    pub fn critic_target(&mut self, batch: &Batch, smoothing: bool) -> Result<Array1<f64>> {
        let next = self.next_actions(batch.next_obs.view(), smoothing)?;
        let mut min_q = self.critics[0].q_target(batch.next_obs.view(), next.view())?;
        for c in &self.critics[1..] {
            let q = c.q_target(batch.next_obs.view(), next.view())?;
            min_q.zip_mut_with(&q, |m, &v| *m = m.min(v));
        }
        Ok(bootstrap_targets(
            batch.rewards.view(),
            batch.terminals.view(),
            self.config.discount,
            min_q.view(),
        ))
    }

    /// One actor step on `-mean Q_1(s, μ(s))`; returns the pre-step loss.
    pub fn update_actor(&mut self, obs: ArrayView2<f64>) -> Result<f64> {
        let b = obs.nrows() as f64;
        let (actions, cache) = self.actor.forward(obs)?;
        let (q, grad_actions) = min_q_action_gradient(&self.critics[..1], obs, actions.view(), -1.0 / b)?;
        let loss = -q.sum() / b;
        if !loss.is_finite() {
            return Err(super::AgentError::NonFinite("actor loss".into()));
        }
        let grads = self.actor.backward(&actions, &cache, grad_actions.view())?;
        self.actor_opt.step_net(&mut self.actor.net, &grads)?;
        Ok(loss)
    }

    pub fn soft_update(&mut self) -> Result<()> {
        let eps = self.config.soft_update_rate;
        self.actor_target.net.soft_update_from(&self.actor.net, eps)?;
        for c in &mut self.critics {
            c.soft_update(eps)?;
        }
        Ok(())
    }

    fn delay(&self) -> u64 {
        match self.kind {
            DeterministicKind::Td3 => self.config.policy_delay as u64,
            DeterministicKind::Ddpg => 1,
        }
    }
}

impl Agent for DeterministicAgent {
    fn algorithm(&self) -> Algorithm {
        match self.kind {
            DeterministicKind::Td3 => Algorithm::Td3,
            DeterministicKind::Ddpg => Algorithm::Ddpg,
        }
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn act(&mut self, obs: &[f64], mode: ActMode) -> Result<Vec<f64>> {
        check_obs(obs, self.obs_dim)?;
        let mut a = self.actor.act_one(obs)?;
        if mode == ActMode::Explore && self.config.exploration_noise > 0.0 {
            let normal = Normal::new(0.0, self.config.exploration_noise).expect("valid std");
            for v in &mut a {
                *v = (*v + normal.sample(&mut self.rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(a)
    }

    fn train_step(&mut self, transition: Transition) -> Result<TrainDiagnostics> {
        check_obs(&transition.obs, self.obs_dim)?;
        self.buffer.push(transition);
        if self.buffer.len() < self.config.updates_start_at() {
            return Ok(TrainDiagnostics::default());
        }
        let mut d = self.update_round()?;
        for _ in 1..self.config.updates_per_step {
            let next = self.update_round()?;
            d = TrainDiagnostics {
                policy_loss: next.policy_loss.or(d.policy_loss),
                ..next
            };
        }
        Ok(d)
    }
}

impl DeterministicAgent {
    fn update_round(&mut self) -> Result<TrainDiagnostics> {
        let batch = self.buffer.sample(self.config.batch_size, &mut self.rng)?;
        let y = self.critic_target(&batch, true)?;
        let mut losses = Vec::with_capacity(self.critics.len());
        for c in &mut self.critics {
            losses.push(c.regress(batch.obs.view(), batch.actions.view(), y.view())?);
        }
        self.updates += 1;
        let mut policy_loss = None;
        if self.updates % self.delay() == 0 {
            policy_loss = Some(self.update_actor(batch.obs.view())?);
            self.soft_update()?;
        }
        Ok(TrainDiagnostics {
            updated: true,
            critic_losses: losses,
            policy_loss,
            ..Default::default()
        })
    }
}
