use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, ActMode, Agent, Algorithm, Result, TrainDiagnostics, Transition};

/// Uniform actions in `[-1, 1]^d` regardless of the observation; never
/// learns.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    action_dim: usize,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(action_dim: usize, seed: u64) -> Self {
        Self {
            action_dim,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
        }
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub(crate) fn restore(&mut self, rng: ChaCha8Rng) {
        self.rng = rng;
    }
}

impl Agent for RandomAgent {
    fn algorithm(&self) -> Algorithm {
        Algorithm::Random
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn act(&mut self, _obs: &[f64], _mode: ActMode) -> Result<Vec<f64>> {
        Ok((0..self.action_dim)
            .map(|_| self.rng.random_range(-1.0..=1.0))
            .collect())
    }

    fn train_step(&mut self, _transition: Transition) -> Result<TrainDiagnostics> {
        Ok(TrainDiagnostics::default())
    }
}
