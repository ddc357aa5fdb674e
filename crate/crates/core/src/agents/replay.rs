use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, Result};

/// One environment interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True absorbing state: the bootstrap term is dropped. Episodes cut by
    /// the horizon are *not* terminal.
    pub terminal: bool,
}

/// A sampled mini-batch, one transition per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 for terminal transitions, else 0.0.
    pub terminals: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| AgentError::Buffer("cannot build an empty batch".into()))?;
        let (od, ad) = (first.obs.len(), first.action.len());
        let b = items.len();
        let mut obs = Array2::zeros((b, od));
        let mut actions = Array2::zeros((b, ad));
        let mut next_obs = Array2::zeros((b, od));
        let mut rewards = Array1::zeros(b);
        let mut terminals = Array1::zeros(b);
        for (i, t) in items.iter().enumerate() {
            if t.obs.len() != od || t.next_obs.len() != od || t.action.len() != ad {
                return Err(AgentError::Buffer(format!("transition {i} has inconsistent widths")));
            }
            obs.row_mut(i).assign(&ndarray::ArrayView1::from(&t.obs[..]));
            next_obs.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_obs[..]));
            actions.row_mut(i).assign(&ndarray::ArrayView1::from(&t.action[..]));
            rewards[i] = t.reward;
            terminals[i] = if t.terminal { 1.0 } else { 0.0 };
        }
        Ok(Self {
            obs,
            actions,
            rewards,
            next_obs,
            terminals,
        })
    }
}

/// Fixed-capacity FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot overwritten by the next push once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Inserts, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest-first iteration.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform sample of distinct transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if batch_size == 0 || batch_size > self.items.len() {
            return Err(AgentError::Buffer(format!(
                "cannot sample {batch_size} from {} transitions",
                self.items.len()
            )));
        }
        let picks: Vec<&Transition> = rand::seq::index::sample(rng, self.items.len(), batch_size)
            .into_iter()
            .map(|i| &self.items[i])
            .collect();
        Batch::from_transitions(&picks)
    }
}
