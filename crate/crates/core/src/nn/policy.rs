//! Policy heads built on [`DenseNet`].
//!
//! The stochastic head emits `[mean | log_std]` per action dimension and
//! squashes a reparameterized Gaussian sample through `tanh`. The
//! deterministic head applies `tanh` to the network output.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand_chacha::ChaCha8Rng;

use super::{DenseNet, ForwardCache, Gradients, NnError, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8; // ½·ln(2π)

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 - tanh(u)^2)`, evaluated without cancellation for large `|u|`.
pub fn tanh_log_jacobian(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Log-density of `a = tanh(mean + exp(log_std)·noise)` for one sample,
/// summed over dimensions. `log_std` is used as given (no clamping).
pub fn squashed_log_prob(mean: &[f64], log_std: &[f64], noise: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(noise)
        .map(|((&mu, &ls), &eps)| {
            let u = mu + ls.exp() * eps;
            -0.5 * eps * eps - ls - HALF_LN_TAU - tanh_log_jacobian(u)
        })
        .sum()
}

/// Tanh-squashed diagonal Gaussian policy.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: DenseNet,
    action_dim: usize,
}

/// One batch of reparameterized samples together with everything the
/// backward pass needs.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    pub mean: Array2<f64>,
    /// Clamped log standard deviation.
    pub log_std: Array2<f64>,
    pub noise: Array2<f64>,
    /// 1 where the raw log-std was inside the clamp range, else 0.
    clamp_mask: Array2<f64>,
    cache: ForwardCache,
}

impl GaussianPolicy {
    /// `hidden` lists the hidden-layer widths.
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        Self {
            net: DenseNet::new(&sizes, rng),
            action_dim,
        }
    }

    pub fn from_net(net: DenseNet) -> Result<Self> {
        let out = net.output_dim();
        if out % 2 != 0 {
            return Err(NnError::ShapeMismatch {
                expected: "even output width (mean and log-std)".into(),
                got: out.to_string(),
            });
        }
        Ok(Self {
            net,
            action_dim: out / 2,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn split(&self, raw: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let d = self.action_dim;
        let mean = raw.slice(s![.., ..d]).to_owned();
        let raw_ls = raw.slice(s![.., d..]);
        let log_std = raw_ls.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let mask = raw_ls.mapv(|v| {
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&v) {
                1.0
            } else {
                0.0
            }
        });
        (mean, log_std, mask)
    }

    /// Mean and clamped log-std, no sampling.
    pub fn distribution(&self, obs: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let raw = self.net.predict(obs)?;
        let (mean, log_std, _) = self.split(&raw);
        Ok((mean, log_std))
    }

    /// `tanh(mean)` for a single observation.
    pub fn mode(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let raw = self.net.predict_one(obs)?;
        Ok(raw[..self.action_dim].iter().map(|m| m.tanh()).collect())
    }

    /// Draws `a = tanh(mean + std·noise)` for each row and its log-density.
    pub fn sample(&self, obs: ArrayView2<f64>, noise: ArrayView2<f64>) -> Result<SquashedSample> {
        if noise.dim() != (obs.nrows(), self.action_dim) {
            return Err(NnError::ShapeMismatch {
                expected: format!("noise ({}, {})", obs.nrows(), self.action_dim),
                got: format!("{:?}", noise.dim()),
            });
        }
        let (raw, cache) = self.net.forward(obs)?;
        let (mean, log_std, clamp_mask) = self.split(&raw);
        let mut actions = Array2::zeros(mean.raw_dim());
        let mut log_probs = Array1::zeros(obs.nrows());
        for (row, lp) in log_probs.iter_mut().enumerate() {
            let mut total = 0.0;
            for j in 0..self.action_dim {
                let (mu, ls, eps) = (mean[[row, j]], log_std[[row, j]], noise[[row, j]]);
                let u = mu + ls.exp() * eps;
                actions[[row, j]] = u.tanh();
                total += -0.5 * eps * eps - ls - HALF_LN_TAU - tanh_log_jacobian(u);
            }
            *lp = total;
        }
        Ok(SquashedSample {
            actions,
            log_probs,
            mean,
            log_std,
            noise: noise.to_owned(),
            clamp_mask,
            cache,
        })
    }

    /// Gradients of a loss `L(actions, log_probs)` with respect to the policy
    /// parameters, given `∂L/∂actions` and `∂L/∂log_probs` for the batch in
    /// `sample`. Noise is held fixed (reparameterization).
    pub fn backward(
        &self,
        sample: &SquashedSample,
        grad_actions: ArrayView2<f64>,
        grad_log_probs: ArrayView1<f64>,
    ) -> Result<Gradients> {
        let (b, d) = sample.actions.dim();
        if grad_actions.dim() != (b, d) || grad_log_probs.len() != b {
            return Err(NnError::ShapeMismatch {
                expected: format!("({b}, {d}) and {b}"),
                got: format!("{:?} and {}", grad_actions.dim(), grad_log_probs.len()),
            });
        }
        let mut grad_raw = Array2::zeros((b, 2 * d));
        for i in 0..b {
            let glp = grad_log_probs[i];
            for j in 0..d {
                let a = sample.actions[[i, j]];
                let std_eps = sample.log_std[[i, j]].exp() * sample.noise[[i, j]];
                let dtanh = 1.0 - a * a;
                let ga = grad_actions[[i, j]];
                // ∂logp/∂u = 2 tanh(u); ∂logp/∂log_std also has the -1 from
                // the Gaussian normalizer
                grad_raw[[i, j]] = ga * dtanh + glp * 2.0 * a;
                grad_raw[[i, d + j]] = (ga * dtanh * std_eps + glp * (2.0 * a * std_eps - 1.0))
                    * sample.clamp_mask[[i, j]];
            }
        }
        let (grads, _) = self.net.backward(&sample.cache, grad_raw.view())?;
        Ok(grads)
    }
}

/// `tanh`-bounded deterministic actor.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicPolicy {
    pub net: DenseNet,
}

impl DeterministicPolicy {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Self {
            net: DenseNet::new(&sizes, rng),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn act(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.net.predict(obs)?.mapv(f64::tanh))
    }

    pub fn act_one(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.predict_one(obs)?.into_iter().map(f64::tanh).collect())
    }

    pub fn forward(&self, obs: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        let (raw, cache) = self.net.forward(obs)?;
        Ok((raw.mapv(f64::tanh), cache))
    }

    /// Parameter gradients given `∂L/∂actions`.
    pub fn backward(
        &self,
        actions: &Array2<f64>,
        cache: &ForwardCache,
        grad_actions: ArrayView2<f64>,
    ) -> Result<Gradients> {
        let mut grad_raw = grad_actions.to_owned();
        Zip::from(&mut grad_raw)
            .and(actions)
            .for_each(|g, &a| *g *= 1.0 - a * a);
        Ok(self.net.backward(cache, grad_raw.view())?.0)
    }
}
