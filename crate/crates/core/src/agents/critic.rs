//! State-action value networks and the regression step shared by every
//! learner.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};
use rand_chacha::ChaCha8Rng;

use super::{AgentError, Result};
use crate::nn::{concat_columns, Adam, DenseNet};

/// Online Q-network, its slowly-tracking target copy and its optimizer.
#[derive(Debug, Clone)]
pub struct QNetwork {
    pub online: DenseNet,
    pub target: DenseNet,
    pub opt: Adam,
}

impl QNetwork {
    pub fn new(obs_dim: usize, action_dim: usize, hidden: &[usize], lr: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut sizes = vec![obs_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let online = DenseNet::new(&sizes, rng);
        Self {
            target: online.clone(),
            opt: Adam::for_net(&online, lr),
            online,
        }
    }

    /// Redraws the online output layer and resets the target to match.
    pub fn reinit_output_layer(&mut self, bound: f64, rng: &mut ChaCha8Rng) {
        self.online.reinit_output_layer(bound, rng);
        self.target = self.online.clone();
    }

    pub fn from_parts(online: DenseNet, target: DenseNet, opt: Adam) -> Self {
        Self { online, target, opt }
    }

    pub fn q(&self, obs: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        let out = self.online.predict(concat_columns(obs, actions).view())?;
        Ok(out.column(0).to_owned())
    }

    pub fn q_target(&self, obs: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        let out = self.target.predict(concat_columns(obs, actions).view())?;
        Ok(out.column(0).to_owned())
    }

    /// One optimizer step on `mean (y - Q(s, a))^2`. The targets are
    /// constants. Returns the loss before the step.
    pub fn regress(
        &mut self,
        obs: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<f64> {
        let input = concat_columns(obs, actions);
        let (out, cache) = self.online.forward(input.view())?;
        let b = targets.len() as f64;
        let residual = &out.column(0) - &targets;
        let loss = residual.mapv(|r| r * r).sum() / b;
        if !loss.is_finite() {
            return Err(AgentError::NonFinite("critic loss".into()));
        }
        let grad_out = residual
            .mapv(|r| 2.0 * r / b)
            .into_shape_with_order((targets.len(), 1))
            .expect("column shape");
        let (grads, _) = self.online.backward(&cache, grad_out.view())?;
        self.opt.step_net(&mut self.online, &grads)?;
        Ok(loss)
    }

    pub fn soft_update(&mut self, epsilon: f64) -> Result<()> {
        self.target.soft_update_from(&self.online, epsilon)?;
        Ok(())
    }
}

/// `y = r + γ·(1 - terminal)·next_value` per transition.
pub fn bootstrap_targets(
    rewards: ArrayView1<f64>,
    terminals: ArrayView1<f64>,
    discount: f64,
    next_values: ArrayView1<f64>,
) -> Array1<f64> {
    let mut y = Array1::zeros(rewards.len());
    Zip::from(&mut y)
        .and(rewards)
        .and(terminals)
        .and(next_values)
        .for_each(|y, &r, &d, &v| *y = if d > 0.5 { r } else { r + discount * v });
    y
}

pub fn elementwise_min(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    Zip::from(a).and(b).map_collect(|&x, &y| x.min(y))
}

/// `∂/∂a` of the per-row minimum of the critics' online values at `(obs,
/// actions)`, scaled by `scale`. Rows route to whichever critic attains the
/// minimum. Also returns that minimum.
pub fn min_q_action_gradient(
    critics: &[QNetwork],
    obs: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    scale: f64,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let input = concat_columns(obs, actions);
    let b = input.nrows();
    let mut outs = Vec::with_capacity(critics.len());
    for c in critics {
        outs.push(c.online.forward(input.view())?);
    }
    let mut argmin = vec![0usize; b];
    let mut min_q = Array1::from_elem(b, f64::INFINITY);
    for (k, (out, _)) in outs.iter().enumerate() {
        for i in 0..b {
            if out[[i, 0]] < min_q[i] {
                min_q[i] = out[[i, 0]];
                argmin[i] = k;
            }
        }
    }
    let obs_dim = obs.ncols();
    let mut grad_actions = Array2::zeros(actions.raw_dim());
    for (k, (critic, (_, cache))) in critics.iter().zip(&outs).enumerate() {
        let g = Array2::from_shape_fn((b, 1), |(i, _)| if argmin[i] == k { scale } else { 0.0 });
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let gin = critic.online.backward_input(cache, g.view())?;
        grad_actions += &gin.slice(ndarray::s![.., obs_dim..]);
    }
    Ok((min_q, grad_actions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn terminal_rows_drop_bootstrap() {
        let y = bootstrap_targets(
            array![1.0, 1.0].view(),
            array![1.0, 0.0].view(),
            0.97,
            array![5.0, 2.0].view(),
        );
        assert_eq!(y[0], 1.0);
        assert!((y[1] - 2.94).abs() < 1e-12);
    }

    #[test]
    fn exact_critic_has_zero_loss_and_stays_put() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = QNetwork::new(2, 1, &[4], 1e-3, &mut rng);
        let obs = array![[0.1, 0.2], [0.3, -0.4]];
        let act = array![[0.5], [-0.5]];
        let targets = q.q(obs.view(), act.view()).unwrap();
        let before = q.online.flat_params();
        let loss = q.regress(obs.view(), act.view(), targets.view()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(q.online.flat_params(), before);
    }

    #[test]
    fn single_transition_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut q = QNetwork::new(2, 1, &[4], 1e-3, &mut rng);
        let obs = array![[0.1, 0.2]];
        let act = array![[0.5]];
        let qv = q.q(obs.view(), act.view()).unwrap()[0];
        let loss = q.regress(obs.view(), act.view(), array![3.0].view()).unwrap();
        assert!((loss - (3.0 - qv).powi(2)).abs() < 1e-14);
    }
}
