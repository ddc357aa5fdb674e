use serde::{Deserialize, Serialize};

use super::{DenseNet, Gradients, NnError, Result};

/// Adaptive-moment optimizer state for one network (or a flat parameter
/// vector, see [`Adam::step_slice`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: vec![0.0; param_count],
            second: vec![0.0; param_count],
        }
    }

    pub fn for_net(net: &DenseNet, lr: f64) -> Self {
        Self::new(net.param_count(), lr)
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.first, &self.second)
    }

    pub(crate) fn from_parts(
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        step: u64,
        first: Vec<f64>,
        second: Vec<f64>,
    ) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            epsilon,
            step,
            first,
            second,
        }
    }

    /// One update of `params` against `grads` (descent direction). Rejects
    /// non-finite gradients without touching any state.
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} parameters", self.first.len()),
                got: format!("{} params / {} grads", params.len(), grads.len()),
            });
        }
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFinite(format!("gradient component {bad}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }

    /// Applies one update to every parameter of `net`.
    pub fn step_net(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        let flat_grads = grads.flatten();
        if !flat_grads.iter().all(|g| g.is_finite()) {
            return Err(NnError::NonFinite("network gradient".into()));
        }
        let mut params = net.flat_params();
        self.step_slice(&mut params, &flat_grads)?;
        // write back in place, layer by layer, in checkpoint order
        let (ws, bs) = net.params_mut();
        let mut it = params.into_iter();
        for (w, b) in ws.iter_mut().zip(bs.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut opt = Adam::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step_slice(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let lr = 1e-5;
        let mut opt = Adam::new(3, lr);
        let mut p = vec![0.0; 3];
        let g = [0.7, -3.0, 1e-3];
        opt.step_slice(&mut p, &g).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + eps)
            let expected = -lr * gi / (gi.abs() + 1e-8);
            assert_relative_eq!(*pi, expected, max_relative = 1e-12);
            assert_relative_eq!(pi.abs(), lr, max_relative = 1e-4);
        }
    }

    #[test]
    fn deterministic_updates() {
        let mut a = Adam::new(2, 0.1);
        let mut b = a.clone();
        let (mut pa, mut pb) = (vec![1.0, 2.0], vec![1.0, 2.0]);
        a.step_slice(&mut pa, &[0.3, -0.2]).unwrap();
        b.step_slice(&mut pb, &[0.3, -0.2]).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut opt = Adam::new(2, 0.1);
        let mut p = vec![1.0, 2.0];
        assert!(matches!(
            opt.step_slice(&mut p, &[f64::NAN, 0.0]),
            Err(NnError::NonFinite(_))
        ));
        assert_eq!(opt.step, 0);
        assert_eq!(p, vec![1.0, 2.0]);
    }
}
