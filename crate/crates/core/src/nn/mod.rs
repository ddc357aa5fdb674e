//! Dense feed-forward networks with hand-written backpropagation.
//!
//! Batches are row-major: one sample per row. Weight matrices are stored
//! `fan_in × fan_out` so a layer is `x · W + b`. Hidden layers use a rectifier,
//! the output layer is linear.

mod adam;
pub mod checkpoint;
mod policy;

pub use adam::Adam;
pub use policy::{
    squashed_log_prob, tanh_log_jacobian, DeterministicPolicy, GaussianPolicy, SquashedSample,
    LOG_STD_MAX, LOG_STD_MIN,
};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("activation cache does not belong to this network state")]
    StaleCache,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

impl PartialEq for DenseNet {
    /// Parameter equality; the cache generation is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.weights == other.weights && self.biases == other.biases
    }
}

/// Multi-layer perceptron parameters.
#[derive(Debug, Clone)]
pub struct DenseNet {
    sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    /// Bumped on every in-place parameter change; caches carry the value they
    /// were produced under.
    generation: u64,
}

/// Intermediate values of one forward pass, needed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each layer (post-activation of the previous one).
    inputs: Vec<Array2<f64>>,
    generation: u64,
}

/// Parameter-shaped container: gradients, Adam moments, deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|&v| v == 0.0))
            && self.biases.iter().all(|b| b.iter().all(|&v| v == 0.0))
    }

    /// Concatenation in checkpoint order (per layer: weights row-major, then
    /// bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

impl DenseNet {
    /// Uniform fan-in initialization: every weight and bias of a layer with
    /// `fan_in` inputs is drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output size");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.random_range(-bound..bound)
            }));
            biases.push(Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound)));
        }
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            generation: 0,
        }
    }

    /// Redraws the output layer's weights and biases from `U(-bound, bound)`.
    pub fn reinit_output_layer(&mut self, bound: f64, rng: &mut ChaCha8Rng) {
        let last = self.weights.len() - 1;
        self.weights[last].mapv_inplace(|_| rng.random_range(-bound..bound));
        self.biases[last].mapv_inplace(|_| rng.random_range(-bound..bound));
        self.generation += 1;
    }

    pub fn seeded(sizes: &[usize], seed: u64) -> Self {
        Self::new(sizes, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output size");
        Self {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect(),
            biases: sizes.windows(2).map(|p| Array1::zeros(p[1])).collect(),
            generation: 0,
        }
    }

    /// Builds a network from explicit parameters.
    pub fn from_parts(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(NnError::ShapeMismatch {
                expected: "one bias per weight matrix".into(),
                got: format!("{} weights, {} biases", weights.len(), biases.len()),
            });
        }
        let mut sizes = vec![weights[0].nrows()];
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != *sizes.last().unwrap() || w.ncols() != b.len() {
                return Err(NnError::ShapeMismatch {
                    expected: format!("layer {i} consistent with previous"),
                    got: format!("{:?} / {}", w.dim(), b.len()),
                });
            }
            sizes.push(w.ncols());
        }
        Ok(Self {
            sizes,
            weights,
            biases,
            generation: 0,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.flat_params().iter().all(|v| v.is_finite())
    }

    /// All parameters in checkpoint order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                got: values.len().to_string(),
            });
        }
        let mut it = values.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().unwrap());
            b.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        self.generation += 1;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Array2<f64>], &mut [Array1<f64>]) {
        self.generation += 1;
        (&mut self.weights, &mut self.biases)
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} input columns", self.input_dim()),
                got: input.ncols().to_string(),
            });
        }
        Ok(())
    }

    /// Batched forward pass returning the outputs and the cache for
    /// [`DenseNet::backward`].
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&input)?;
        let last = self.weights.len() - 1;
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut x = input.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = x.dot(w);
            z += b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(x);
            x = z;
        }
        Ok((
            x,
            ForwardCache {
                inputs,
                generation: self.generation,
            },
        ))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&input)?;
        let last = self.weights.len() - 1;
        let mut x = input.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = x.dot(w);
            z += b;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            x = z;
        }
        Ok(x)
    }

    /// Single-sample convenience wrapper around [`DenseNet::predict`].
    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input).map_err(|e| {
            NnError::ShapeMismatch {
                expected: "row vector".into(),
                got: e.to_string(),
            }
        })?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    fn check_cache(&self, cache: &ForwardCache, grad_out: &ArrayView2<f64>) -> Result<()> {
        if cache.generation != self.generation || cache.inputs.len() != self.weights.len() {
            return Err(NnError::StaleCache);
        }
        let batch = cache.inputs[0].nrows();
        if grad_out.dim() != (batch, self.output_dim()) {
            return Err(NnError::ShapeMismatch {
                expected: format!("({batch}, {})", self.output_dim()),
                got: format!("{:?}", grad_out.dim()),
            });
        }
        Ok(())
    }

    /// Backpropagates `grad_out = ∂L/∂output` and returns parameter gradients
    /// and `∂L/∂input`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        self.check_cache(cache, &grad_out)?;
        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        let mut delta = grad_out.to_owned();
        for i in (0..layers).rev() {
            let x = &cache.inputs[i];
            gw.push(x.t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            let mut upstream = delta.dot(&self.weights[i].t());
            if i > 0 {
                // inputs[i] is relu(z_{i-1}); the mask is where it is positive
                ndarray::Zip::from(&mut upstream)
                    .and(x)
                    .for_each(|g, &a| if a <= 0.0 { *g = 0.0 });
            }
            delta = upstream;
        }
        gw.reverse();
        gb.reverse();
        Ok((
            Gradients {
                weights: gw,
                biases: gb,
            },
            delta,
        ))
    }

    /// Like [`DenseNet::backward`] but only computes `∂L/∂input`.
    pub fn backward_input(
        &self,
        cache: &ForwardCache,
        grad_out: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        self.check_cache(cache, &grad_out)?;
        let mut delta = grad_out.to_owned();
        for i in (0..self.weights.len()).rev() {
            let mut upstream = delta.dot(&self.weights[i].t());
            if i > 0 {
                ndarray::Zip::from(&mut upstream)
                    .and(&cache.inputs[i])
                    .for_each(|g, &a| if a <= 0.0 { *g = 0.0 });
            }
            delta = upstream;
        }
        Ok(delta)
    }

    /// `self ← ε·online + (1-ε)·self`, elementwise.
    pub fn soft_update_from(&mut self, online: &DenseNet, epsilon: f64) -> Result<()> {
        if online.sizes != self.sizes {
            return Err(NnError::ShapeMismatch {
                expected: format!("{:?}", self.sizes),
                got: format!("{:?}", online.sizes),
            });
        }
        let keep = 1.0 - epsilon;
        for (t, o) in self.weights.iter_mut().zip(&online.weights) {
            ndarray::Zip::from(t).and(o).for_each(|t, &o| *t = epsilon * o + keep * *t);
        }
        for (t, o) in self.biases.iter_mut().zip(&online.biases) {
            ndarray::Zip::from(t).and(o).for_each(|t, &o| *t = epsilon * o + keep * *t);
        }
        self.generation += 1;
        Ok(())
    }
}

/// Copies rows of `a` and `b` side by side.
pub fn concat_columns(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("row counts match")
}
