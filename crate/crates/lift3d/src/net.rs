//! The depth-regression network and its optimizer.
//!
//! A fully-connected stack mapping the 2n standardized image coordinates to
//! n depths. Every layer, the last one included, applies
//! a⁽ˡ⁺¹⁾ = tanh(Ω⁽ˡ⁾a⁽ˡ⁾ + b⁽ˡ⁾); the default architecture uses node counts
//! [2n, 2n, 2n, 2n, 2n, n]. Training minimizes the summed (unsquared)
//! Euclidean distance between predicted and true depth vectors, which is
//! what makes the fit robust to a few bad landmarks: each sample contributes
//! a unit-norm gradient direction no matter how large its residual.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;

use crate::error::{Error, Result};
use crate::rng;

/// Gradient of ‖r‖ is r/‖r‖; below this norm the direction is treated as
/// zero instead of dividing by ~0.
pub const LOSS_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Maps the previous layer's output (ncols) to this layer's nodes (nrows).
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// All weight layers of the depth network. `dims()` reports node counts per
/// layer including the input layer, so `layers.len() == dims().len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

/// Same shapes as [`NetworkParams`]; produced by backpropagation.
#[derive(Debug, Clone)]
pub struct NetworkGradients {
    pub layers: Vec<Layer>,
}

impl NetworkParams {
    /// Node counts for the default depth-regression architecture.
    pub fn default_dims(n: usize) -> Vec<usize> {
        vec![2 * n, 2 * n, 2 * n, 2 * n, 2 * n, n]
    }

    /// Uniform Glorot init in ±√(6/(fan_in+fan_out)) per layer, zero biases,
    /// deterministic in `seed`.
    pub fn init(n: usize, seed: u64) -> Self {
        Self::init_with_dims(&Self::default_dims(n), seed)
            .expect("default dims are always valid")
    }

    pub fn init_with_dims(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig(format!(
                "network needs at least two nonzero layer sizes, got {dims:?}"
            )));
        }
        let mut rng = rng::derive(seed, &[rng::TAG_NET_INIT]);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (d, r) = (w[0], w[1]);
                let lim = (6.0 / (d + r) as f64).sqrt();
                Layer {
                    weights: DMatrix::from_fn(r, d, |_, _| rng.random_range(-lim..=lim)),
                    bias: DVector::zeros(r),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].weights.ncols() != pair[0].weights.nrows() {
                return Err(Error::LengthMismatch {
                    context: "layer chaining",
                    expected: pair[0].weights.nrows(),
                    got: pair[1].weights.ncols(),
                });
            }
            if pair[0].bias.len() != pair[0].weights.nrows() {
                return Err(Error::LengthMismatch {
                    context: "layer bias",
                    expected: pair[0].weights.nrows(),
                    got: i, // unreachable in practice; keeps the check simple
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weights.ncols()];
        dims.extend(self.layers.iter().map(|l| l.weights.nrows()));
        dims
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().unwrap().weights.nrows()
    }

    pub fn zeros_like(&self) -> NetworkGradients {
        NetworkGradients {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }
}

/// Layer activations for one input, `activations[0]` being the input itself.
pub type Activations = Vec<DVector<f64>>;

/// Run one input through the network; returns the depth prediction and the
/// per-layer activations backpropagation needs.
pub fn forward(params: &NetworkParams, input: &DVector<f64>) -> Result<(DVector<f64>, Activations)> {
    if input.len() != params.input_len() {
        return Err(Error::LengthMismatch {
            context: "network input",
            expected: params.input_len(),
            got: input.len(),
        });
    }
    let mut acts: Activations = Vec::with_capacity(params.layers.len() + 1);
    acts.push(input.clone());
    for layer in &params.layers {
        let mut z = &layer.weights * acts.last().unwrap() + &layer.bias;
        z.apply(|v| *v = v.tanh());
        acts.push(z);
    }
    Ok((acts.last().unwrap().clone(), acts))
}

/// Batched forward pass, one sample per column.
pub fn forward_batch(params: &NetworkParams, inputs: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    if inputs.nrows() != params.input_len() {
        return Err(Error::LengthMismatch {
            context: "network batch input",
            expected: params.input_len(),
            got: inputs.nrows(),
        });
    }
    let mut acts = Vec::with_capacity(params.layers.len() + 1);
    acts.push(inputs.clone());
    for layer in &params.layers {
        let mut z = &layer.weights * acts.last().unwrap();
        for mut col in z.column_iter_mut() {
            col += &layer.bias;
        }
        z.apply(|v| *v = v.tanh());
        acts.push(z);
    }
    Ok(acts)
}

/// Σᵢ ‖targetᵢ − predictionᵢ‖₂ — one unsquared Euclidean norm per sample.
pub fn loss(predictions: &[DVector<f64>], targets: &[DVector<f64>]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            context: "loss batch",
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    let mut total = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(Error::LengthMismatch {
                context: "loss sample",
                expected: t.len(),
                got: p.len(),
            });
        }
        total += (t - p).norm();
    }
    Ok(total)
}

/// Batched loss: columns are samples.
pub fn loss_batch(predictions: &DMatrix<f64>, targets: &DMatrix<f64>) -> f64 {
    (0..predictions.ncols())
        .map(|j| (targets.column(j) - predictions.column(j)).norm())
        .sum()
}

/// Exact gradient of [`loss`] w.r.t. all weights and biases, summed over the
/// batch in sample order.
pub fn backward(
    params: &NetworkParams,
    inputs: &[DVector<f64>],
    targets: &[DVector<f64>],
) -> Result<NetworkGradients> {
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            context: "backward batch",
            expected: targets.len(),
            got: inputs.len(),
        });
    }
    let mut grads = params.zeros_like();
    for (input, target) in inputs.iter().zip(targets) {
        let (out, acts) = forward(params, input)?;
        if target.len() != out.len() {
            return Err(Error::LengthMismatch {
                context: "backward target",
                expected: out.len(),
                got: target.len(),
            });
        }
        let residual = &out - target;
        let norm = residual.norm();
        let g_out = residual / norm.max(LOSS_NORM_EPS);
        backprop_sample(params, &acts, &g_out, &mut grads);
    }
    Ok(grads)
}

/// Backpropagate one sample's output gradient; accumulates into `grads` and
/// returns the gradient w.r.t. the network input (the imputer needs it).
pub(crate) fn backprop_sample(
    params: &NetworkParams,
    acts: &Activations,
    output_grad: &DVector<f64>,
    grads: &mut NetworkGradients,
) -> DVector<f64> {
    let mut g = output_grad.clone();
    for (l, layer) in params.layers.iter().enumerate().rev() {
        // δ = g ⊙ tanh'(z) with tanh'(z) = 1 − a², a being the layer output.
        let delta = g.zip_map(&acts[l + 1], |gi, ai| gi * (1.0 - ai * ai));
        grads.layers[l].weights.gemm(1.0, &delta, &acts[l].transpose(), 1.0);
        grads.layers[l].bias += &delta;
        g = layer.weights.tr_mul(&delta);
    }
    g
}

/// Batched backward pass over precomputed activations. Returns the gradients
/// and the loss of the batch. `input_grads`, when requested, receives
/// ∂loss/∂input per column.
pub fn backward_batch(
    params: &NetworkParams,
    acts: &[DMatrix<f64>],
    targets: &DMatrix<f64>,
    mut input_grads: Option<&mut DMatrix<f64>>,
) -> (NetworkGradients, f64) {
    let out = acts.last().unwrap();
    let mut loss = 0.0;
    let mut g = DMatrix::zeros(out.nrows(), out.ncols());
    for j in 0..out.ncols() {
        let r = out.column(j) - targets.column(j);
        let norm = r.norm();
        loss += norm;
        g.set_column(j, &(r / norm.max(LOSS_NORM_EPS)));
    }
    let mut grads = params.zeros_like();
    for (l, layer) in params.layers.iter().enumerate().rev() {
        let delta = g.zip_map(&acts[l + 1], |gi, ai| gi * (1.0 - ai * ai));
        grads.layers[l].weights.gemm(1.0, &delta, &acts[l].transpose(), 1.0);
        for j in 0..delta.ncols() {
            grads.layers[l].bias += delta.column(j);
        }
        if l == 0 {
            if let Some(ig) = input_grads.as_deref_mut() {
                layer.weights.tr_mul_to(&delta, ig);
            }
            break;
        }
        g = layer.weights.tr_mul(&delta);
    }
    (grads, loss)
}

/// RMSProp hyperparameters; defaults ρ=0.9, ε=1e-8, lr=0.01.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropHyper {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl RmsPropHyper {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Per-parameter squared-gradient accumulators, zero-initialized.
#[derive(Debug, Clone)]
pub struct RmsPropState {
    pub layers: Vec<Layer>,
}

impl RmsPropState {
    pub fn new(params: &NetworkParams) -> Self {
        Self {
            layers: params.zeros_like().layers,
        }
    }
}

/// ms ← ρ·ms + (1−ρ)·g²; θ ← θ − lr·g/(√ms + ε), elementwise.
pub fn rmsprop_update_scalar(theta: &mut f64, g: f64, ms: &mut f64, hp: &RmsPropHyper) {
    *ms = hp.decay * *ms + (1.0 - hp.decay) * g * g;
    *theta -= hp.learning_rate * g / (ms.sqrt() + hp.epsilon);
}

pub fn rmsprop_update_matrix(
    theta: &mut DMatrix<f64>,
    g: &DMatrix<f64>,
    ms: &mut DMatrix<f64>,
    hp: &RmsPropHyper,
) {
    for ((t, &gi), m) in theta.iter_mut().zip(g.iter()).zip(ms.iter_mut()) {
        rmsprop_update_scalar(t, gi, m, hp);
    }
}

/// One RMSProp step over every parameter of the network.
pub fn rmsprop_step(
    params: &mut NetworkParams,
    grads: &NetworkGradients,
    state: &mut RmsPropState,
    hp: &RmsPropHyper,
) {
    for ((layer, grad), ms) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.layers)
    {
        rmsprop_update_matrix(&mut layer.weights, &grad.weights, &mut ms.weights, hp);
        for ((t, &gi), m) in layer
            .bias
            .iter_mut()
            .zip(grad.bias.iter())
            .zip(ms.bias.iter_mut())
        {
            rmsprop_update_scalar(t, gi, m, hp);
        }
    }
}

/// tanh can never reach ±1, so depth targets outside the open interval are
/// clamped just inside it; returns how many entries were touched so callers
/// can log the count.
pub fn clamp_targets(targets: &mut DMatrix<f64>) -> usize {
    const LIMIT: f64 = 1.0 - 1e-6;
    let mut clamped = 0;
    for t in targets.iter_mut() {
        if t.abs() > LIMIT {
            *t = t.clamp(-LIMIT, LIMIT);
            clamped += 1;
        }
    }
    clamped
}
