//! Recurrent filling of missing standardized 2D coordinates.
//!
//! Landmarks a detector failed to report enter the depth network as zeros
//! unless something reconstructs them first. This module learns a linear
//! recurrence for that: starting from the zero-filled standardized vector
//! d⁽⁰⁾, each step recomputes every missing coordinate as a weighted sum of
//! the full previous iterate while observed coordinates pass through
//! untouched, and the final estimate blends the per-step iterates with a
//! fixed increasing weight vector λ that sums to one. On complete inputs the
//! whole construction collapses to the identity, so one model serves both
//! regimes. Joint training couples this layer with the depth network under a
//! single ℓ₂ loss over all 3n output entries.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;

use crate::error::{Error, Result};
use crate::geometry::Landmarks2D;
use crate::net::{self, NetworkGradients, NetworkParams};
use crate::rng;

/// Tolerance for the Σλ = 1 constraint check.
pub const LAMBDA_SUM_TOL: f64 = 1e-12;

/// Weights and blend schedule of the recurrent filler.
///
/// `weights` is 2n×2n with column c holding the combination that produces
/// coordinate c; landmark j owns coordinates 2j (û) and 2j+1 (v̂). The step
/// count τ is implied by `lambdas.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputerParams {
    weights: DMatrix<f64>,
    lambdas: Vec<f64>,
}

impl ImputerParams {
    pub fn new(weights: DMatrix<f64>, lambdas: Vec<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() || weights.nrows() % 2 != 0 || weights.nrows() == 0 {
            return Err(Error::InvalidConfig(format!(
                "imputer weights must be square with even size, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("imputer weights must be finite".into()));
        }
        validate_lambdas(&lambdas)?;
        Ok(Self { weights, lambdas })
    }

    /// Fan-based uniform init (same family as the depth net), τ=3 with the
    /// default linearly increasing blend λ = (1/6, 2/6, 3/6).
    pub fn init(n: usize, seed: u64) -> Self {
        let dim = 2 * n;
        let lim = (6.0 / (dim + dim) as f64).sqrt();
        let mut rng = rng::derive(seed, &[rng::TAG_IMPUTER_INIT]);
        let weights = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-lim..=lim));
        Self {
            weights,
            lambdas: default_lambdas(),
        }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.weights
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn tau(&self) -> usize {
        self.lambdas.len()
    }

    /// Landmark count n (the weight matrix is 2n×2n).
    pub fn n(&self) -> usize {
        self.weights.nrows() / 2
    }
}

/// Default blend schedule: τ=3, linearly increasing; the three terms sum to
/// exactly 1.0 in double precision.
pub fn default_lambdas() -> Vec<f64> {
    vec![1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]
}

fn validate_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("imputer needs at least one step".into()));
    }
    let mut prev = 0.0;
    for &l in lambdas {
        if !l.is_finite() || l <= prev {
            return Err(Error::InvalidConfig(format!(
                "imputer blend weights must be strictly increasing and positive, got {lambdas:?}"
            )));
        }
        prev = l;
    }
    let sum: f64 = lambdas.iter().sum();
    if (sum - 1.0).abs() > LAMBDA_SUM_TOL {
        return Err(Error::InvalidConfig(format!(
            "imputer blend weights must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

/// Interleave a standardized landmark set into the 2n-vector d⁽⁰⁾ with
/// missing coordinates set to zero.
pub fn build_input(landmarks: &Landmarks2D) -> DVector<f64> {
    let n = landmarks.n();
    let coords = landmarks.coords();
    DVector::from_fn(2 * n, |i, _| {
        let j = i / 2;
        if landmarks.mask()[j] {
            coords[(i % 2, j)]
        } else {
            0.0
        }
    })
}

/// Run the recurrence and return every iterate d⁽⁰⁾..d⁽ᵗ⁾ plus the blended
/// final vector. Observed coordinates are copied forward through every step
/// and into the output without arithmetic, so they stay bit-identical.
pub fn impute_trace(
    params: &ImputerParams,
    d0: &DVector<f64>,
    mask: &[bool],
) -> Result<(Vec<DVector<f64>>, DVector<f64>)> {
    let dim = params.weights.nrows();
    if d0.len() != dim {
        return Err(Error::LengthMismatch {
            context: "imputer input",
            expected: dim,
            got: d0.len(),
        });
    }
    if 2 * mask.len() != dim {
        return Err(Error::LengthMismatch {
            context: "imputer mask",
            expected: dim / 2,
            got: mask.len(),
        });
    }
    let mut steps = Vec::with_capacity(params.tau() + 1);
    steps.push(d0.clone());
    for _ in 0..params.tau() {
        let prev = steps.last().unwrap();
        let combined = params.weights.tr_mul(prev);
        let next = DVector::from_fn(dim, |i, _| {
            if mask[i / 2] {
                prev[i]
            } else {
                combined[i]
            }
        });
        steps.push(next);
    }
    let mut out = d0.clone();
    for i in 0..dim {
        if !mask[i / 2] {
            out[i] = params
                .lambdas
                .iter()
                .zip(steps.iter().skip(1))
                .map(|(l, d)| l * d[i])
                .sum();
        }
    }
    Ok((steps, out))
}

/// Fill the missing coordinates of d⁽⁰⁾; observed ones are returned as-is.
pub fn impute(params: &ImputerParams, d0: &DVector<f64>, mask: &[bool]) -> Result<DVector<f64>> {
    impute_trace(params, d0, mask).map(|(_, out)| out)
}

/// Filled 2D coordinates followed by predicted depths: the merged 3n-vector
/// the joint loss scores.
pub fn forward_joint(
    imputer: &ImputerParams,
    net: &NetworkParams,
    d0: &DVector<f64>,
    mask: &[bool],
) -> Result<DVector<f64>> {
    if net.input_len() != imputer.weights.nrows() {
        return Err(Error::LengthMismatch {
            context: "imputer/net width",
            expected: imputer.weights.nrows(),
            got: net.input_len(),
        });
    }
    let filled = impute(imputer, d0, mask)?;
    let (depth, _) = net::forward(net, &filled)?;
    let mut out = DVector::zeros(filled.len() + depth.len());
    out.rows_mut(0, filled.len()).copy_from(&filled);
    out.rows_mut(filled.len(), depth.len()).copy_from(&depth);
    Ok(out)
}

/// Σ per-sample ‖output − truth‖₂ over full 3n residuals.
pub fn joint_loss(outputs: &[DVector<f64>], truths: &[DVector<f64>]) -> Result<f64> {
    net::loss(outputs, truths)
}

/// Per-step iterates for a whole batch (columns are samples) plus the
/// blended output matrix. `missing` holds 1.0 where a coordinate is missing.
pub fn impute_batch(
    params: &ImputerParams,
    d0: &DMatrix<f64>,
    missing: &DMatrix<f64>,
) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
    let mut steps = Vec::with_capacity(params.tau() + 1);
    steps.push(d0.clone());
    for _ in 0..params.tau() {
        let prev = steps.last().unwrap();
        let combined = params.weights.tr_mul(prev);
        // missing entries take the recombination, observed ones carry over
        let next = DMatrix::from_fn(d0.nrows(), d0.ncols(), |i, j| {
            if missing[(i, j)] != 0.0 {
                combined[(i, j)]
            } else {
                prev[(i, j)]
            }
        });
        steps.push(next);
    }
    let mut out = d0.clone();
    for j in 0..d0.ncols() {
        for i in 0..d0.nrows() {
            if missing[(i, j)] != 0.0 {
                out[(i, j)] = params
                    .lambdas
                    .iter()
                    .zip(steps.iter().skip(1))
                    .map(|(l, d)| l * d[(i, j)])
                    .sum();
            }
        }
    }
    (steps, out)
}

/// Gradients of the batched joint loss.
pub struct JointGradients {
    pub imputer_weights: DMatrix<f64>,
    pub net: NetworkGradients,
    pub loss: f64,
}

/// Backpropagate the joint ℓ₂ loss through the depth net and the unrolled
/// recurrence.
///
/// `steps` and `filled` come from [`impute_batch`], `net_acts` from
/// [`net::forward_batch`] on `filled`. `truths` stacks the standardized 2D
/// coordinates (2n rows) on top of the true depths (n rows).
pub fn backward_joint_batch(
    imputer: &ImputerParams,
    net_params: &NetworkParams,
    steps: &[DMatrix<f64>],
    net_acts: &[DMatrix<f64>],
    missing: &DMatrix<f64>,
    truths: &DMatrix<f64>,
) -> JointGradients {
    let filled = &net_acts[0];
    let depth_out = net_acts.last().unwrap();
    let (two_n, m) = (filled.nrows(), filled.ncols());
    let n = two_n / 2;
    debug_assert_eq!(truths.nrows(), 3 * n);

    // Per-sample gradient of ‖r‖ over the concatenated 3n residual.
    let mut g2d = DMatrix::zeros(two_n, m);
    let mut gz = DMatrix::zeros(n, m);
    let mut loss = 0.0;
    for j in 0..m {
        let mut sq = 0.0;
        for i in 0..two_n {
            let r = filled[(i, j)] - truths[(i, j)];
            sq += r * r;
            g2d[(i, j)] = r;
        }
        for i in 0..n {
            let r = depth_out[(i, j)] - truths[(two_n + i, j)];
            sq += r * r;
            gz[(i, j)] = r;
        }
        let norm = sq.sqrt();
        loss += norm;
        let inv = 1.0 / norm.max(net::LOSS_NORM_EPS);
        g2d.column_mut(j).scale_mut(inv);
        gz.column_mut(j).scale_mut(inv);
    }

    // Depth-net gradients, plus the loss gradient w.r.t. the net input.
    let mut net_input_grads = DMatrix::zeros(two_n, m);
    let (net_grads, _) = backward_with_output_grad(net_params, net_acts, &gz, &mut net_input_grads);

    // Total gradient w.r.t. the blended output; only missing entries are
    // functions of the recurrence weights.
    let gd = (g2d + net_input_grads).component_mul(missing);

    // Walk the unrolled steps backwards: adjoint[s] is ∂loss/∂d⁽ˢ⁾ restricted
    // to what flows onward into parameters.
    let tau = imputer.tau();
    let mut grad_w = DMatrix::zeros(two_n, two_n);
    let mut adjoint = gd.scale(imputer.lambdas[tau - 1]); // already masked
    for s in (1..=tau).rev() {
        // d⁽ˢ⁾'s missing entries came from Wᵀd⁽ˢ⁻¹⁾: accumulate weight grads.
        grad_w.gemm(1.0, &steps[s - 1], &adjoint.transpose(), 1.0);
        if s > 1 {
            // Flow into d⁽ˢ⁻¹⁾ (full vector), then keep the part that is a
            // function of the weights and add d⁽ˢ⁻¹⁾'s own blend term.
            let mut back = &imputer.weights * &adjoint;
            back.component_mul_assign(missing);
            adjoint = back + gd.scale(imputer.lambdas[s - 2]);
        }
    }

    JointGradients {
        imputer_weights: grad_w,
        net: net_grads,
        loss,
    }
}

/// Like [`net::backward_batch`] but starting from an externally supplied
/// output gradient instead of the plain depth loss.
fn backward_with_output_grad(
    params: &NetworkParams,
    acts: &[DMatrix<f64>],
    output_grad: &DMatrix<f64>,
    input_grads: &mut DMatrix<f64>,
) -> (NetworkGradients, ()) {
    let mut grads = params.zeros_like();
    let mut g = output_grad.clone();
    for (l, layer) in params.layers().iter().enumerate().rev() {
        let delta = g.zip_map(&acts[l + 1], |gi, ai| gi * (1.0 - ai * ai));
        grads.layers[l].weights.gemm(1.0, &delta, &acts[l].transpose(), 1.0);
        for j in 0..delta.ncols() {
            grads.layers[l].bias += delta.column(j);
        }
        if l == 0 {
            layer.weights.tr_mul_to(&delta, input_grads);
            break;
        }
        g = layer.weights.tr_mul(&delta);
    }
    (grads, ())
}
