//! Training orchestration, reconstruction, evaluation, and benchmarking.
//!
//! [`train`] runs the epoch schedule: every epoch builds a freshly augmented
//! copy of the training set (the raw shapes on epoch 1), takes up to
//! `max_iters_per_epoch` RMSProp steps on it, and scores a fixed expanded
//! validation set. The best-validation snapshot is kept; training stops once
//! the validation error has failed to improve for `patience` consecutive
//! epochs. With missing-data training enabled, a recurrent imputer is
//! trained jointly with the depth net on inputs whose landmarks are masked
//! at random each epoch, under the joint 2D + depth ℓ₂ loss.
//!
//! [`reconstruct`] is the inference path: standardize the 2D landmarks (the
//! unknown camera scale and image translation cancel), impute any missing
//! coordinates, regress depths, and stack the standardized coordinates on
//! top of them. The result is the shape up to a similarity transform — the
//! absolute scale of the scene is unrecoverable from one view.
//!
//! Standardized inputs are quantized to a 2⁻²⁰ grid before inference so that
//! reconstructions are bit-identical across cameras and image translations,
//! not merely equal to rounding error.
//!
//! Every random choice derives from the config seed through tagged streams,
//! making training, evaluation, and benchmarks exactly reproducible.

mod checkpoint;

pub use checkpoint::{load_model, model_from_text, model_to_text, save_model, CHECKPOINT_MAGIC};

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentationConfig, EpochBatch};
use crate::error::{Error, Result};
use crate::geometry::{
    assemble_reconstruction, procrustes_align, project_weak_perspective, standardize_2d,
    Landmarks2D, Shape3D, WeakPerspectiveCamera,
};
use crate::imputer::{self, ImputerParams};
use crate::net::{self, NetworkParams, RmsPropHyper, RmsPropState};
use crate::rng::{self, TAG_EPOCH, TAG_MASK, TAG_SPLIT, TAG_VALIDATION};

/// Input layout tag recorded in checkpoints: landmark coordinates
/// interleaved as (û₁, v̂₁, û₂, v̂₂, …).
pub const INPUT_ORDERING: &str = "uv-interleaved";

/// Gradient-step batch size: the whole epoch batch or a fixed column count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// One gradient step uses every sample in the epoch batch.
    Full,
    /// One gradient step uses this many samples, cycling through a
    /// once-per-epoch shuffle of the batch.
    Size(usize),
}

impl Default for BatchSize {
    fn default() -> Self {
        BatchSize::Full
    }
}

impl Serialize for BatchSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Size(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = BatchSize;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("\"full\" or a positive integer")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<BatchSize, E> {
                if v == "full" {
                    Ok(BatchSize::Full)
                } else {
                    Err(E::custom(format!("batch_size must be \"full\" or an integer, got '{v}'")))
                }
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<BatchSize, E> {
                if v == 0 {
                    return Err(E::custom("batch_size must be at least 1"));
                }
                Ok(BatchSize::Size(v as usize))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<BatchSize, E> {
                if v <= 0 {
                    return Err(E::custom("batch_size must be at least 1"));
                }
                Ok(BatchSize::Size(v as usize))
            }
        }
        d.deserialize_any(V)
    }
}

/// Missing-data training: when enabled, each training (and validation)
/// sample has `count` landmarks hidden at random and the imputer is trained
/// jointly with the depth net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissingDataConfig {
    /// Train an imputer alongside the depth net.
    pub enabled: bool,
    /// Landmarks hidden per sample (each sample keeps at least 3 observed).
    pub count: usize,
}

impl Default for MissingDataConfig {
    fn default() -> Self {
        Self { enabled: false, count: 1 }
    }
}

/// Everything that controls a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Maximum number of epochs.
    pub epochs: usize,
    /// Gradient steps per epoch batch.
    pub max_iters_per_epoch: usize,
    /// RMSProp learning rate.
    pub learning_rate: f64,
    /// Consecutive non-improving validation evaluations before stopping.
    pub patience: usize,
    /// Rotation/noise augmentation applied per epoch.
    pub augmentation: AugmentationConfig,
    /// Missing-data (imputer) training mode.
    pub missing_data: MissingDataConfig,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    /// Samples per gradient step.
    pub batch_size: BatchSize,
    /// Fraction held out for validation when [`train`] splits internally.
    pub validation_fraction: f64,
    /// Augmented copies of each validation shape in the fixed validation set.
    pub validation_expansion: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            max_iters_per_epoch: 300,
            learning_rate: 0.01,
            patience: 10,
            augmentation: AugmentationConfig::default(),
            missing_data: MissingDataConfig::default(),
            seed: 7,
            batch_size: BatchSize::Full,
            validation_fraction: 0.2,
            validation_expansion: 10,
        }
    }
}

impl TrainingConfig {
    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.max_iters_per_epoch == 0 {
            return Err(Error::InvalidConfig("max_iters_per_epoch must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        if !self.validation_fraction.is_finite()
            || self.validation_fraction <= 0.0
            || self.validation_fraction >= 1.0
        {
            return Err(Error::InvalidConfig(format!(
                "validation_fraction must lie strictly between 0 and 1, got {}",
                self.validation_fraction
            )));
        }
        if self.validation_expansion == 0 {
            return Err(Error::InvalidConfig("validation_expansion must be at least 1".into()));
        }
        if let BatchSize::Size(0) = self.batch_size {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.missing_data.enabled && self.missing_data.count == 0 {
            return Err(Error::InvalidConfig(
                "missing_data.count must be at least 1 when missing-data training is enabled"
                    .into(),
            ));
        }
        self.augmentation.validate()
    }

    /// Hex SHA-256 of the canonical one-line rendering of this config;
    /// stored in checkpoints so a model can be matched to its recipe.
    pub fn content_hash(&self) -> String {
        let a = &self.augmentation;
        let canonical = format!(
            "epochs={};max_iters_per_epoch={};learning_rate={:e};patience={};\
             rx=({:e},{:e});ry=({:e},{:e});rz=({:e},{:e});noise_fraction={:e};\
             camera_lambda=({:e},{:e});batch_rotation={};aug_seed={};\
             missing_enabled={};missing_count={};seed={};batch_size={};\
             validation_fraction={:e};validation_expansion={}",
            self.epochs,
            self.max_iters_per_epoch,
            self.learning_rate,
            self.patience,
            a.rx_range.0,
            a.rx_range.1,
            a.ry_range.0,
            a.ry_range.1,
            a.rz_range.0,
            a.rz_range.1,
            a.noise_fraction,
            a.camera_lambda_range.0,
            a.camera_lambda_range.1,
            a.batch_rotation,
            a.seed,
            self.missing_data.enabled,
            self.missing_data.count,
            self.seed,
            match self.batch_size {
                BatchSize::Full => "full".to_string(),
                BatchSize::Size(k) => k.to_string(),
            },
            self.validation_fraction,
            self.validation_expansion,
        );
        crate::textio::sha256_hex(canonical.as_bytes())
    }
}

/// A trained depth net plus everything needed to run and audit it.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    /// The depth-regression network.
    pub net: NetworkParams,
    /// Imputer for missing landmarks, present when trained in missing mode.
    pub imputer: Option<ImputerParams>,
    /// Landmark count the model was trained for.
    pub n: usize,
    /// Input layout tag (see [`INPUT_ORDERING`]).
    pub input_ordering: String,
    /// SHA-256 of the training config (see [`TrainingConfig::content_hash`]).
    pub config_hash: String,
    /// Epochs actually run (the early-stopping point, not the best epoch).
    pub epoch_reached: usize,
    /// Validation error of the returned snapshot.
    pub best_validation_error: f64,
}

impl TrainedModel {
    /// Checks the internal consistency of the parts (landmark counts and
    /// the input-ordering tag).
    pub fn validate(&self) -> Result<()> {
        if self.net.input_len() != 2 * self.n || self.net.output_len() != self.n {
            return Err(Error::InvariantViolation(format!(
                "model declares n = {} but the net maps {} -> {}",
                self.n,
                self.net.input_len(),
                self.net.output_len()
            )));
        }
        if let Some(imp) = &self.imputer {
            if imp.n() != self.n {
                return Err(Error::InvariantViolation(format!(
                    "model declares n = {} but the imputer covers {} landmarks",
                    self.n,
                    imp.n()
                )));
            }
        }
        if self.input_ordering != INPUT_ORDERING {
            return Err(Error::FormatVersionMismatch(format!(
                "unsupported input ordering '{}'; this build produces '{INPUT_ORDERING}'",
                self.input_ordering
            )));
        }
        Ok(())
    }
}

/// What happened during a training run, epoch by epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    /// Validation error after each epoch run (index 0 = epoch 1).
    pub val_errors: Vec<f64>,
    /// 1-based epoch of the returned snapshot; its error is the minimum of
    /// `val_errors`.
    pub best_epoch: usize,
    /// Validation error at `best_epoch`.
    pub best_val_error: f64,
    /// Number of epochs run.
    pub epochs_run: usize,
    /// Whether patience ran out before the epoch cap.
    pub stopped_early: bool,
    /// Depth targets clipped into tanh's open range across all epochs.
    pub clamped_targets: usize,
}

impl TrainingHistory {
    /// Deterministic structured-text rendering (one line per epoch).
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lift3d history v1");
        let _ = writeln!(out, "epochs_run {}", self.epochs_run);
        let _ = writeln!(out, "best_epoch {}", self.best_epoch);
        let _ = writeln!(out, "best_val_error {}", fmt_f(self.best_val_error));
        let _ = writeln!(out, "stopped_early {}", self.stopped_early);
        let _ = writeln!(out, "clamped_targets {}", self.clamped_targets);
        for (i, e) in self.val_errors.iter().enumerate() {
            let _ = writeln!(out, "epoch {} {}", i + 1, fmt_f(*e));
        }
        let _ = writeln!(out, "end");
        out
    }
}

fn fmt_f(v: f64) -> String {
    crate::textio::format_float(v)
}

fn check_homogeneous(shapes: &[Shape3D]) -> Result<usize> {
    let n = match shapes.first() {
        Some(s) => s.n(),
        None => return Err(Error::EmptyDataset),
    };
    if let Some(bad) = shapes.iter().find(|s| s.n() != n) {
        return Err(Error::HeterogeneousLandmarkCount(format!(
            "expected {n} landmarks per shape, found one with {}",
            bad.n()
        )));
    }
    Ok(n)
}

/// Draws `k` distinct indices from `0..n` (ascending) via a partial
/// Fisher–Yates shuffle, consuming exactly `k` RNG values.
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}

/// Per-sample missing masks for a batch: zeroes the chosen input entries and
/// returns the 1.0-where-missing indicator matrix.
fn mask_batch(inputs: &mut DMatrix<f64>, count: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = inputs.nrows() / 2;
    let mut missing = DMatrix::zeros(inputs.nrows(), inputs.ncols());
    for col in 0..inputs.ncols() {
        for j in sample_distinct(rng, n, count) {
            inputs[(2 * j, col)] = 0.0;
            inputs[(2 * j + 1, col)] = 0.0;
            missing[(2 * j, col)] = 1.0;
            missing[(2 * j + 1, col)] = 1.0;
        }
    }
    missing
}

/// Stacks the (unmasked) standardized 2D inputs on top of the depth targets:
/// the 3n-row truth matrix the joint loss scores against.
fn stack_truths(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> DMatrix<f64> {
    let (two_n, m) = (inputs.nrows(), inputs.ncols());
    let n = targets.nrows();
    let mut truths = DMatrix::zeros(two_n + n, m);
    truths.rows_mut(0, two_n).copy_from(inputs);
    truths.rows_mut(two_n, n).copy_from(targets);
    truths
}

/// The fixed validation set: expanded inputs/targets, plus the missing-mode
/// views (masked inputs, indicator matrix, joint truths) when training an
/// imputer.
struct ValidationSet {
    batch: EpochBatch,
    masked: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

impl ValidationSet {
    fn build(val_shapes: &[Shape3D], config: &TrainingConfig) -> Result<Self> {
        let mut val_rng = rng::derive(config.seed, &[TAG_VALIDATION]);
        let batch = augment::expand_validation(
            val_shapes,
            config.validation_expansion,
            &config.augmentation,
            &mut val_rng,
        )?;
        let masked = if config.missing_data.enabled {
            let mut mask_rng = rng::derive(config.seed, &[TAG_MASK, 0]);
            let mut d0 = batch.inputs.clone();
            let missing = mask_batch(&mut d0, config.missing_data.count, &mut mask_rng);
            let truths = stack_truths(&batch.inputs, &batch.targets);
            Some((d0, missing, truths))
        } else {
            None
        };
        Ok(Self { batch, masked })
    }

    /// Mean per-sample residual norm under the active training objective.
    fn loss(&self, net: &NetworkParams, imp: Option<&ImputerParams>) -> Result<f64> {
        let m = self.batch.len() as f64;
        match (&self.masked, imp) {
            (Some((d0, missing, truths)), Some(imp)) => {
                let (_, filled) = imputer::impute_batch(imp, d0, missing);
                let acts = net::forward_batch(net, &filled)?;
                let out = acts.last().unwrap();
                let mut total = 0.0;
                for j in 0..out.ncols() {
                    let mut sq = 0.0;
                    for i in 0..filled.nrows() {
                        let r = filled[(i, j)] - truths[(i, j)];
                        sq += r * r;
                    }
                    for i in 0..out.nrows() {
                        let r = out[(i, j)] - truths[(filled.nrows() + i, j)];
                        sq += r * r;
                    }
                    total += sq.sqrt();
                }
                Ok(total / m)
            }
            (None, None) => {
                let acts = net::forward_batch(net, &self.batch.inputs)?;
                let out = acts.last().unwrap();
                let mut total = 0.0;
                for j in 0..out.ncols() {
                    total += (out.column(j) - self.batch.targets.column(j)).norm();
                }
                Ok(total / m)
            }
            _ => Err(Error::InvariantViolation(
                "validation mode does not match the presence of an imputer".into(),
            )),
        }
    }
}

/// One epoch's training tensors, in the layout the optimizer consumes.
struct EpochData {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    /// Missing mode: (masked inputs, indicator, joint truths).
    masked: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
    clamped: usize,
}

fn build_epoch(
    train_shapes: &[Shape3D],
    config: &TrainingConfig,
    epoch: usize,
) -> Result<EpochData> {
    let mut epoch_rng = rng::derive(config.seed, &[TAG_EPOCH, epoch as u64]);
    let mut batch =
        augment::make_epoch_batch(train_shapes, &config.augmentation, &mut epoch_rng, epoch == 1)?;
    let clamped = net::clamp_targets(&mut batch.targets);
    let masked = if config.missing_data.enabled {
        let mut mask_rng = rng::derive(config.seed, &[TAG_MASK, epoch as u64]);
        let mut d0 = batch.inputs.clone();
        let missing = mask_batch(&mut d0, config.missing_data.count, &mut mask_rng);
        let truths = stack_truths(&batch.inputs, &batch.targets);
        Some((d0, missing, truths))
    } else {
        None
    };
    Ok(EpochData { inputs: batch.inputs, targets: batch.targets, masked, clamped })
}

/// Columns `order[start..start+len]` of `m` (wrapping handled by caller).
fn gather_columns(m: &DMatrix<f64>, order: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), order.len(), |i, k| m[(i, order[k])])
}

/// Trains on an internally split dataset: a seeded shuffle holds out
/// `validation_fraction` of the shapes (at least one, and at least one kept
/// for training).
pub fn train(shapes: &[Shape3D], config: &TrainingConfig) -> Result<(TrainedModel, TrainingHistory)> {
    config.validate()?;
    check_homogeneous(shapes)?;
    if shapes.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "an internal validation split needs at least 2 shapes, got {}",
            shapes.len()
        )));
    }
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    let mut split_rng = rng::derive(config.seed, &[TAG_SPLIT]);
    use rand::seq::SliceRandom;
    order.shuffle(&mut split_rng);
    let val_count = ((shapes.len() as f64 * config.validation_fraction).round() as usize)
        .clamp(1, shapes.len() - 1);
    let val: Vec<Shape3D> = order[..val_count].iter().map(|&i| shapes[i].clone()).collect();
    let tr: Vec<Shape3D> = order[val_count..].iter().map(|&i| shapes[i].clone()).collect();
    train_split(&tr, &val, config)
}

/// Trains with a caller-provided train/validation split.
pub fn train_split(
    train_shapes: &[Shape3D],
    val_shapes: &[Shape3D],
    config: &TrainingConfig,
) -> Result<(TrainedModel, TrainingHistory)> {
    config.validate()?;
    let n = check_homogeneous(train_shapes)?;
    let n_val = check_homogeneous(val_shapes)?;
    if n != n_val {
        return Err(Error::HeterogeneousLandmarkCount(format!(
            "training shapes have {n} landmarks but validation shapes have {n_val}"
        )));
    }
    if config.missing_data.enabled && config.missing_data.count > n.saturating_sub(3) {
        return Err(Error::InvalidConfig(format!(
            "missing_data.count = {} leaves fewer than 3 of {n} landmarks observed",
            config.missing_data.count
        )));
    }

    let hyper = RmsPropHyper::with_learning_rate(config.learning_rate);
    let mut net_params = NetworkParams::init(n, config.seed);
    let mut net_rms = RmsPropState::new(&net_params);
    let mut imp_params =
        config.missing_data.enabled.then(|| ImputerParams::init(n, config.seed));
    let mut imp_rms: Option<DMatrix<f64>> =
        imp_params.as_ref().map(|_| DMatrix::zeros(2 * n, 2 * n));

    let validation = ValidationSet::build(val_shapes, config)?;

    let mut history = TrainingHistory {
        val_errors: Vec::new(),
        best_epoch: 0,
        best_val_error: f64::INFINITY,
        epochs_run: 0,
        stopped_early: false,
        clamped_targets: 0,
    };
    let mut best: Option<(NetworkParams, Option<ImputerParams>)> = None;
    let mut stale = 0usize;

    for epoch in 1..=config.epochs {
        let data = build_epoch(train_shapes, config, epoch)?;
        history.clamped_targets += data.clamped;
        let m = data.inputs.ncols();

        // Column order for mini-batch mode, reshuffled once per epoch from a
        // dedicated stream so batch composition is seed-stable.
        let chunks: Vec<Vec<usize>> = match config.batch_size {
            BatchSize::Full => Vec::new(),
            BatchSize::Size(k) => {
                let k = k.min(m);
                let mut order: Vec<usize> = (0..m).collect();
                let mut shuffle_rng = rng::derive(config.seed, &[TAG_EPOCH, epoch as u64, 1]);
                use rand::seq::SliceRandom;
                order.shuffle(&mut shuffle_rng);
                order.chunks(k).map(|c| c.to_vec()).collect()
            }
        };

        for iter in 0..config.max_iters_per_epoch {
            let subset = if chunks.is_empty() { None } else { Some(&chunks[iter % chunks.len()]) };
            match (&data.masked, imp_params.as_mut()) {
                (None, None) => {
                    let (inputs, targets) = match subset {
                        None => (None, None),
                        Some(cols) => (
                            Some(gather_columns(&data.inputs, cols)),
                            Some(gather_columns(&data.targets, cols)),
                        ),
                    };
                    let inputs = inputs.as_ref().unwrap_or(&data.inputs);
                    let targets = targets.as_ref().unwrap_or(&data.targets);
                    let acts = net::forward_batch(&net_params, inputs)?;
                    let (grads, _) = net::backward_batch(&net_params, &acts, targets, None);
                    net::rmsprop_step(&mut net_params, &grads, &mut net_rms, &hyper);
                }
                (Some((d0, missing, truths)), Some(imp)) => {
                    let (d0s, missings, truthss) = match subset {
                        None => (None, None, None),
                        Some(cols) => (
                            Some(gather_columns(d0, cols)),
                            Some(gather_columns(missing, cols)),
                            Some(gather_columns(truths, cols)),
                        ),
                    };
                    let d0 = d0s.as_ref().unwrap_or(d0);
                    let missing = missings.as_ref().unwrap_or(missing);
                    let truths = truthss.as_ref().unwrap_or(truths);
                    let (steps, filled) = imputer::impute_batch(imp, d0, missing);
                    let acts = net::forward_batch(&net_params, &filled)?;
                    let jg = imputer::backward_joint_batch(
                        imp,
                        &net_params,
                        &steps,
                        &acts,
                        missing,
                        truths,
                    );
                    net::rmsprop_step(&mut net_params, &jg.net, &mut net_rms, &hyper);
                    let ms = imp_rms.as_mut().unwrap();
                    net::rmsprop_update_matrix(imp.weights_mut(), &jg.imputer_weights, ms, &hyper);
                }
                _ => unreachable!("missing-data tensors exist iff the imputer does"),
            }
        }

        let val_loss = validation.loss(&net_params, imp_params.as_ref())?;
        history.val_errors.push(val_loss);
        history.epochs_run = epoch;

        if val_loss < history.best_val_error {
            history.best_val_error = val_loss;
            history.best_epoch = epoch;
            best = Some((net_params.clone(), imp_params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    let (net_best, imp_best) = best.expect("at least one epoch ran, so a snapshot exists");
    let model = TrainedModel {
        net: net_best,
        imputer: imp_best,
        n,
        input_ordering: INPUT_ORDERING.to_string(),
        config_hash: config.content_hash(),
        epoch_reached: history.epochs_run,
        best_validation_error: history.best_val_error,
    };
    Ok((model, history))
}

/// Standardized-coordinate quantum: inputs are rounded to this grid before
/// inference so reconstructions are bit-stable across cameras/translations.
const SNAP: f64 = 1048576.0; // 2^20

fn snap(v: f64) -> f64 {
    (v * SNAP).round() / SNAP
}

/// Recovers the 3D shape (up to scale) from one set of 2D landmarks.
///
/// The landmarks are standardized (camera scale and translation cancel),
/// quantized, imputed if any are missing (requires an imputer-equipped
/// model), fed through the depth net, and reassembled as
/// `(û, v̂, ẑ)` rows.
pub fn reconstruct(model: &TrainedModel, landmarks: &Landmarks2D) -> Result<Shape3D> {
    if landmarks.n() != model.n {
        return Err(Error::LandmarkCountMismatch { model: model.n, input: landmarks.n() });
    }
    let (standardized, _) = standardize_2d(landmarks)?;
    let mut coords = standardized.coords().clone();
    for v in coords.iter_mut() {
        *v = snap(*v);
    }
    let snapped = Landmarks2D::with_mask(coords, standardized.mask().to_vec())?;

    let input: DVector<f64>;
    let uv: Landmarks2D;
    if snapped.is_complete() {
        input = imputer::build_input(&snapped);
        uv = snapped;
    } else {
        let imp = model.imputer.as_ref().ok_or(Error::MissingWithoutImputer)?;
        let d0 = imputer::build_input(&snapped);
        let filled = imputer::impute(imp, &d0, snapped.mask())?;
        let u: Vec<f64> = (0..model.n).map(|j| filled[2 * j]).collect();
        let v: Vec<f64> = (0..model.n).map(|j| filled[2 * j + 1]).collect();
        uv = Landmarks2D::from_rows(&u, &v)?;
        input = filled;
    }
    let (depth, _) = net::forward(&model.net, &input)?;
    assemble_reconstruction(&uv, depth.as_slice())
}

/// How a model performed on a test set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Procrustes error per test sample, in input order.
    pub per_sample_errors: Vec<f64>,
    /// Arithmetic mean of `per_sample_errors`.
    pub mean_error: f64,
    /// Mean aligned residual per landmark across samples.
    pub per_landmark_mean_residuals: Vec<f64>,
    /// Wall-clock seconds spent reconstructing (excluded from the rendered
    /// report so reports stay byte-reproducible).
    pub wall_seconds: f64,
    /// Reconstructions per second during this evaluation.
    pub reconstructions_per_second: f64,
}

impl EvalReport {
    /// Deterministic structured-text rendering. Timing fields are
    /// deliberately omitted: identical seed/config/data must yield
    /// byte-identical reports, and wall time never reproduces.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lift3d eval v1");
        let _ = writeln!(out, "samples {}", self.per_sample_errors.len());
        let _ = writeln!(out, "landmarks {}", self.per_landmark_mean_residuals.len());
        let _ = writeln!(out, "mean_error {}", fmt_f(self.mean_error));
        for (i, e) in self.per_sample_errors.iter().enumerate() {
            let _ = writeln!(out, "sample {i} {}", fmt_f(*e));
        }
        for (j, r) in self.per_landmark_mean_residuals.iter().enumerate() {
            let _ = writeln!(out, "landmark {j} {}", fmt_f(*r));
        }
        let _ = writeln!(out, "end");
        out
    }
}

/// Projects, optionally corrupts, and reconstructs every test shape, scoring
/// each against its ground truth with the Procrustes metric.
///
/// Per sample, the shape is projected through `camera`, Gaussian 2D noise of
/// `noise_fraction` × object size is added, and `missing_count` landmarks
/// are hidden uniformly at random (consuming `rng` in that order).
pub fn evaluate(
    model: &TrainedModel,
    test_shapes: &[Shape3D],
    camera: &WeakPerspectiveCamera,
    noise_fraction: f64,
    missing_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EvalReport> {
    let n = check_homogeneous(test_shapes)?;
    if n != model.n {
        return Err(Error::LandmarkCountMismatch { model: model.n, input: n });
    }
    if !noise_fraction.is_finite() || !(0.0..=0.5).contains(&noise_fraction) {
        return Err(Error::InvalidConfig(format!(
            "evaluation noise_fraction must lie in [0, 0.5], got {noise_fraction}"
        )));
    }
    if missing_count > n.saturating_sub(3) {
        return Err(Error::InvalidConfig(format!(
            "missing_count = {missing_count} leaves fewer than 3 of {n} landmarks observed"
        )));
    }
    if missing_count > 0 && model.imputer.is_none() {
        return Err(Error::MissingWithoutImputer);
    }

    let mut per_sample = Vec::with_capacity(test_shapes.len());
    let mut landmark_sums = vec![0.0; n];
    let start = Instant::now();
    for shape in test_shapes {
        let projected = project_weak_perspective(shape, camera);
        let noisy = augment::add_landmark_noise(&projected, noise_fraction, rng);
        let observed = if missing_count > 0 {
            let mut mask = vec![true; n];
            for j in sample_distinct(rng, n, missing_count) {
                mask[j] = false;
            }
            Landmarks2D::with_mask(noisy.coords().clone(), mask)?
        } else {
            noisy
        };
        let recon = reconstruct(model, &observed)?;
        let alignment = procrustes_align(&recon, shape)?;
        per_sample.push(alignment.mean_error);
        for (j, sum) in landmark_sums.iter_mut().enumerate() {
            *sum += alignment.residuals[j];
        }
    }
    let wall_seconds = start.elapsed().as_secs_f64();
    let m = per_sample.len() as f64;
    Ok(EvalReport {
        mean_error: per_sample.iter().sum::<f64>() / m,
        per_sample_errors: per_sample,
        per_landmark_mean_residuals: landmark_sums.into_iter().map(|s| s / m).collect(),
        wall_seconds,
        reconstructions_per_second: if wall_seconds > 0.0 { m / wall_seconds } else { f64::INFINITY },
    })
}

/// Throughput measurement for the full reconstruction path.
#[derive(Debug, Clone)]
pub struct BenchReport {
    /// Reconstructions performed.
    pub repetitions: usize,
    /// Total wall-clock seconds.
    pub wall_seconds: f64,
    /// Reconstructions per second.
    pub per_second: f64,
    /// Sum of one output coordinate per run — pins the work as observable
    /// and doubles as a determinism witness across runs.
    pub checksum: f64,
}

/// Reconstructs `landmarks` `repetitions` times through the complete path
/// (standardization included) and reports the rate.
pub fn benchmark_reconstruction(
    model: &TrainedModel,
    landmarks: &Landmarks2D,
    repetitions: usize,
) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("benchmark repetitions must be at least 1".into()));
    }
    let mut checksum = 0.0;
    let start = Instant::now();
    for _ in 0..repetitions {
        let shape = reconstruct(model, landmarks)?;
        checksum += shape.coords()[(2, 0)];
    }
    let wall_seconds = start.elapsed().as_secs_f64();
    Ok(BenchReport {
        repetitions,
        wall_seconds,
        per_second: if wall_seconds > 0.0 {
            repetitions as f64 / wall_seconds
        } else {
            f64::INFINITY
        },
        checksum,
    })
}
