//! Fully-connected CDF regressor: ReLU hidden layers, sigmoid output, MSE
//! loss, trained with Adam.
//!
//! Layers are stored row-major as `out x in` weight matrices plus a bias
//! vector. Batched passes go through `matrixmultiply::dgemm`, which runs on a
//! single thread, so a fixed seed gives bit-identical training runs.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::N_FEATURES;
use crate::error::{Error, Result};
use crate::sampler::CdfSample;
use crate::seed::rng_from;

pub const DEFAULT_HIDDEN: [usize; 5] = [1024, 512, 256, 128, 32];
pub const DEFAULT_LEARNING_RATE: f64 = 0.005;
pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH_SIZE: usize = 1024;

/// Rows per GEMM call during inference.
const INFERENCE_CHUNK: usize = 2048;

/// `[6, hidden..., 1]`
pub fn layer_dims_with_hidden(hidden: &[usize]) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(N_FEATURES);
    dims.extend_from_slice(hidden);
    dims.push(1);
    dims
}

pub fn default_layer_dims() -> Vec<usize> {
    layer_dims_with_hidden(&DEFAULT_HIDDEN)
}

/// Per-feature z-score parameters fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; N_FEATURES],
            std: vec![1.0; N_FEATURES],
        }
    }

    /// Population mean and standard deviation per feature. Features that
    /// are constant over the rows get std 1.
    pub fn fit(rows: &[[f64; N_FEATURES]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("training features"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; N_FEATURES];
        let mut std = vec![0.0; N_FEATURES];
        for j in 0..N_FEATURES {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            mean[j] = m;
            std[j] = if s > 1e-12 * m.abs().max(1.0) { s } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    fn validate(&self) -> Result<()> {
        if self.mean.len() != N_FEATURES || self.std.len() != N_FEATURES {
            return Err(Error::ShapeMismatch {
                expected: N_FEATURES,
                actual: self.mean.len().min(self.std.len()),
            });
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::OutOfRange("feature std must be > 0".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn standardize_into(&self, raw: &[f64], out: &mut [f64]) {
        for j in 0..N_FEATURES {
            out[j] = (raw[j] - self.mean[j]) / self.std[j];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpProvenance {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub standardization: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    /// `weights[l]` is `layer_dims[l+1] x layer_dims[l]`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub feature_stats: FeatureStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_provenance: Option<MlpProvenance>,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least input and output layers".into(),
        ));
    }
    if dims[0] != N_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "first layer must have {N_FEATURES} inputs, got {}",
            dims[0]
        )));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::InvalidArgument(
            "last layer must have one output".into(),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidArgument(
            "layer widths must be positive".into(),
        ));
    }
    Ok(())
}

/// He-normal weights (variance `2 / fan_in`), zero biases, identity feature stats.
pub fn init_mlp(layer_dims: &[usize], seed: u64) -> Result<MlpModel> {
    validate_dims(layer_dims)?;
    let mut rng = rng_from(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        weights.push(
            (0..fan_in * fan_out)
                .map(|_| normal.sample(&mut rng))
                .collect(),
        );
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
        feature_stats: FeatureStats::identity(),
        training_provenance: None,
    })
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    // keep the output strictly inside (0, 1) even when exp saturates
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `out (rows x n_out) = input (rows x n_in) * W^T + b`
fn affine(
    input: &[f64],
    rows: usize,
    weights: &[f64],
    bias: &[f64],
    n_in: usize,
    out: &mut Vec<f64>,
) {
    let n_out = bias.len();
    out.clear();
    out.reserve(rows * n_out);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    // SAFETY: slice lengths match the stated shapes and strides.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            n_in,
            n_out,
            1.0,
            input.as_ptr(),
            n_in as isize,
            1,
            weights.as_ptr(),
            1,
            n_in as isize,
            1.0,
            out.as_mut_ptr(),
            n_out as isize,
            1,
        );
    }
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .fold(0.0_f64, |m, g| m.max(g.abs()))
    }
}

impl MlpModel {
    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.layer_dims)?;
        let n = self.layer_dims.len() - 1;
        if self.weights.len() != n || self.biases.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: self.weights.len(),
            });
        }
        for (l, pair) in self.layer_dims.windows(2).enumerate() {
            if self.weights[l].len() != pair[0] * pair[1] {
                return Err(Error::ShapeMismatch {
                    expected: pair[0] * pair[1],
                    actual: self.weights[l].len(),
                });
            }
            if self.biases[l].len() != pair[1] {
                return Err(Error::ShapeMismatch {
                    expected: pair[1],
                    actual: self.biases[l].len(),
                });
            }
        }
        self.feature_stats.validate()
    }

    fn standardize_rows(&self, rows: &[[f64; N_FEATURES]]) -> Vec<f64> {
        let mut x = vec![0.0; rows.len() * N_FEATURES];
        for (raw, out) in rows.iter().zip(x.chunks_exact_mut(N_FEATURES)) {
            self.feature_stats.standardize_into(raw, out);
        }
        x
    }

    /// Output-layer pre-activation for standardized rows.
    fn logits_standardized(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let last = self.n_layers() - 1;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in 0..=last {
            affine(
                &cur,
                rows,
                &self.weights[l],
                &self.biases[l],
                self.layer_dims[l],
                &mut next,
            );
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Predicted CDF for one raw feature row.
    pub fn forward(&self, features_raw: &[f64]) -> Result<f64> {
        if features_raw.len() != N_FEATURES {
            return Err(Error::ShapeMismatch {
                expected: N_FEATURES,
                actual: features_raw.len(),
            });
        }
        let mut row = [0.0; N_FEATURES];
        row.copy_from_slice(features_raw);
        Ok(self.predict_rows(&[row])[0])
    }

    /// Predicted CDF for many raw feature rows.
    pub fn predict_rows(&self, rows: &[[f64; N_FEATURES]]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(INFERENCE_CHUNK) {
            let x = self.standardize_rows(chunk);
            let logits = self.logits_standardized(&x, chunk.len());
            out.extend(logits.into_iter().map(sigmoid));
        }
        out
    }
}

pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            expected: targets.len(),
            actual: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Loss and gradients for a batch already standardized into `x` (rows x 6).
fn loss_and_gradients(model: &MlpModel, x: &[f64], targets: &[f64]) -> (f64, MlpGradients) {
    let rows = targets.len();
    let n_layers = model.n_layers();

    // activations[l] feeds layer l; the last entry is the output logits
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
    activations.push(x.to_vec());
    for l in 0..n_layers {
        let mut z = Vec::new();
        affine(
            &activations[l],
            rows,
            &model.weights[l],
            &model.biases[l],
            model.layer_dims[l],
            &mut z,
        );
        if l + 1 < n_layers {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        activations.push(z);
    }

    let logits = &activations[n_layers];
    let scale = 2.0 / rows as f64;
    let mut loss = 0.0;
    let mut delta: Vec<f64> = logits
        .iter()
        .zip(targets)
        .map(|(&z, &t)| {
            let y = sigmoid(z);
            loss += (y - t) * (y - t);
            scale * (y - t) * y * (1.0 - y)
        })
        .collect();
    loss /= rows as f64;

    let mut grads = MlpGradients::zeros_like(model);
    for l in (0..n_layers).rev() {
        let n_in = model.layer_dims[l];
        let n_out = model.layer_dims[l + 1];
        let input = &activations[l];

        for row in delta.chunks_exact(n_out) {
            for (g, d) in grads.biases[l].iter_mut().zip(row) {
                *g += d;
            }
        }
        // dW = delta^T * input
        // SAFETY: shapes (n_out x rows) * (rows x n_in) -> (n_out x n_in).
        unsafe {
            matrixmultiply::dgemm(
                n_out,
                rows,
                n_in,
                1.0,
                delta.as_ptr(),
                1,
                n_out as isize,
                input.as_ptr(),
                n_in as isize,
                1,
                0.0,
                grads.weights[l].as_mut_ptr(),
                n_in as isize,
                1,
            );
        }
        if l == 0 {
            break;
        }
        // delta_prev = (delta * W) masked by the ReLU of the previous layer
        let mut prev = vec![0.0; rows * n_in];
        // SAFETY: shapes (rows x n_out) * (n_out x n_in) -> (rows x n_in).
        unsafe {
            matrixmultiply::dgemm(
                rows,
                n_out,
                n_in,
                1.0,
                delta.as_ptr(),
                n_out as isize,
                1,
                model.weights[l].as_ptr(),
                n_in as isize,
                1,
                0.0,
                prev.as_mut_ptr(),
                n_in as isize,
                1,
            );
        }
        for (p, a) in prev.iter_mut().zip(input) {
            if *a <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    (loss, grads)
}

/// MSE loss of `batch` and its gradient with respect to every parameter.
pub fn backward(model: &MlpModel, batch: &[CdfSample]) -> Result<(f64, MlpGradients)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    model.validate()?;
    let rows: Vec<[f64; N_FEATURES]> = batch.iter().map(|s| s.features.values).collect();
    let targets: Vec<f64> = batch.iter().map(|s| s.target).collect();
    let x = model.standardize_rows(&rows);
    Ok(loss_and_gradients(model, &x, &targets))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m_weights: Vec<Vec<f64>>,
    pub v_weights: Vec<Vec<f64>>,
    pub m_biases: Vec<Vec<f64>>,
    pub v_biases: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPSILON: f64 = 1e-8;

    pub fn new(model: &MlpModel) -> Self {
        let zeros = MlpGradients::zeros_like(model);
        Self {
            m_weights: zeros.weights.clone(),
            v_weights: zeros.weights,
            m_biases: zeros.biases.clone(),
            v_biases: zeros.biases,
            step: 0,
            beta1: Self::BETA1,
            beta2: Self::BETA2,
            epsilon: Self::EPSILON,
        }
    }
}

fn same_shape(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len())
}

/// One bias-corrected Adam update.
pub fn adam_step(
    model: &mut MlpModel,
    grads: &MlpGradients,
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    let shapes_ok = same_shape(&model.weights, &grads.weights)
        && same_shape(&model.biases, &grads.biases)
        && same_shape(&model.weights, &state.m_weights)
        && same_shape(&model.weights, &state.v_weights)
        && same_shape(&model.biases, &state.m_biases)
        && same_shape(&model.biases, &state.v_biases);
    if !shapes_ok {
        return Err(Error::InvalidArgument(
            "optimizer state does not match the model".into(),
        ));
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for l in 0..model.weights.len() {
        update(
            &mut model.weights[l],
            &grads.weights[l],
            &mut state.m_weights[l],
            &mut state.v_weights[l],
        );
        update(
            &mut model.biases[l],
            &grads.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpTrainOutcome {
    pub model: MlpModel,
    /// Sample-weighted mean mini-batch MSE of each epoch.
    pub loss_history: Vec<f64>,
}

pub fn train_mlp(
    model: MlpModel,
    train: &[CdfSample],
    config: &MlpTrainConfig,
) -> Result<MlpTrainOutcome> {
    train_mlp_with(model, train, config, |_, _| {})
}

/// [`train_mlp`] with a callback invoked after each epoch as `(epoch, loss)`.
pub fn train_mlp_with(
    mut model: MlpModel,
    train: &[CdfSample],
    config: &MlpTrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<MlpTrainOutcome> {
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::OutOfRange("learning rate must be > 0".into()));
    }
    let rows: Vec<[f64; N_FEATURES]> = train.iter().map(|s| s.features.values).collect();
    model.feature_stats = FeatureStats::fit(&rows)?;
    model.validate()?;
    model.training_provenance = Some(MlpProvenance {
        seed: config.seed,
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        beta1: AdamState::BETA1,
        beta2: AdamState::BETA2,
        adam_epsilon: AdamState::EPSILON,
        standardization: "z-score from training split; constant features use std 1".into(),
        dataset_hash: None,
    });

    let x = model.standardize_rows(&rows);
    let y: Vec<f64> = train.iter().map(|s| s.target).collect();
    let mut state = AdamState::new(&model);
    let mut rng = rng_from(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut bx = Vec::with_capacity(config.batch_size * N_FEATURES);
    let mut by = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.extend_from_slice(&x[i * N_FEATURES..(i + 1) * N_FEATURES]);
                by.push(y[i]);
            }
            let (loss, grads) = loss_and_gradients(&model, &bx, &by);
            adam_step(&mut model, &grads, &mut state, config.learning_rate)?;
            total += loss * batch.len() as f64;
        }
        let epoch_loss = total / train.len() as f64;
        history.push(epoch_loss);
        on_epoch(epoch, epoch_loss);
    }
    Ok(MlpTrainOutcome {
        model,
        loss_history: history,
    })
}
