//! Two-layer ReLU MLP with a softmax head, trained with Adam from a fresh
//! initialization every time it is fit.
//!
//! Parameters live in one flat vector laid out as
//! `[W1 (hidden x input) | b1 (hidden) | W2 (classes x hidden) | b2 (classes)]`,
//! all row-major, so gradients, optimizer moments and checkpoints share the
//! same indexing.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{argmax, label_coefficients_into, PredictionRecord};
use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::samplers::rng_from_seed;

/// Floor applied to `p_y` before taking the log in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    /// Filled in from the dataset when left at zero in a config file.
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub train_acc_threshold: f64,
    pub max_epochs: usize,
    pub minibatch_size: usize,
    pub rng_seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            input_dim: 0,
            hidden_dim: 128,
            num_classes: 0,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            train_acc_threshold: 0.99,
            max_epochs: 300,
            minibatch_size: 64,
            rng_seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            num_classes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return invalid("MLP dimensions must be positive");
        }
        if self.minibatch_size == 0 {
            return invalid("minibatch size must be positive");
        }
        if !(self.train_acc_threshold > 0.0 && self.train_acc_threshold <= 1.0) {
            return invalid("train_acc_threshold must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.adam_eps > 0.0) {
            return invalid("learning rate and Adam epsilon must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return invalid("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.hidden_dim * self.input_dim
            + self.hidden_dim
            + self.num_classes * self.hidden_dim
            + self.num_classes
    }
}

/// Offsets of the four parameter blocks inside the flat vector.
#[derive(Clone, Copy, Debug)]
struct Layout {
    d_in: usize,
    h: usize,
    k: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl Layout {
    fn new(d_in: usize, h: usize, k: usize) -> Self {
        let b1 = h * d_in;
        let w2 = b1 + h;
        let b2 = w2 + k * h;
        Self {
            d_in,
            h,
            k,
            b1,
            w2,
            b2,
        }
    }

    fn len(&self) -> usize {
        self.b2 + self.k
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    input_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    rng_seed: u64,
    theta: Vec<f64>,
    pub adam: AdamState,
}

impl MlpParams {
    /// All-zero parameters; every input maps to the uniform distribution.
    pub fn zeros(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::from_flat_unchecked(
            config,
            vec![0.0; config.param_count()],
        ))
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases of each layer.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config.input_dim, config.hidden_dim, config.num_classes);
        let mut rng = rng_from_seed(config.rng_seed);
        let mut theta = vec![0.0; layout.len()];
        let a1 = 1.0 / (config.input_dim as f64).sqrt();
        let a2 = 1.0 / (config.hidden_dim as f64).sqrt();
        for (i, t) in theta.iter_mut().enumerate() {
            let a = if i < layout.w2 { a1 } else { a2 };
            *t = rng.random_range(-a..a);
        }
        Ok(Self::from_flat_unchecked(config, theta))
    }

    pub fn from_flat(config: &MlpConfig, theta: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if theta.len() != config.param_count() {
            return invalid(format!(
                "expected {} parameters, got {}",
                config.param_count(),
                theta.len()
            ));
        }
        Ok(Self::from_flat_unchecked(config, theta))
    }

    fn from_flat_unchecked(config: &MlpConfig, theta: Vec<f64>) -> Self {
        let n = theta.len();
        Self {
            input_dim: config.input_dim,
            hidden_dim: config.hidden_dim,
            num_classes: config.num_classes,
            rng_seed: config.rng_seed,
            theta,
            adam: AdamState {
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
        }
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_dim, self.hidden_dim, self.num_classes)
    }

    /// Output-layer weights, one row of length `hidden_dim` per class.
    pub fn output_weights(&self) -> &[f64] {
        let l = self.layout();
        &self.theta[l.w2..l.b2]
    }

    /// Writes the checkpoint: magic `BADGEMLP`, format version (u32), input,
    /// hidden and class dims (u32 each), seed (u64), parameter count (u64),
    /// then the flat parameters as f64. Everything little-endian.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for d in [self.input_dim, self.hidden_dim, self.num_classes] {
            let d = u32::try_from(d)
                .map_err(|_| Error::InvalidInput("dimension exceeds u32".into()))?;
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.rng_seed.to_le_bytes())?;
        w.write_all(&(self.theta.len() as u64).to_le_bytes())?;
        for v in &self.theta {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a checkpoint written by [`MlpParams::write_checkpoint`]. Adam
    /// moments are not stored and come back zeroed.
    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Schema("not an MLP checkpoint (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let input_dim = read_u32(&mut r)? as usize;
        let hidden_dim = read_u32(&mut r)? as usize;
        let num_classes = read_u32(&mut r)? as usize;
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let rng_seed = u64::from_le_bytes(buf8);
        r.read_exact(&mut buf8)?;
        let count = u64::from_le_bytes(buf8) as usize;
        let config = MlpConfig {
            rng_seed,
            ..MlpConfig::new(input_dim, hidden_dim, num_classes)
        };
        if count != config.param_count() {
            return Err(Error::Schema(format!(
                "checkpoint holds {count} parameters but its dims need {}",
                config.param_count()
            )));
        }
        let mut theta = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut buf8)?;
            theta.push(f64::from_le_bytes(buf8));
        }
        Self::from_flat(&config, theta)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"BADGEMLP";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Per-example activations reused across forward and backward passes.
struct Scratch {
    pre: Vec<f64>,
    z: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Scratch {
    fn new(l: &Layout) -> Self {
        Self {
            pre: vec![0.0; l.h],
            z: vec![0.0; l.h],
            logits: vec![0.0; l.k],
            probs: vec![0.0; l.k],
            coeffs: vec![0.0; l.k],
        }
    }
}

fn forward_into(theta: &[f64], l: &Layout, x: &[f64], s: &mut Scratch) {
    let w1 = &theta[..l.b1];
    let b1 = &theta[l.b1..l.w2];
    let w2 = &theta[l.w2..l.b2];
    let b2 = &theta[l.b2..];
    for j in 0..l.h {
        let row = &w1[j * l.d_in..(j + 1) * l.d_in];
        let a = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        s.pre[j] = a;
        s.z[j] = a.max(0.0);
    }
    for i in 0..l.k {
        let row = &w2[i * l.h..(i + 1) * l.h];
        s.logits[i] = b2[i] + row.iter().zip(&s.z).map(|(w, v)| w * v).sum::<f64>();
    }
    softmax_into(&s.logits, &mut s.probs);
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(logits) {
        *o = (v - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Class probabilities and penultimate (post-ReLU) features for one input.
pub fn forward(params: &MlpParams, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_input(params, x)?;
    let l = params.layout();
    let mut s = Scratch::new(&l);
    forward_into(&params.theta, &l, x, &mut s);
    Ok((s.probs, s.z))
}

fn check_input(params: &MlpParams, x: &[f64]) -> Result<()> {
    if x.len() != params.input_dim {
        return invalid(format!(
            "input has dimension {}, expected {}",
            x.len(),
            params.input_dim
        ));
    }
    if let Some(j) = x.iter().position(|v| !v.is_finite()) {
        return invalid(format!("input entry {j} is not finite"));
    }
    Ok(())
}

/// Accumulates the summed loss and gradient of `rows` into `grad`.
fn accumulate_grad(
    theta: &[f64],
    l: &Layout,
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    grad: &mut [f64],
    s: &mut Scratch,
) -> f64 {
    let mut loss = 0.0;
    let mut dz = vec![0.0; l.h];
    for &r in rows {
        let xr = x.row(r);
        let label = y[r];
        forward_into(theta, l, xr, s);
        loss -= s.probs[label].max(PROB_FLOOR).ln();
        label_coefficients_into(&s.probs, label, &mut s.coeffs);

        let w2 = &theta[l.w2..l.b2];
        dz.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..l.k {
            let c = s.coeffs[i];
            grad[l.b2 + i] += c;
            let g_row = &mut grad[l.w2 + i * l.h..l.w2 + (i + 1) * l.h];
            for (g, zj) in g_row.iter_mut().zip(&s.z) {
                *g += c * zj;
            }
            let w_row = &w2[i * l.h..(i + 1) * l.h];
            for (d, w) in dz.iter_mut().zip(w_row) {
                *d += c * w;
            }
        }
        for j in 0..l.h {
            if s.pre[j] <= 0.0 {
                continue;
            }
            let dh = dz[j];
            grad[l.b1 + j] += dh;
            let g_row = &mut grad[j * l.d_in..(j + 1) * l.d_in];
            for (g, xv) in g_row.iter_mut().zip(xr) {
                *g += dh * xv;
            }
        }
    }
    loss
}

fn check_batch(params: &MlpParams, x: &Matrix, y: &[usize]) -> Result<()> {
    if x.rows() != y.len() {
        return invalid(format!("{} inputs but {} labels", x.rows(), y.len()));
    }
    if x.cols() != params.input_dim {
        return invalid(format!(
            "inputs have dimension {}, expected {}",
            x.cols(),
            params.input_dim
        ));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= params.num_classes) {
        return invalid(format!(
            "label {bad} out of range for {} classes",
            params.num_classes
        ));
    }
    Ok(())
}

/// Mean cross-entropy over the batch and its gradient with respect to the
/// flat parameter vector.
pub fn loss_and_grad(params: &MlpParams, x: &Matrix, y: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_batch(params, x, y)?;
    if y.is_empty() {
        return invalid("empty batch");
    }
    let l = params.layout();
    let mut s = Scratch::new(&l);
    let mut grad = vec![0.0; l.len()];
    let rows: Vec<usize> = (0..y.len()).collect();
    let loss = accumulate_grad(&params.theta, &l, x, y, &rows, &mut grad, &mut s);
    let inv = 1.0 / y.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss * inv, grad))
}

fn adam_step(params: &mut MlpParams, grad: &[f64], cfg: &MlpConfig) {
    let adam = &mut params.adam;
    adam.step += 1;
    let t = adam.step as i32;
    let bc1 = 1.0 - cfg.adam_beta1.powi(t);
    let bc2 = 1.0 - cfg.adam_beta2.powi(t);
    for i in 0..grad.len() {
        let g = grad[i];
        adam.m[i] = cfg.adam_beta1 * adam.m[i] + (1.0 - cfg.adam_beta1) * g;
        adam.v[i] = cfg.adam_beta2 * adam.v[i] + (1.0 - cfg.adam_beta2) * g * g;
        let m_hat = adam.m[i] / bc1;
        let v_hat = adam.v[i] / bc2;
        params.theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdReached,
    MaxEpochs,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub stop: StopReason,
    pub epochs: usize,
    pub train_accuracy: f64,
}

/// Fits a freshly initialized network on `(x, y)` with minibatch Adam until
/// training accuracy reaches the configured threshold or the epoch cap.
/// The example order is reshuffled every epoch from the seeded stream.
pub fn train_from_scratch(config: &MlpConfig, x: &Matrix, y: &[usize]) -> Result<TrainOutcome> {
    let mut params = MlpParams::init(config)?;
    check_batch(&params, x, y)?;
    if y.is_empty() {
        return invalid("cannot train on an empty labeled set");
    }
    let l = params.layout();
    let mut s = Scratch::new(&l);
    let mut grad = vec![0.0; l.len()];
    // Offset so the shuffle stream is distinct from the init stream.
    let mut rng = rng_from_seed(config.rng_seed ^ 0x5851_f42d_4c95_7f2d);
    let mut order: Vec<usize> = (0..y.len()).collect();

    let mut train_accuracy = accuracy_of(&params, x, y);
    let mut epochs = 0;
    while epochs < config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            accumulate_grad(&params.theta, &l, x, y, chunk, &mut grad, &mut s);
            let inv = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam_step(&mut params, &grad, config);
        }
        epochs += 1;
        train_accuracy = accuracy_of(&params, x, y);
        if train_accuracy >= config.train_acc_threshold {
            return Ok(TrainOutcome {
                params,
                stop: StopReason::ThresholdReached,
                epochs,
                train_accuracy,
            });
        }
    }
    if let Some(i) = params.theta.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "parameter {i} diverged during training"
        )));
    }
    Ok(TrainOutcome {
        params,
        stop: StopReason::MaxEpochs,
        epochs,
        train_accuracy,
    })
}

fn accuracy_of(params: &MlpParams, x: &Matrix, y: &[usize]) -> f64 {
    let l = params.layout();
    let mut s = Scratch::new(&l);
    let correct = (0..y.len())
        .filter(|&r| {
            forward_into(&params.theta, &l, x.row(r), &mut s);
            argmax(&s.probs) == Some(y[r])
        })
        .count();
    correct as f64 / y.len() as f64
}

/// Prediction records for the given rows of `x`; `example_id` is the row index.
pub fn predict_pool(
    params: &MlpParams,
    x: &Matrix,
    rows: &[usize],
) -> Result<Vec<PredictionRecord>> {
    if x.cols() != params.input_dim {
        return invalid(format!(
            "inputs have dimension {}, expected {}",
            x.cols(),
            params.input_dim
        ));
    }
    let l = params.layout();
    let mut s = Scratch::new(&l);
    rows.iter()
        .map(|&r| {
            let xr = x.row(r);
            check_input(params, xr)?;
            forward_into(&params.theta, &l, xr, &mut s);
            Ok(PredictionRecord {
                example_id: r,
                probs: s.probs.clone(),
                features: s.z.clone(),
            })
        })
        .collect()
}

/// Fraction of rows whose argmax prediction (lowest index on ties) matches the label.
pub fn test_accuracy(params: &MlpParams, x: &Matrix, y: &[usize]) -> Result<f64> {
    if y.is_empty() {
        return invalid("test set is empty");
    }
    check_batch(params, x, y)?;
    Ok(accuracy_of(params, x, y))
}
