//! Hallucinated-label gradient embeddings.
//!
//! For a softmax head `p = softmax(W z)`, the cross-entropy gradient with
//! respect to row `i` of `W` under label `y` is `(p_i - [y == i]) * z`. The
//! gradient embedding of an unlabeled example uses the model's own argmax
//! prediction as `y`.

use crate::error::{invalid, Result};

/// Tolerance on `|sum(p) - 1|` for a vector to count as a distribution.
pub const PROB_SUM_TOL: f64 = 1e-6;

/// Model output for a single pool example.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub example_id: usize,
    pub probs: Vec<f64>,
    pub features: Vec<f64>,
}

impl PredictionRecord {
    pub fn new(example_id: usize, probs: Vec<f64>, features: Vec<f64>) -> Result<Self> {
        validate_probs(&probs)?;
        if let Some(j) = features.iter().position(|v| !v.is_finite()) {
            return invalid(format!("feature {j} of example {example_id} is not finite"));
        }
        Ok(Self {
            example_id,
            probs,
            features,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn feature_norm_sq(&self) -> f64 {
        self.features.iter().map(|v| v * v).sum()
    }
}

/// Flat `K * d` gradient embedding; block `i` is `(p_i - [yhat == i]) * z`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEmbedding {
    values: Vec<f64>,
    num_classes: usize,
    dim: usize,
    norm_sq: f64,
    label: usize,
}

impl GradientEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn block(&self, class: usize) -> &[f64] {
        &self.values[class * self.dim..(class + 1) * self.dim]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    /// Squared Euclidean norm, cached at construction.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// The hallucinated label used to build this embedding.
    pub fn label(&self) -> usize {
        self.label
    }
}

/// Checks that `p` is a finite, non-negative vector summing to one.
pub fn validate_probs(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return invalid("probability vector is empty");
    }
    let mut sum = 0.0;
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() {
            return invalid(format!("probability entry {i} is not finite"));
        }
        if v < 0.0 {
            return invalid(format!("probability entry {i} is negative ({v})"));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return invalid(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// The model's predicted ("hallucinated") label: argmax of `p`, lowest index on ties.
pub fn hypothetical_label(p: &[f64]) -> Result<usize> {
    if p.is_empty() {
        return invalid("probability vector is empty");
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite()) {
        return invalid(format!("probability entry {i} is not finite"));
    }
    Ok(argmax(p).expect("non-empty"))
}

/// Per-class scale factors `p_i - [label == i]` of the output-layer gradient.
///
/// Shared by the embedding construction and the MLP backward pass so the two
/// agree bit for bit.
pub(crate) fn label_coefficients_into(p: &[f64], label: usize, out: &mut [f64]) {
    for (i, (o, &pi)) in out.iter_mut().zip(p).enumerate() {
        *o = if i == label { pi - 1.0 } else { pi };
    }
}

pub fn label_coefficients(p: &[f64], label: usize) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    label_coefficients_into(p, label, &mut out);
    out
}

/// Output-layer cross-entropy gradient under an arbitrary label `y`.
pub fn label_gradient(p: &[f64], z: &[f64], y: usize) -> Result<GradientEmbedding> {
    if y >= p.len() {
        return invalid(format!("label {y} out of range for {} classes", p.len()));
    }
    let coeffs = label_coefficients(p, y);
    let d = z.len();
    let mut values = Vec::with_capacity(p.len() * d);
    for &c in &coeffs {
        values.extend(z.iter().map(|&zj| c * zj));
    }
    let norm_sq = values.iter().map(|v| v * v).sum();
    Ok(GradientEmbedding {
        values,
        num_classes: p.len(),
        dim: d,
        norm_sq,
        label: y,
    })
}

/// Gradient embedding of a pool example under its hypothetical label.
pub fn gradient_embedding(rec: &PredictionRecord) -> Result<GradientEmbedding> {
    validate_probs(&rec.probs)?;
    let label = hypothetical_label(&rec.probs)?;
    label_gradient(&rec.probs, &rec.features, label)
}

/// Like [`gradient_embedding`], additionally checking the record against the
/// expected class count and feature dimension.
pub fn gradient_embedding_checked(
    rec: &PredictionRecord,
    num_classes: usize,
    feature_dim: usize,
) -> Result<GradientEmbedding> {
    if rec.probs.len() != num_classes || rec.features.len() != feature_dim {
        return invalid(format!(
            "record {} has K={} d={}, expected K={num_classes} d={feature_dim}",
            rec.example_id,
            rec.probs.len(),
            rec.features.len()
        ));
    }
    gradient_embedding(rec)
}

/// Closed form `(sum_i p_i^2 + 1 - 2 p_y) * ||z||^2` for the squared norm of
/// the label-`y` output-layer gradient.
pub fn grad_norm_sq_for_label(p: &[f64], y: usize, z_norm_sq: f64) -> Result<f64> {
    if y >= p.len() {
        return invalid(format!("label {y} out of range for {} classes", p.len()));
    }
    if !(z_norm_sq >= 0.0) {
        return invalid(format!(
            "squared feature norm {z_norm_sq} is negative or NaN"
        ));
    }
    // sum p^2 + 1 - 2 p_y regrouped as (1 - p_y)^2 + sum_{i != y} p_i^2, which
    // avoids cancellation when p_y is close to 1.
    let coef: f64 = p
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == y { (1.0 - v) * (1.0 - v) } else { v * v })
        .sum();
    Ok(coef * z_norm_sq)
}
