//! Diversity and magnitude of a selected batch in embedding space.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{cholesky_log_det, gram_matrix, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchDiagnostics {
    /// `ln det(G G^T)`, `-inf` when the batch Gram matrix is singular.
    pub log_gram_det: f64,
    pub mean_norm: f64,
    pub batch_size: usize,
}

/// Log-determinant of the `B x B` Gram matrix of the rows, or negative
/// infinity if it is numerically singular.
pub fn log_gram_det(embeddings: &Matrix) -> Result<f64> {
    let b = embeddings.rows();
    if b == 0 {
        return invalid("log Gram determinant of an empty batch");
    }
    let idx: Vec<usize> = (0..b).collect();
    let gram = gram_matrix(embeddings, &idx);
    Ok(cholesky_log_det(&gram, b).unwrap_or(f64::NEG_INFINITY))
}

/// Arithmetic mean of row norms; zero for an empty batch.
pub fn mean_embedding_norm(embeddings: &Matrix) -> f64 {
    if embeddings.rows() == 0 {
        return 0.0;
    }
    let total: f64 = embeddings
        .iter_rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    total / embeddings.rows() as f64
}

pub fn batch_diagnostics(embeddings: &Matrix) -> Result<BatchDiagnostics> {
    Ok(BatchDiagnostics {
        log_gram_det: log_gram_det(embeddings)?,
        mean_norm: mean_embedding_norm(embeddings),
        batch_size: embeddings.rows(),
    })
}
