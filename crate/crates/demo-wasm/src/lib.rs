//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Points cross the boundary as flat row-major `Float64Array`s.

use wasm_bindgen::prelude::*;

use badge_core::diagnostics::log_gram_det;
use badge_core::embedding::{grad_norm_sq_for_label, hypothetical_label};
use badge_core::linalg::Matrix;
use badge_core::samplers::{ffkc_select, kdpp_mcmc_run, kmeanspp_seed, random_select};

fn matrix(points: &[f64], dim: usize) -> Result<Matrix, String> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(format!(
            "{} values do not form rows of width {dim}",
            points.len()
        ));
    }
    Matrix::new(points.len() / dim, dim, points.to_vec()).map_err(|e| e.to_string())
}

/// Indices of a batch of `k` points chosen by `method`:
/// `kmeans++`, `kdpp`, `kcenter` or `random`.
pub fn select(
    points: &[f64],
    dim: usize,
    k: usize,
    method: &str,
    seed: u64,
) -> Result<Vec<u32>, String> {
    let m = matrix(points, dim)?;
    let picked = match method {
        "kmeans++" => kmeanspp_seed(&m, k, seed),
        "kdpp" => kdpp_mcmc_run(&m, k, seed, None).map(|r| r.indices),
        "kcenter" => ffkc_select(&Matrix::zeros(0, dim), &m, k),
        "random" => random_select(&(0..m.rows()).collect::<Vec<_>>(), k, seed),
        other => return Err(format!("unknown method {other:?}")),
    }
    .map_err(|e| e.to_string())?;
    Ok(picked.into_iter().map(|i| i as u32).collect())
}

/// Log-determinant of the Gram matrix of the rows in `idx`; `-Infinity` if singular.
pub fn batch_log_det(points: &[f64], dim: usize, idx: &[u32]) -> Result<f64, String> {
    let m = matrix(points, dim)?;
    if let Some(&bad) = idx.iter().find(|&&i| i as usize >= m.rows()) {
        return Err(format!("index {bad} out of range"));
    }
    let rows: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
    log_gram_det(&m.select_rows(&rows)).map_err(|e| e.to_string())
}

/// Squared gradient-embedding norm for every candidate label, followed by
/// the predicted label as the last element.
pub fn label_norms(probs: &[f64], z_norm_sq: f64) -> Result<Vec<f64>, String> {
    let yhat = hypothetical_label(probs).map_err(|e| e.to_string())?;
    let mut out = (0..probs.len())
        .map(|y| grad_norm_sq_for_label(probs, y, z_norm_sq))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    out.push(yhat as f64);
    Ok(out)
}

#[wasm_bindgen(js_name = selectBatch)]
pub fn select_batch(
    points: &[f64],
    dim: usize,
    k: usize,
    method: &str,
    seed: u32,
) -> Result<Vec<u32>, JsError> {
    select(points, dim, k, method, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = batchLogDet)]
pub fn batch_log_det_js(points: &[f64], dim: usize, idx: &[u32]) -> Result<f64, JsError> {
    batch_log_det(points, dim, idx).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = labelNorms)]
pub fn label_norms_js(probs: &[f64], z_norm_sq: f64) -> Result<Vec<f64>, JsError> {
    label_norms(probs, z_norm_sq).map_err(|e| JsError::new(&e))
}
