//! Dense row-major matrices and the Cholesky log-determinant shared by the
//! k-DPP sampler and the batch diagnostics.

use crate::error::{invalid, Result};

/// Row-major dense matrix of `f64`. Rows are the points / examples.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return invalid(format!(
                "matrix buffer of length {} does not match {rows}x{cols}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return invalid(format!(
                    "row {i} has length {} but row 0 has length {cols}",
                    r.len()
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Gathers the given rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    acc.iter().sum::<f64>() + tail
}

/// Squared Euclidean distance, accumulated like [`dot`].
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    acc.iter().sum::<f64>() + tail
}

/// Pivots at or below this fraction of the original diagonal entry are
/// treated as zero. Rounding in the elimination leaves residuals of order
/// `n * eps * diag`, so an exactly rank-deficient matrix never yields a
/// meaningful positive pivot below this level.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-12;

/// Log-determinant of a symmetric positive semi-definite `n x n` matrix
/// (row-major) via an in-place Cholesky factorization of `scratch`.
///
/// Returns `None` when a pivot is non-positive relative to its diagonal,
/// i.e. the matrix is numerically singular. `scratch` is overwritten.
pub fn cholesky_log_det_in_place(scratch: &mut [f64], n: usize) -> Option<f64> {
    debug_assert_eq!(scratch.len(), n * n);
    let mut log_det = 0.0;
    for j in 0..n {
        let rest = &mut scratch[j * n..];
        let row_j = &mut rest[..n];
        let diag = row_j[j];
        let pivot = diag - dot(&row_j[..j], &row_j[..j]);
        if !(pivot > diag * SINGULAR_PIVOT_RTOL) || !pivot.is_finite() {
            return None;
        }
        let l_jj = pivot.sqrt();
        row_j[j] = l_jj;
        log_det += 2.0 * l_jj.ln();
        let (head, below) = rest.split_at_mut(n);
        let lj = &head[..j];
        for i in (j + 1)..n {
            let row_i = &mut below[(i - j - 1) * n..(i - j) * n];
            row_i[j] = (row_i[j] - dot(&row_i[..j], lj)) / l_jj;
        }
    }
    Some(log_det)
}

/// Log-determinant of a symmetric PSD matrix; `None` if numerically singular.
pub fn cholesky_log_det(matrix: &[f64], n: usize) -> Option<f64> {
    let mut scratch = matrix.to_vec();
    cholesky_log_det_in_place(&mut scratch, n)
}

/// Gram matrix `G[a][b] = <x_{idx[a]}, x_{idx[b]}>` of the selected rows.
pub fn gram_matrix(points: &Matrix, idx: &[usize]) -> Vec<f64> {
    let n = idx.len();
    let mut g = vec![0.0; n * n];
    for a in 0..n {
        let ra = points.row(idx[a]);
        for b in a..n {
            let v = dot(ra, points.row(idx[b]));
            g[a * n + b] = v;
            g[b * n + a] = v;
        }
    }
    g
}
