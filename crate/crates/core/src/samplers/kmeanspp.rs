use rand::Rng;

use crate::error::Result;
use crate::linalg::{sq_dist, Matrix};

use super::{check_k, rng_from_seed};

/// Incremental state of k-means++ seeding: the chosen centers and each
/// point's squared distance to its nearest center.
#[derive(Clone, Debug)]
pub struct D2Seeding<'a> {
    points: &'a Matrix,
    min_d2: Vec<f64>,
    is_chosen: Vec<bool>,
    chosen: Vec<usize>,
}

impl<'a> D2Seeding<'a> {
    pub fn new(points: &'a Matrix) -> Self {
        Self {
            points,
            min_d2: vec![f64::INFINITY; points.rows()],
            is_chosen: vec![false; points.rows()],
            chosen: Vec::new(),
        }
    }

    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    /// Squared distance of each point to its nearest chosen center
    /// (infinite before the first center).
    pub fn weights(&self) -> &[f64] {
        &self.min_d2
    }

    pub fn add_center(&mut self, idx: usize) {
        debug_assert!(!self.is_chosen[idx]);
        self.is_chosen[idx] = true;
        self.chosen.push(idx);
        let c = self.points.row(idx);
        for (i, d2) in self.min_d2.iter_mut().enumerate() {
            let d = sq_dist(self.points.row(i), c);
            if d < *d2 {
                *d2 = d;
            }
        }
        self.min_d2[idx] = 0.0;
    }

    /// Draws the next center: uniform if no center has been chosen yet or if
    /// every remaining point coincides with a center, otherwise with
    /// probability proportional to the squared distance to the nearest center.
    pub fn sample_next<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.points.rows();
        if self.chosen.is_empty() {
            return rng.random_range(0..n);
        }
        let total: f64 = self
            .min_d2
            .iter()
            .zip(&self.is_chosen)
            .filter(|(_, &c)| !c)
            .map(|(d, _)| *d)
            .sum();
        if !(total > 0.0) || !total.is_finite() {
            let remaining: Vec<usize> = (0..n).filter(|&i| !self.is_chosen[i]).collect();
            return remaining[rng.random_range(0..remaining.len())];
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = None;
        for i in 0..n {
            if self.is_chosen[i] || self.min_d2[i] <= 0.0 {
                continue;
            }
            acc += self.min_d2[i];
            last_positive = Some(i);
            if acc > target {
                return i;
            }
        }
        // Rounding left `target` at or beyond the accumulated sum.
        last_positive.expect("positive total implies a positive weight")
    }
}

/// k-means++ seeding over the rows of `points`, returning the `k` chosen row
/// indices in the order they were picked.
pub fn kmeanspp_seed(points: &Matrix, k: usize, rng_seed: u64) -> Result<Vec<usize>> {
    let mut rng = rng_from_seed(rng_seed);
    kmeanspp_seed_with_rng(points, k, &mut rng)
}

pub fn kmeanspp_seed_with_rng<R: Rng + ?Sized>(
    points: &Matrix,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    check_k(k, points.rows())?;
    let mut state = D2Seeding::new(points);
    for _ in 0..k {
        let next = state.sample_next(rng);
        state.add_center(next);
    }
    Ok(state.chosen.clone())
}
