//! Metropolis swap chain for the k-DPP with linear (Gram) kernel.
//!
//! The state is a k-subset `S`; each step proposes exchanging one member of
//! `S` for one non-member, both uniform, and accepts with probability
//! `min(1, det L_{S'} / det L_S)`. The proposal is symmetric, so the chain is
//! reversible with respect to `P(S) ∝ det L_S`.

use rand::seq::index;
use rand::Rng;

use crate::error::Result;
use crate::linalg::{cholesky_log_det_in_place, dot, Matrix};

use super::{check_k, kmeanspp_seed_with_rng, rng_from_seed};

/// How many times a singular initial subset is redrawn before falling back
/// to k-means++ seeding.
pub const INIT_RETRIES: usize = 100;

/// `max(1, floor(5 k ln k))` chain steps.
pub fn default_tau(k: usize) -> usize {
    if k < 2 {
        return 1;
    }
    let kf = k as f64;
    ((5.0 * kf * kf.ln()).floor() as usize).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KdppSample {
    pub indices: Vec<usize>,
    /// Steps taken (zero when the chain had nothing to swap or fell back).
    pub steps: usize,
    pub accepted: usize,
    /// Every initial draw was singular and k-means++ seeding was used instead.
    pub fell_back: bool,
}

pub fn kdpp_mcmc_sample(
    points: &Matrix,
    k: usize,
    rng_seed: u64,
    tau: Option<usize>,
) -> Result<Vec<usize>> {
    Ok(kdpp_mcmc_run(points, k, rng_seed, tau)?.indices)
}

pub fn kdpp_mcmc_run(
    points: &Matrix,
    k: usize,
    rng_seed: u64,
    tau: Option<usize>,
) -> Result<KdppSample> {
    let n = points.rows();
    check_k(k, n)?;
    let mut rng = rng_from_seed(rng_seed);
    if k == 0 {
        return Ok(KdppSample {
            indices: Vec::new(),
            steps: 0,
            accepted: 0,
            fell_back: false,
        });
    }
    let tau = tau.unwrap_or_else(|| default_tau(k));
    let sq_norms: Vec<f64> = points.iter_rows().map(|r| dot(r, r)).collect();

    let mut gram = vec![0.0; k * k];
    let mut scratch = vec![0.0; k * k];
    let mut current = None;
    for _ in 0..=INIT_RETRIES {
        let subset = index::sample(&mut rng, n, k).into_vec();
        fill_gram(points, &sq_norms, &subset, &mut gram);
        scratch.copy_from_slice(&gram);
        if let Some(ld) = cholesky_log_det_in_place(&mut scratch, k) {
            current = Some((subset, ld));
            break;
        }
    }
    let Some((mut subset, mut log_det)) = current else {
        let indices = kmeanspp_seed_with_rng(points, k, &mut rng)?;
        return Ok(KdppSample {
            indices,
            steps: 0,
            accepted: 0,
            fell_back: true,
        });
    };
    if k == n {
        return Ok(KdppSample {
            indices: subset,
            steps: 0,
            accepted: 0,
            fell_back: false,
        });
    }

    let mut in_set = vec![false; n];
    for &i in &subset {
        in_set[i] = true;
    }
    let mut outside: Vec<usize> = (0..n).filter(|&i| !in_set[i]).collect();
    let mut row = vec![0.0; k];
    let mut accepted = 0;

    for _ in 0..tau {
        let pos = rng.random_range(0..k);
        let out_pos = rng.random_range(0..outside.len());
        let cand = outside[out_pos];
        let x = points.row(cand);
        for (b, r) in row.iter_mut().enumerate() {
            *r = if b == pos {
                sq_norms[cand]
            } else {
                dot(x, points.row(subset[b]))
            };
        }
        scratch.copy_from_slice(&gram);
        for b in 0..k {
            scratch[pos * k + b] = row[b];
            scratch[b * k + pos] = row[b];
        }
        let Some(proposed) = cholesky_log_det_in_place(&mut scratch, k) else {
            continue;
        };
        let accept = proposed >= log_det || rng.random::<f64>() < (proposed - log_det).exp();
        if accept {
            for b in 0..k {
                gram[pos * k + b] = row[b];
                gram[b * k + pos] = row[b];
            }
            outside[out_pos] = subset[pos];
            subset[pos] = cand;
            log_det = proposed;
            accepted += 1;
        }
    }

    Ok(KdppSample {
        indices: subset,
        steps: tau,
        accepted,
        fell_back: false,
    })
}

fn fill_gram(points: &Matrix, sq_norms: &[f64], subset: &[usize], gram: &mut [f64]) {
    let k = subset.len();
    for a in 0..k {
        gram[a * k + a] = sq_norms[subset[a]];
        let ra = points.row(subset[a]);
        for b in (a + 1)..k {
            let v = dot(ra, points.row(subset[b]));
            gram[a * k + b] = v;
            gram[b * k + a] = v;
        }
    }
}
