//! Batch selection strategies.
//!
//! Every selector returns exactly the requested number of distinct indices.
//! Randomized selectors are deterministic functions of their seed; ties in
//! scores and distances always go to the lowest index.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

mod ffkc;
mod kdpp;
mod kmeanspp;
mod random;
mod uncertainty;

pub use ffkc::ffkc_select;
pub use kdpp::{default_tau, kdpp_mcmc_run, kdpp_mcmc_sample, KdppSample, INIT_RETRIES};
pub use kmeanspp::{kmeanspp_seed, kmeanspp_seed_with_rng, D2Seeding};
pub use random::random_select;
pub use uncertainty::{
    select_by_uncertainty, uncertainty_score, uncertainty_scores, UncertaintyKind,
};

/// Deterministic RNG stream used by every sampler.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which unlabeled examples may be picked, how many, and the seed to use.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRequest {
    pub candidate_ids: Vec<usize>,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl SelectionRequest {
    pub fn new(candidate_ids: Vec<usize>, batch_size: usize, rng_seed: u64) -> Result<Self> {
        let req = Self {
            candidate_ids,
            batch_size,
            rng_seed,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size > self.candidate_ids.len() {
            return invalid(format!(
                "batch size {} exceeds the {} candidates",
                self.batch_size,
                self.candidate_ids.len()
            ));
        }
        let mut seen = HashSet::with_capacity(self.candidate_ids.len());
        for &id in &self.candidate_ids {
            if !seen.insert(id) {
                return invalid(format!("candidate id {id} appears twice"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected_ids: Vec<usize>,
    pub wall_time_seconds: f64,
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k > n {
        return invalid(format!("cannot select {k} of {n} points"));
    }
    Ok(())
}
