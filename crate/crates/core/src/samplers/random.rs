use rand::seq::index;

use crate::error::Result;

use super::{check_k, rng_from_seed};

/// `k` distinct candidates drawn uniformly without replacement.
pub fn random_select(candidate_ids: &[usize], k: usize, rng_seed: u64) -> Result<Vec<usize>> {
    check_k(k, candidate_ids.len())?;
    let mut rng = rng_from_seed(rng_seed);
    Ok(index::sample(&mut rng, candidate_ids.len(), k)
        .into_iter()
        .map(|i| candidate_ids[i])
        .collect())
}
