use serde::{Deserialize, Serialize};

use crate::embedding::validate_probs;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyKind {
    /// Largest class probability; smallest is most uncertain.
    Confidence,
    /// Gap between the two largest probabilities; smallest is most uncertain.
    Margin,
    /// Shannon entropy in nats; largest is most uncertain.
    Entropy,
}

pub fn uncertainty_score(kind: UncertaintyKind, p: &[f64]) -> Result<f64> {
    validate_probs(p)?;
    Ok(match kind {
        UncertaintyKind::Confidence => p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        UncertaintyKind::Margin => {
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &v in p {
                if v > first {
                    second = first;
                    first = v;
                } else if v > second {
                    second = v;
                }
            }
            if p.len() == 1 {
                first
            } else {
                first - second
            }
        }
        UncertaintyKind::Entropy => p
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * (1.0 / v).ln())
            .sum(),
    })
}

pub fn uncertainty_scores(kind: UncertaintyKind, probs: &[Vec<f64>]) -> Result<Vec<f64>> {
    probs.iter().map(|p| uncertainty_score(kind, p)).collect()
}

/// Picks the `k` most uncertain candidates. `candidate_ids[i]` is the pool
/// index of `probs[i]`; ties are broken towards the lower pool index.
pub fn select_by_uncertainty(
    kind: UncertaintyKind,
    candidate_ids: &[usize],
    probs: &[Vec<f64>],
    k: usize,
) -> Result<Vec<usize>> {
    if candidate_ids.len() != probs.len() {
        return invalid(format!(
            "{} candidates but {} probability vectors",
            candidate_ids.len(),
            probs.len()
        ));
    }
    super::check_k(k, candidate_ids.len())?;
    let scores = uncertainty_scores(kind, probs)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = match kind {
            UncertaintyKind::Entropy => scores[b].total_cmp(&scores[a]),
            _ => scores[a].total_cmp(&scores[b]),
        };
        by_score.then(candidate_ids[a].cmp(&candidate_ids[b]))
    });
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| candidate_ids[i])
        .collect())
}
