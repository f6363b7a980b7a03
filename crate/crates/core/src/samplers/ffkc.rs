use crate::error::{invalid, Result};
use crate::linalg::{sq_dist, Matrix};

use super::check_k;

/// Greedy furthest-first traversal for k-center: repeatedly take the pool
/// point whose distance to the nearest labeled or already-picked point is
/// largest. With no labeled points the first pick is the pool point furthest
/// from the pool centroid. Ties go to the lowest pool index.
pub fn ffkc_select(labeled: &Matrix, pool: &Matrix, k: usize) -> Result<Vec<usize>> {
    let n = pool.rows();
    check_k(k, n)?;
    if k == 0 {
        return Ok(Vec::new());
    }
    if labeled.rows() > 0 && labeled.cols() != pool.cols() {
        return invalid(format!(
            "labeled points have dimension {} but pool points have {}",
            labeled.cols(),
            pool.cols()
        ));
    }

    let mut taken = vec![false; n];
    let mut picks = Vec::with_capacity(k);
    let mut min_d2: Vec<f64> = if labeled.rows() == 0 {
        let mut centroid = vec![0.0; pool.cols()];
        for r in pool.iter_rows() {
            for (c, v) in centroid.iter_mut().zip(r) {
                *c += v;
            }
        }
        for c in &mut centroid {
            *c /= n as f64;
        }
        let first = furthest(
            &pool
                .iter_rows()
                .map(|r| sq_dist(r, &centroid))
                .collect::<Vec<_>>(),
            &taken,
        );
        taken[first] = true;
        picks.push(first);
        let c = pool.row(first);
        pool.iter_rows().map(|r| sq_dist(r, c)).collect()
    } else {
        pool.iter_rows()
            .map(|r| {
                labeled
                    .iter_rows()
                    .map(|l| sq_dist(r, l))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };

    while picks.len() < k {
        let next = furthest(&min_d2, &taken);
        taken[next] = true;
        picks.push(next);
        let c = pool.row(next);
        for (i, d2) in min_d2.iter_mut().enumerate() {
            let d = sq_dist(pool.row(i), c);
            if d < *d2 {
                *d2 = d;
            }
        }
    }
    Ok(picks)
}

fn furthest(d2: &[f64], taken: &[bool]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&d, &t)) in d2.iter().zip(taken).enumerate() {
        if t {
            continue;
        }
        match best {
            Some((_, b)) if d <= b => {}
            _ => best = Some((i, d)),
        }
    }
    best.expect("at least one untaken point").0
}
