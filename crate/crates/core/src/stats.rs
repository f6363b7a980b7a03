//! Pairwise comparison of algorithms across experimental settings: paired
//! t-scores, the penalty (win) matrix, budget schedules and weighted CDFs of
//! normalized error.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};

/// Two-sided 5% critical value of Student's t with 4 degrees of freedom, as
/// used for five paired repetitions.
pub const CRITICAL_T_FIVE_REPS: f64 = 2.776;

/// Two-sided 5% critical value for `n` paired samples (`n - 1` degrees of
/// freedom). Five samples map to exactly [`CRITICAL_T_FIVE_REPS`].
pub fn critical_value(n: usize) -> Result<f64> {
    if n < 2 {
        return invalid("a paired t-test needs at least two samples");
    }
    if n == 5 {
        return Ok(CRITICAL_T_FIVE_REPS);
    }
    let dist =
        StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(dist.inverse_cdf(0.975))
}

/// Paired t-score `sqrt(n) * mean / sd` of the differences `e_i - e_j`, with
/// the sample standard deviation (divisor `n - 1`). Zero variance gives a
/// signed infinity, or zero when the mean is zero too.
pub fn t_score(errors_i: &[f64], errors_j: &[f64]) -> Result<f64> {
    if errors_i.len() != errors_j.len() {
        return invalid(format!(
            "paired samples differ in length ({} vs {})",
            errors_i.len(),
            errors_j.len()
        ));
    }
    let n = errors_i.len();
    if n < 2 {
        return invalid("a paired t-test needs at least two samples");
    }
    let diffs: Vec<f64> = errors_i.iter().zip(errors_j).map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(mean)
        });
    }
    Ok((n as f64).sqrt() * mean / sd)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    FirstBeats,
    SecondBeats,
    Tie,
}

/// Lower error wins: `i` beats `j` when `t(e_i - e_j) < -critical`. A score
/// exactly at the critical value is a tie.
pub fn beats_with_critical(
    errors_i: &[f64],
    errors_j: &[f64],
    critical: f64,
) -> Result<Comparison> {
    let t = t_score(errors_i, errors_j)?;
    Ok(if t < -critical {
        Comparison::FirstBeats
    } else if t > critical {
        Comparison::SecondBeats
    } else {
        Comparison::Tie
    })
}

pub fn beats(errors_i: &[f64], errors_j: &[f64]) -> Result<Comparison> {
    beats_with_critical(errors_i, errors_j, critical_value(errors_i.len())?)
}

/// Budgets `M + 2^(m-1) B` for `m = 1..=floor(log2((n0 - M) / B))`.
pub fn budget_schedule(initial: usize, batch: usize, n0: usize) -> Result<Vec<usize>> {
    if batch == 0 {
        return invalid("batch size must be positive");
    }
    if n0 <= initial {
        return invalid(format!(
            "n0 ({n0}) must exceed the initial label count ({initial})"
        ));
    }
    let span = n0 - initial;
    // Largest m with 2^m * B <= n0 - M, i.e. floor(log2(span / B)) without rounding.
    let mut m_max = 0u32;
    while (batch as u128) << (m_max + 1) <= span as u128 {
        m_max += 1;
    }
    Ok((1..=m_max)
        .map(|m| initial + (1usize << (m - 1)) * batch)
        .collect())
}

/// Smallest logged budget whose mean accuracy reaches 99% of the accuracy
/// at the largest budget.
pub fn compute_n0(curve: &[(usize, f64)]) -> Result<usize> {
    let mut sorted = curve.to_vec();
    sorted.sort_by_key(|&(b, _)| b);
    let Some(&(_, final_acc)) = sorted.last() else {
        return invalid("empty learning curve");
    };
    let target = 0.99 * final_acc;
    Ok(sorted
        .iter()
        .find(|&&(_, acc)| acc >= target)
        .map(|&(b, _)| b)
        .expect("the final budget always qualifies"))
}

/// One (dataset, batch size, architecture) combination.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Combination {
    pub dataset: String,
    pub batch_size: usize,
    pub architecture: String,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SettingKey {
    pub dataset: String,
    pub batch_size: usize,
    pub architecture: String,
    pub budget: usize,
}

impl SettingKey {
    pub fn combination(&self) -> Combination {
        Combination {
            dataset: self.dataset.clone(),
            batch_size: self.batch_size,
            architecture: self.architecture.clone(),
        }
    }
}

/// Test errors of every algorithm at one setting, one entry per repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub key: SettingKey,
    pub errors: BTreeMap<String, Vec<f64>>,
}

fn budgets_per_combination(results: &[SettingResult]) -> BTreeMap<Combination, usize> {
    let mut budgets: BTreeMap<Combination, BTreeSet<usize>> = BTreeMap::new();
    for r in results {
        budgets
            .entry(r.key.combination())
            .or_default()
            .insert(r.key.budget);
    }
    budgets.into_iter().map(|(c, b)| (c, b.len())).collect()
}

/// `values[i][j]` is the weight of settings in which algorithm `i` beat `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyMatrix {
    pub algorithms: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Number of (dataset, batch, architecture) combinations aggregated; an
    /// upper bound on every entry.
    pub combinations: usize,
}

impl PenaltyMatrix {
    pub fn get(&self, winner: &str, loser: &str) -> Option<f64> {
        let i = self.algorithms.iter().position(|a| a == winner)?;
        let j = self.algorithms.iter().position(|a| a == loser)?;
        Some(self.values[i][j])
    }

    /// Mean of each column (how often the column algorithm lost); lower is better.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.algorithms.len();
        (0..n)
            .map(|j| self.values.iter().map(|row| row[j]).sum::<f64>() / n as f64)
            .collect()
    }

    /// Square CSV: a header row of algorithm names, then one row per winner.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["algorithm".to_string()];
        header.extend(self.algorithms.iter().cloned());
        out.write_record(&header)?;
        for (name, row) in self.algorithms.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `algorithm,column_mean`; lower means the algorithm was beaten less often.
    pub fn write_column_means_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["algorithm", "column_mean"])?;
        for (name, m) in self.algorithms.iter().zip(self.column_means()) {
            out.write_record([name.clone(), m.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Accumulates `1 / n_{D,B,A}` into `P[winner][loser]` for every significant
/// pairwise win, where `n_{D,B,A}` is the number of budgets of that combination.
pub fn penalty_matrix(algorithms: &[String], results: &[SettingResult]) -> Result<PenaltyMatrix> {
    let n = algorithms.len();
    let per_combo = budgets_per_combination(results);
    let mut values = vec![vec![0.0; n]; n];
    for r in results {
        let weight = 1.0 / per_combo[&r.key.combination()] as f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let (Some(ei), Some(ej)) =
                    (r.errors.get(&algorithms[i]), r.errors.get(&algorithms[j]))
                else {
                    continue;
                };
                match beats(ei, ej)? {
                    Comparison::FirstBeats => values[i][j] += weight,
                    Comparison::SecondBeats => values[j][i] += weight,
                    Comparison::Tie => {}
                }
            }
        }
    }
    Ok(PenaltyMatrix {
        algorithms: algorithms.to_vec(),
        values,
        combinations: per_combo.len(),
    })
}

/// Weighted empirical CDF of normalized error for one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCdf {
    pub algorithm: String,
    /// Distinct normalized-error values with the cumulative weight at each.
    pub steps: Vec<(f64, f64)>,
}

impl ErrorCdf {
    /// Total weight of settings with normalized error `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|(v, _)| *v <= x)
            .last()
            .map_or(0.0, |&(_, c)| c)
    }

    pub fn total_weight(&self) -> f64 {
        self.steps.last().map_or(0.0, |&(_, c)| c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedSetting {
    pub key: SettingKey,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfReport {
    pub cdfs: Vec<ErrorCdf>,
    pub skipped: Vec<SkippedSetting>,
}

impl CdfReport {
    /// Long-format CSV: `algorithm,normalized_error,cumulative_weight`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["algorithm", "normalized_error", "cumulative_weight"])?;
        for cdf in &self.cdfs {
            for (x, c) in &cdf.steps {
                out.write_record([cdf.algorithm.clone(), x.to_string(), c.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Normalized error `mean_err_i / mean_err_baseline` per setting, weighted by
/// `1 / n_{D,B,A}` so that each combination carries the same total weight.
/// Settings where the baseline is missing or has zero error are skipped and
/// reported.
pub fn normalized_error_cdf(
    algorithms: &[String],
    results: &[SettingResult],
    baseline: &str,
) -> Result<CdfReport> {
    let per_combo = budgets_per_combination(results);
    let mut points: BTreeMap<&str, Vec<(f64, f64)>> = algorithms
        .iter()
        .map(|a| (a.as_str(), Vec::new()))
        .collect();
    let mut skipped = Vec::new();
    for r in results {
        let Some(base) = r.errors.get(baseline).filter(|e| !e.is_empty()) else {
            skipped.push(SkippedSetting {
                key: r.key.clone(),
                reason: format!("baseline {baseline} missing"),
            });
            continue;
        };
        let base_err = mean(base);
        if base_err == 0.0 {
            log::warn!("skipping {:?}: baseline error is zero", r.key);
            skipped.push(SkippedSetting {
                key: r.key.clone(),
                reason: "baseline error is zero".into(),
            });
            continue;
        }
        let weight = 1.0 / per_combo[&r.key.combination()] as f64;
        for a in algorithms {
            if let Some(e) = r.errors.get(a).filter(|e| !e.is_empty()) {
                let ner = if a == baseline {
                    1.0
                } else {
                    mean(e) / base_err
                };
                points
                    .get_mut(a.as_str())
                    .expect("known algorithm")
                    .push((ner, weight));
            }
        }
    }
    let cdfs = algorithms
        .iter()
        .map(|a| {
            let mut pts = points.remove(a.as_str()).unwrap_or_default();
            pts.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut steps: Vec<(f64, f64)> = Vec::new();
            let mut cum = 0.0;
            for (x, w) in pts {
                cum += w;
                match steps.last_mut() {
                    Some(last) if last.0 == x => last.1 = cum,
                    _ => steps.push((x, cum)),
                }
            }
            ErrorCdf {
                algorithm: a.clone(),
                steps,
            }
        })
        .collect();
    Ok(CdfReport { cdfs, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn t_score_by_hand() {
        let ei = [0.1, 0.1, 0.1, 0.1, 0.1];
        let ej = [0.2, 0.3, 0.2, 0.3, 0.2];
        let t = t_score(&ei, &ej).unwrap();
        // mean -0.14, sd sqrt(0.003)
        let expect = 5f64.sqrt() * -0.14 / 0.003f64.sqrt();
        assert!((t - expect).abs() < 1e-9);
        assert!((t + 5.7155).abs() < 1e-3);
        assert_eq!(beats(&ei, &ej).unwrap(), Comparison::FirstBeats);
        assert_eq!(beats(&ej, &ei).unwrap(), Comparison::SecondBeats);
    }

    #[test]
    fn zero_variance_rules() {
        let a = [0.5, 0.75, 1.0];
        assert_eq!(t_score(&a, &a).unwrap(), 0.0);
        let b = [0.25, 0.5, 0.75];
        assert_eq!(t_score(&b, &a).unwrap(), f64::NEG_INFINITY);
        assert_eq!(t_score(&a, &b).unwrap(), f64::INFINITY);
        assert_eq!(beats(&b, &a).unwrap(), Comparison::FirstBeats);
        assert!(t_score(&a, &b[..2]).is_err());
    }

    #[test]
    fn small_t_is_tie() {
        let a = [0.30, 0.31, 0.29, 0.30, 0.32];
        let b = [0.31, 0.30, 0.30, 0.29, 0.31];
        assert!(t_score(&a, &b).unwrap().abs() <= CRITICAL_T_FIVE_REPS);
        assert_eq!(beats(&a, &b).unwrap(), Comparison::Tie);
    }

    #[test]
    fn critical_values() {
        assert_eq!(critical_value(5).unwrap(), 2.776);
        // df = 9 -> 2.262
        assert!((critical_value(10).unwrap() - 2.262).abs() < 1e-3);
        assert!(critical_value(1).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(
            budget_schedule(100, 100, 1000).unwrap(),
            vec![200, 300, 500]
        );
        assert_eq!(budget_schedule(100, 100, 300).unwrap(), vec![200]);
        assert!(budget_schedule(100, 100, 150).unwrap().is_empty());
        assert!(budget_schedule(100, 100, 100).is_err());
    }

    #[test]
    fn n0_definition() {
        let curve: Vec<(usize, f64)> = [
            (100, 0.5),
            (300, 0.7),
            (500, 0.78),
            (700, 0.795),
            (900, 0.8),
            (1100, 0.8),
        ]
        .into_iter()
        .collect();
        // 0.99 * 0.8 = 0.792; first budget reaching it is 700.
        assert_eq!(compute_n0(&curve).unwrap(), 700);
        assert_eq!(compute_n0(&[(100, 0.6), (200, 0.6)]).unwrap(), 100);
        assert_eq!(compute_n0(&[(100, 0.0), (200, 0.0)]).unwrap(), 100);
        assert!(compute_n0(&[]).is_err());
    }

    fn setting(budget: usize, errs: &[(&str, [f64; 5])]) -> SettingResult {
        SettingResult {
            key: SettingKey {
                dataset: "d".into(),
                batch_size: 100,
                architecture: "mlp".into(),
                budget,
            },
            errors: errs
                .iter()
                .map(|(a, e)| (a.to_string(), e.to_vec()))
                .collect(),
        }
    }

    #[test]
    fn penalty_bookkeeping() {
        let algs = vec!["badge".to_string(), "rand".to_string()];
        let good = [0.1, 0.1, 0.1, 0.1, 0.1];
        let bad = [0.2, 0.3, 0.2, 0.3, 0.2];
        let one =
            penalty_matrix(&algs, &[setting(200, &[("badge", good), ("rand", bad)])]).unwrap();
        assert_eq!(one.values, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        let two = penalty_matrix(
            &algs,
            &[
                setting(200, &[("badge", good), ("rand", bad)]),
                setting(300, &[("badge", good), ("rand", bad)]),
            ],
        )
        .unwrap();
        assert_eq!(two.get("badge", "rand"), Some(1.0));
        assert_eq!(two.get("rand", "badge"), Some(0.0));
        assert_eq!(two.combinations, 1);
    }

    #[test]
    fn cdf_baseline_is_step_at_one() {
        let algs = vec!["badge".to_string(), "rand".to_string()];
        let results = vec![
            setting(200, &[("badge", [0.1; 5]), ("rand", [0.2; 5])]),
            setting(300, &[("badge", [0.1; 5]), ("rand", [0.1; 5])]),
            setting(500, &[("badge", [0.0; 5]), ("rand", [0.0; 5])]),
        ];
        let rep = normalized_error_cdf(&algs, &results, "rand").unwrap();
        assert_eq!(rep.skipped.len(), 1);
        let rand = &rep.cdfs[1];
        assert_eq!(rand.eval(0.999), 0.0);
        assert!((rand.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
        let badge = &rep.cdfs[0];
        assert!((badge.eval(0.5) - 1.0 / 3.0).abs() < 1e-15);
        assert!((badge.eval(1.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn t_is_antisymmetric(a in prop::collection::vec(0.0f64..1.0, 5), b in prop::collection::vec(0.0f64..1.0, 5)) {
            let t1 = t_score(&a, &b).unwrap();
            let t2 = t_score(&b, &a).unwrap();
            prop_assert_eq!(t1, -t2);
        }

        #[test]
        fn schedule_increasing_and_bounded(m in 1usize..500, b in 1usize..300, extra in 1usize..20_000) {
            let n0 = m + extra;
            let s = budget_schedule(m, b, n0).unwrap();
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.iter().all(|&l| l <= n0));
            let q = extra as f64 / b as f64;
            let expect = if q >= 1.0 { q.log2().floor() as usize } else { 0 };
            // Float log2 can misround exactly at powers of two; the integer count is exact.
            prop_assert!(s.len() == expect || (q.log2() - q.log2().round()).abs() < 1e-9);
        }

        #[test]
        fn cdf_monotone(errs in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..12)) {
            let algs = vec!["a".to_string(), "rand".to_string()];
            let results: Vec<SettingResult> = errs.iter().enumerate().map(|(i, (ea, er))| SettingResult {
                key: SettingKey { dataset: format!("d{}", i % 3), batch_size: 10, architecture: "mlp".into(), budget: i },
                errors: [("a".to_string(), vec![*ea; 5]), ("rand".to_string(), vec![*er; 5])].into_iter().collect(),
            }).collect();
            let rep = normalized_error_cdf(&algs, &results, "rand").unwrap();
            for cdf in &rep.cdfs {
                prop_assert!(cdf.steps.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
                let combos = results.iter().map(|r| r.key.dataset.clone()).collect::<BTreeSet<_>>().len();
                prop_assert!((cdf.total_weight() - combos as f64).abs() < 1e-9);
            }
            let pm = penalty_matrix(&algs, &results).unwrap();
            for i in 0..2 {
                prop_assert_eq!(pm.values[i][i], 0.0);
                for j in 0..2 {
                    prop_assert!(pm.values[i][j] >= 0.0 && pm.values[i][j] <= pm.combinations as f64 + 1e-9);
                }
            }
        }
    }
}
