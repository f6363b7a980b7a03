//! Aggregation of stored runs into comparison tables and plot data.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::results::StoredRun;
use crate::samplers::{default_tau, kdpp_mcmc_run, kmeanspp_seed, rng_from_seed};
use crate::stats::{
    budget_schedule, compute_n0, normalized_error_cdf, penalty_matrix, CdfReport, Combination,
    PenaltyMatrix, SettingKey, SettingResult,
};

/// Mean and standard error of test accuracy at one label count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub labels: usize,
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Accuracy per label count across repetitions.
pub fn accuracy_by_budget(reps: &[Vec<crate::al_loop::RoundLog>]) -> BTreeMap<usize, Vec<f64>> {
    let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rep in reps {
        for l in rep {
            by.entry(l.labels).or_default().push(l.test_accuracy);
        }
    }
    by
}

pub fn learning_curve(reps: &[Vec<crate::al_loop::RoundLog>]) -> Vec<CurvePoint> {
    accuracy_by_budget(reps)
        .into_iter()
        .map(|(labels, accs)| {
            let (mean, std_err) = mean_and_se(&accs);
            CurvePoint {
                labels,
                mean,
                std_err,
                n: accs.len(),
            }
        })
        .collect()
}

fn combination_of(run: &StoredRun) -> Combination {
    Combination {
        dataset: run.manifest.dataset.clone(),
        batch_size: run.manifest.config.batch_size,
        architecture: run.manifest.architecture.clone(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub algorithms: Vec<String>,
    pub settings: Vec<SettingResult>,
    pub penalty: PenaltyMatrix,
    pub cdf: CdfReport,
    /// Per-combination notes (missing baseline, empty schedule, ...).
    pub warnings: Vec<String>,
}

/// Builds settings from the runs: within each (dataset, batch, architecture)
/// combination, budgets come from the schedule up to the baseline's `n0`, and
/// each algorithm contributes one test error per repetition.
pub fn compare_runs(runs: &[StoredRun], baseline: &str) -> Result<ComparisonReport> {
    let mut groups: BTreeMap<Combination, BTreeMap<String, &StoredRun>> = BTreeMap::new();
    for run in runs {
        let algs = groups.entry(combination_of(run)).or_default();
        let name = run.manifest.selector.clone();
        if algs.insert(name.clone(), run).is_some() {
            return invalid(format!(
                "two runs of {name} for the same dataset/batch/architecture"
            ));
        }
    }
    let algorithms: Vec<String> = runs
        .iter()
        .map(|r| r.manifest.selector.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut settings = Vec::new();
    let mut warnings = Vec::new();
    for (combo, algs) in &groups {
        let curves: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = algs
            .iter()
            .map(|(name, run)| (name.as_str(), accuracy_by_budget(&run.reps)))
            .collect();
        let initial = algs
            .values()
            .next()
            .expect("non-empty group")
            .manifest
            .config
            .initial_labels;
        let n0 = match curves.get(baseline) {
            Some(c) => {
                let pts: Vec<(usize, f64)> =
                    c.iter().map(|(&b, a)| (b, mean_and_se(a).0)).collect();
                compute_n0(&pts)?
            }
            None => {
                warnings.push(format!(
                    "{combo:?}: baseline {baseline} missing; using the largest shared budget as n0"
                ));
                curves
                    .values()
                    .filter_map(|c| c.keys().last().copied())
                    .min()
                    .unwrap_or(initial)
            }
        };
        let schedule = if n0 > initial {
            budget_schedule(initial, combo.batch_size, n0)?
        } else {
            Vec::new()
        };
        if schedule.is_empty() {
            warnings.push(format!(
                "{combo:?}: n0 = {n0} leaves an empty budget schedule"
            ));
        }
        for budget in schedule {
            let errors: BTreeMap<String, Vec<f64>> = curves
                .iter()
                .filter_map(|(name, c)| {
                    c.get(&budget)
                        .map(|accs| (name.to_string(), accs.iter().map(|a| 1.0 - a).collect()))
                })
                .collect();
            let lens: BTreeSet<usize> = errors.values().map(Vec::len).collect();
            if lens.len() > 1 {
                return invalid(format!(
                    "{combo:?} at {budget} labels: algorithms have different repetition counts"
                ));
            }
            if errors.len() < curves.len() {
                warnings.push(format!(
                    "{combo:?}: budget {budget} not logged by every algorithm"
                ));
            }
            settings.push(SettingResult {
                key: SettingKey {
                    dataset: combo.dataset.clone(),
                    batch_size: combo.batch_size,
                    architecture: combo.architecture.clone(),
                    budget,
                },
                errors,
            });
        }
    }
    let penalty = penalty_matrix(&algorithms, &settings)?;
    let cdf = normalized_error_cdf(&algorithms, &settings, baseline)?;
    Ok(ComparisonReport {
        algorithms,
        settings,
        penalty,
        cdf,
        warnings,
    })
}

/// Long-format learning curves: `dataset,batch_size,architecture,algorithm,labels,mean_accuracy,std_err,reps`.
pub fn write_learning_curves<W: Write>(w: W, runs: &[StoredRun]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dataset",
        "batch_size",
        "architecture",
        "algorithm",
        "labels",
        "mean_accuracy",
        "std_err",
        "reps",
    ])?;
    for run in runs {
        for p in learning_curve(&run.reps) {
            out.write_record([
                run.manifest.dataset.clone(),
                run.manifest.config.batch_size.to_string(),
                run.manifest.architecture.clone(),
                run.manifest.selector.clone(),
                p.labels.to_string(),
                p.mean.to_string(),
                p.std_err.to_string(),
                p.n.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Batch diagnostics of one round aggregated over repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsPoint {
    pub round: usize,
    pub labels: usize,
    /// Mean over repetitions; `-inf` if any repetition's batch was singular.
    pub mean_log_gram_det: f64,
    /// Mean over the repetitions with a non-singular batch (NaN if none).
    pub finite_mean_log_gram_det: f64,
    pub singular_reps: usize,
    pub mean_norm: f64,
    pub mean_norm_std_err: f64,
}

pub fn diagnostics_series(reps: &[Vec<crate::al_loop::RoundLog>]) -> Vec<DiagnosticsPoint> {
    let mut by_round: BTreeMap<usize, (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for rep in reps {
        for l in rep {
            let (Some(ld), Some(norm)) = (l.log_gram_det, l.mean_norm) else {
                continue;
            };
            let e = by_round
                .entry(l.round)
                .or_insert((l.labels, Vec::new(), Vec::new()));
            e.1.push(ld);
            e.2.push(norm);
        }
    }
    by_round
        .into_iter()
        .map(|(round, (labels, lds, norms))| {
            let finite: Vec<f64> = lds.iter().copied().filter(|v| v.is_finite()).collect();
            let (mean_norm, mean_norm_std_err) = mean_and_se(&norms);
            DiagnosticsPoint {
                round,
                labels,
                mean_log_gram_det: lds.iter().sum::<f64>() / lds.len() as f64,
                finite_mean_log_gram_det: if finite.is_empty() {
                    f64::NAN
                } else {
                    finite.iter().sum::<f64>() / finite.len() as f64
                },
                singular_reps: lds.len() - finite.len(),
                mean_norm,
                mean_norm_std_err,
            }
        })
        .collect()
}

pub fn write_diagnostics<W: Write>(w: W, runs: &[StoredRun]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dataset",
        "batch_size",
        "algorithm",
        "round",
        "labels",
        "mean_log_gram_det",
        "finite_mean_log_gram_det",
        "singular_reps",
        "mean_norm",
        "mean_norm_std_err",
    ])?;
    for run in runs {
        for p in diagnostics_series(&run.reps) {
            out.write_record([
                run.manifest.dataset.clone(),
                run.manifest.config.batch_size.to_string(),
                run.manifest.selector.clone(),
                p.round.to_string(),
                p.labels.to_string(),
                p.mean_log_gram_det.to_string(),
                p.finite_mean_log_gram_det.to_string(),
                p.singular_reps.to_string(),
                p.mean_norm.to_string(),
                p.mean_norm_std_err.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerTiming {
    pub n: usize,
    pub dim: usize,
    pub k: usize,
    pub tau: usize,
    pub kmeanspp_s: f64,
    pub kdpp_s: f64,
}

/// Wall time of k-means++ seeding and of the k-DPP swap chain on the same
/// random Gaussian point cloud.
pub fn bench_samplers(
    n: usize,
    dim: usize,
    k: usize,
    tau: Option<usize>,
    seed: u64,
) -> Result<SamplerTiming> {
    let mut rng = rng_from_seed(seed);
    let data: Vec<f64> = (0..n * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let points = Matrix::new(n, dim, data)?;
    let tau = tau.unwrap_or_else(|| default_tau(k));

    let start = Instant::now();
    let picked = kmeanspp_seed(&points, k, seed)?;
    let kmeanspp_s = start.elapsed().as_secs_f64();
    debug_assert_eq!(picked.len(), k);

    let start = Instant::now();
    let run = kdpp_mcmc_run(&points, k, seed, Some(tau))?;
    let kdpp_s = start.elapsed().as_secs_f64();
    debug_assert_eq!(run.indices.len(), k);

    Ok(SamplerTiming {
        n,
        dim,
        k,
        tau,
        kmeanspp_s,
        kdpp_s,
    })
}
