//! Pool-based batch active learning: retrain from scratch on the labeled
//! set, score the unlabeled pool, query a batch, reveal its labels, repeat.

use std::time::Instant;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::Dataset;
use crate::diagnostics::batch_diagnostics;
use crate::embedding::{gradient_embedding, PredictionRecord};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::mlp::{predict_pool, test_accuracy, train_from_scratch, MlpConfig, MlpParams};
use crate::samplers::{
    ffkc_select, kdpp_mcmc_run, kmeanspp_seed, random_select, rng_from_seed, select_by_uncertainty,
    UncertaintyKind,
};

fn default_eta() -> f64 {
    0.3
}

fn default_gamma() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectorKind {
    /// k-means++ seeding on gradient embeddings.
    Badge,
    /// k-DPP swap chain on gradient embeddings.
    BadgeKdpp {
        #[serde(default)]
        tau: Option<usize>,
    },
    /// Furthest-first k-center traversal on penultimate features.
    Coreset,
    Confidence,
    Margin,
    Entropy,
    /// Bandit over {coreset, confidence}.
    Albl {
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Random,
}

impl SelectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            SelectorKind::Badge => "badge",
            SelectorKind::BadgeKdpp { .. } => "badge-kdpp",
            SelectorKind::Coreset => "coreset",
            SelectorKind::Confidence => "conf",
            SelectorKind::Margin => "marg",
            SelectorKind::Entropy => "entropy",
            SelectorKind::Albl { .. } => "albl",
            SelectorKind::Random => "rand",
        }
    }

    /// Parses the short names returned by [`SelectorKind::name`], with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "badge" => SelectorKind::Badge,
            "badge-kdpp" | "kdpp" => SelectorKind::BadgeKdpp { tau: None },
            "coreset" => SelectorKind::Coreset,
            "conf" | "confidence" => SelectorKind::Confidence,
            "marg" | "margin" => SelectorKind::Margin,
            "entropy" => SelectorKind::Entropy,
            "albl" => SelectorKind::Albl {
                eta: default_eta(),
                gamma: default_gamma(),
            },
            "rand" | "random" => SelectorKind::Random,
            other => return invalid(format!("unknown selector {other:?}")),
        })
    }

    fn needs_labeled_features(&self) -> bool {
        matches!(self, SelectorKind::Coreset | SelectorKind::Albl { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Labels revealed so far, `M + round * B`.
    pub labels: usize,
    pub test_accuracy: f64,
    /// Wall time of the selection made this round (zero when none was made
    /// or timing is disabled).
    pub sel_time_s: f64,
    /// Diagnostics of the batch selected this round, if any.
    pub log_gram_det: Option<f64>,
    pub mean_norm: Option<f64>,
    pub meta: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub rep: usize,
    pub seed: u64,
    pub logs: Vec<RoundLog>,
    /// Pool positions in the order they were labeled.
    pub labeled: Vec<usize>,
    /// The pool ran out before all rounds completed.
    pub truncated: bool,
}

/// Two-arm exponential-weights bandit with uniform exploration and
/// importance-weighted reward estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoArmBandit {
    eta: f64,
    gamma: f64,
    estimates: [f64; 2],
}

impl TwoArmBandit {
    pub fn new(eta: f64, gamma: f64) -> Self {
        Self {
            eta,
            gamma,
            estimates: [0.0; 2],
        }
    }

    pub fn probabilities(&self) -> [f64; 2] {
        let a = self.eta * self.estimates[0];
        let b = self.eta * self.estimates[1];
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let s = ea + eb;
        let mix = |w: f64| (1.0 - self.gamma) * w / s + self.gamma / 2.0;
        [mix(ea), mix(eb)]
    }

    /// Draws an arm; returns it with the probability it had.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let p = self.probabilities();
        let arm = if rng.random::<f64>() < p[0] { 0 } else { 1 };
        (arm, p[arm])
    }

    pub fn update(&mut self, arm: usize, reward: f64, prob: f64) {
        self.estimates[arm] += reward / prob;
    }
}

const ALBL_ARMS: [&str; 2] = ["coreset", "conf"];

struct PendingReward {
    arm: usize,
    prob: f64,
    batch: Vec<usize>,
}

/// Per-repetition selector state; only ALBL carries anything across rounds.
struct SelectorState {
    kind: SelectorKind,
    bandit: Option<TwoArmBandit>,
    pending: Option<PendingReward>,
}

impl SelectorState {
    fn new(kind: &SelectorKind) -> Self {
        let bandit = match *kind {
            SelectorKind::Albl { eta, gamma } => Some(TwoArmBandit::new(eta, gamma)),
            _ => None,
        };
        Self {
            kind: kind.clone(),
            bandit,
            pending: None,
        }
    }
}

/// Inputs available to a selector in one round.
pub struct RoundContext<'a> {
    /// Unlabeled pool positions.
    pub candidates: &'a [usize],
    /// Model outputs, aligned with `candidates`.
    pub records: &'a [PredictionRecord],
    /// Penultimate features of the labeled examples.
    pub labeled_features: &'a Matrix,
}

/// Row-stacked gradient embeddings of the records.
pub fn gradient_embedding_matrix(records: &[PredictionRecord]) -> Result<Matrix> {
    let Some(first) = records.first() else {
        return Ok(Matrix::zeros(0, 0));
    };
    let width = first.probs.len() * first.features.len();
    let mut data = Vec::with_capacity(records.len() * width);
    for r in records {
        data.extend_from_slice(gradient_embedding(r)?.as_slice());
    }
    Matrix::new(records.len(), width, data)
}

fn penultimate_matrix(records: &[PredictionRecord]) -> Result<Matrix> {
    Matrix::from_rows(
        &records
            .iter()
            .map(|r| r.features.as_slice())
            .collect::<Vec<_>>(),
    )
}

fn to_ids(ctx: &RoundContext<'_>, positions: Vec<usize>) -> Vec<usize> {
    positions.into_iter().map(|i| ctx.candidates[i]).collect()
}

fn confidence_select(
    ctx: &RoundContext<'_>,
    kind: UncertaintyKind,
    k: usize,
) -> Result<Vec<usize>> {
    let probs: Vec<Vec<f64>> = ctx.records.iter().map(|r| r.probs.clone()).collect();
    select_by_uncertainty(kind, ctx.candidates, &probs, k)
}

fn coreset_select(ctx: &RoundContext<'_>, k: usize) -> Result<Vec<usize>> {
    let pool = penultimate_matrix(ctx.records)?;
    Ok(to_ids(ctx, ffkc_select(ctx.labeled_features, &pool, k)?))
}

/// One ALBL round: draw an arm from the bandit and delegate to it. The reward
/// for the draw is supplied later through the returned pending record.
fn albl_select(
    bandit: &TwoArmBandit,
    ctx: &RoundContext<'_>,
    k: usize,
    rng_seed: u64,
) -> Result<(Vec<usize>, usize, f64)> {
    let mut rng = rng_from_seed(rng_seed);
    let (arm, prob) = bandit.choose(&mut rng);
    let ids = match arm {
        0 => coreset_select(ctx, k)?,
        _ => confidence_select(ctx, UncertaintyKind::Confidence, k)?,
    };
    Ok((ids, arm, prob))
}

fn select(
    state: &mut SelectorState,
    ctx: &RoundContext<'_>,
    k: usize,
    rng_seed: u64,
) -> Result<(Vec<usize>, String)> {
    let ids = match &state.kind {
        SelectorKind::Badge => {
            let emb = gradient_embedding_matrix(ctx.records)?;
            to_ids(ctx, kmeanspp_seed(&emb, k, rng_seed)?)
        }
        SelectorKind::BadgeKdpp { tau } => {
            let emb = gradient_embedding_matrix(ctx.records)?;
            let run = kdpp_mcmc_run(&emb, k, rng_seed, *tau)?;
            let meta = format!(
                "steps={} accepted={}{}",
                run.steps,
                run.accepted,
                if run.fell_back {
                    " fallback=kmeans++"
                } else {
                    ""
                }
            );
            return Ok((to_ids(ctx, run.indices), meta));
        }
        SelectorKind::Coreset => coreset_select(ctx, k)?,
        SelectorKind::Confidence => confidence_select(ctx, UncertaintyKind::Confidence, k)?,
        SelectorKind::Margin => confidence_select(ctx, UncertaintyKind::Margin, k)?,
        SelectorKind::Entropy => confidence_select(ctx, UncertaintyKind::Entropy, k)?,
        SelectorKind::Random => random_select(ctx.candidates, k, rng_seed)?,
        SelectorKind::Albl { .. } => {
            let bandit = state.bandit.as_ref().expect("ALBL state has a bandit");
            let (ids, arm, prob) = albl_select(bandit, ctx, k, rng_seed)?;
            state.pending = Some(PendingReward {
                arm,
                prob,
                batch: ids.clone(),
            });
            return Ok((ids, format!("arm={} p={prob:.4}", ALBL_ARMS[arm])));
        }
    };
    Ok((ids, String::new()))
}

/// Model configuration used for repetition seed `seed`.
pub fn model_config_for(config: &ExperimentConfig, dataset: &Dataset, seed: u64) -> MlpConfig {
    MlpConfig {
        input_dim: dataset.input_dim(),
        num_classes: dataset.num_classes(),
        rng_seed: config.model.rng_seed.wrapping_add(seed),
        ..config.model.clone()
    }
}

fn train_on(
    model_cfg: &MlpConfig,
    pool_x: &Matrix,
    pool_y: &[usize],
    labeled_sorted: &[usize],
) -> Result<MlpParams> {
    let x = pool_x.select_rows(labeled_sorted);
    let y: Vec<usize> = labeled_sorted.iter().map(|&i| pool_y[i]).collect();
    Ok(train_from_scratch(model_cfg, &x, &y)?.params)
}

/// Runs one repetition with seed `config.seed + rep`.
pub fn run_repetition(
    config: &ExperimentConfig,
    dataset: &Dataset,
    rep: usize,
) -> Result<RepetitionResult> {
    let pool_x = dataset.train_features();
    let pool_y = dataset.train_labels();
    let test_x = dataset.test_features();
    let test_y = dataset.test_labels();
    let n_pool = pool_y.len();
    config.validate(n_pool)?;
    if test_y.is_empty() {
        return invalid("dataset has an empty test split");
    }

    let seed = config.seed.wrapping_add(rep as u64);
    let mut rng = rng_from_seed(seed);
    let model_cfg = model_config_for(config, dataset, seed);

    let all: Vec<usize> = (0..n_pool).collect();
    let mut labeled = random_select(&all, config.initial_labels, rng.next_u64())?;
    let mut is_labeled = vec![false; n_pool];
    for &i in &labeled {
        is_labeled[i] = true;
    }

    let mut state = SelectorState::new(&config.selector);
    let mut logs = Vec::with_capacity(config.rounds + 1);
    let mut truncated = false;

    for round in 0..=config.rounds {
        let mut sorted = labeled.clone();
        sorted.sort_unstable();
        let params = train_on(&model_cfg, &pool_x, &pool_y, &sorted)?;
        let accuracy = test_accuracy(&params, &test_x, &test_y)?;

        if let (Some(bandit), Some(p)) = (state.bandit.as_mut(), state.pending.take()) {
            let bx = pool_x.select_rows(&p.batch);
            let by: Vec<usize> = p.batch.iter().map(|&i| pool_y[i]).collect();
            bandit.update(p.arm, test_accuracy(&params, &bx, &by)?, p.prob);
        }

        let mut log = RoundLog {
            round,
            labels: labeled.len(),
            test_accuracy: accuracy,
            sel_time_s: 0.0,
            log_gram_det: None,
            mean_norm: None,
            meta: String::new(),
        };
        let selection_seed = rng.next_u64();
        if round == config.rounds {
            logs.push(log);
            break;
        }
        let candidates: Vec<usize> = (0..n_pool).filter(|&i| !is_labeled[i]).collect();
        if candidates.len() < config.batch_size {
            log::warn!(
                "rep {rep}: only {} unlabeled examples left for a batch of {}; stopping",
                candidates.len(),
                config.batch_size
            );
            truncated = true;
            log.meta = "truncated".into();
            logs.push(log);
            break;
        }

        let start = Instant::now();
        let records = predict_pool(&params, &pool_x, &candidates)?;
        let labeled_features = if config.selector.needs_labeled_features() {
            let recs = predict_pool(&params, &pool_x, &sorted)?;
            penultimate_matrix(&recs)?
        } else {
            Matrix::zeros(0, 0)
        };
        let ctx = RoundContext {
            candidates: &candidates,
            records: &records,
            labeled_features: &labeled_features,
        };
        let (batch, meta) = select(&mut state, &ctx, config.batch_size, selection_seed)?;
        let elapsed = start.elapsed().as_secs_f64();

        debug_assert_eq!(batch.len(), config.batch_size);
        if config.diagnostics && !batch.is_empty() {
            let batch_records = predict_pool(&params, &pool_x, &batch)?;
            let diag = batch_diagnostics(&gradient_embedding_matrix(&batch_records)?)?;
            log.log_gram_det = Some(diag.log_gram_det);
            log.mean_norm = Some(diag.mean_norm);
        }
        log.sel_time_s = if config.timing { elapsed } else { 0.0 };
        log.meta = meta;
        logs.push(log);

        for &i in &batch {
            if is_labeled[i] {
                return invalid(format!("selector returned already-labeled example {i}"));
            }
            is_labeled[i] = true;
        }
        labeled.extend_from_slice(&batch);
    }

    Ok(RepetitionResult {
        rep,
        seed,
        logs,
        labeled,
        truncated,
    })
}

/// Runs all repetitions (in parallel) and returns them ordered by repetition.
pub fn run_experiment(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<Vec<RepetitionResult>> {
    (0..config.reps)
        .into_par_iter()
        .map(|rep| run_repetition(config, dataset, rep))
        .collect()
}

/// Test accuracy of a model trained on the entire pool with the model seed of
/// repetition `rep`.
pub fn full_supervision_accuracy(
    config: &ExperimentConfig,
    dataset: &Dataset,
    rep: usize,
) -> Result<f64> {
    let seed = config.seed.wrapping_add(rep as u64);
    let model_cfg = model_config_for(config, dataset, seed);
    let pool_x = dataset.train_features();
    let pool_y = dataset.train_labels();
    let all: Vec<usize> = (0..pool_y.len()).collect();
    let params = train_on(&model_cfg, &pool_x, &pool_y, &all)?;
    test_accuracy(&params, &dataset.test_features(), &dataset.test_labels())
}
