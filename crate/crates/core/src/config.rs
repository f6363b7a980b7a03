//! Experiment configuration file (TOML).
//!
//! ```toml
//! selector = { kind = "badge" }
//! M = 100        # initial random labels
//! B = 100        # batch size
//! T = 10         # rounds
//! R = 5          # repetitions
//! seed = 0       # repetition r uses seed + r
//!
//! [dataset]
//! kind = "synthetic"   # or "csv" / "libsvm"
//! classes = 3
//! dim = 16
//! n = 10000
//! separation = 1.5
//!
//! [model]
//! hidden_dim = 128
//! learning_rate = 0.001
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::al_loop::SelectorKind;
use crate::data::{load_csv, load_libsvm, synth_gaussian_mixture, Dataset, LabelColumn, SplitSpec};
use crate::error::{invalid, Error, Result};
use crate::mlp::MlpConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Csv {
        path: PathBuf,
        #[serde(default = "default_label_column")]
        label_column: LabelColumn,
        #[serde(default = "default_true")]
        has_header: bool,
        #[serde(default)]
        split: SplitSpec,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default)]
        split: SplitSpec,
    },
    Synthetic {
        classes: usize,
        dim: usize,
        n: usize,
        separation: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        split: SplitSpec,
    },
}

fn default_label_column() -> LabelColumn {
    LabelColumn::Last
}

fn default_true() -> bool {
    true
}

impl DatasetSpec {
    /// Loads the dataset; relative paths resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<Dataset> {
        match self {
            DatasetSpec::Csv {
                path,
                label_column,
                has_header,
                split,
            } => load_csv(&base_dir.join(path), label_column, *has_header, *split),
            DatasetSpec::Libsvm { path, split } => load_libsvm(&base_dir.join(path), *split),
            DatasetSpec::Synthetic {
                classes,
                dim,
                n,
                separation,
                seed,
                split,
            } => synth_gaussian_mixture(*classes, *dim, *n, *separation, *seed, *split),
        }
    }
}

fn default_initial() -> usize {
    100
}
fn default_batch() -> usize {
    100
}
fn default_rounds() -> usize {
    10
}
fn default_reps() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub selector: SelectorKind,
    #[serde(rename = "M", default = "default_initial")]
    pub initial_labels: usize,
    #[serde(rename = "B", default = "default_batch")]
    pub batch_size: usize,
    #[serde(rename = "T", default = "default_rounds")]
    pub rounds: usize,
    #[serde(rename = "R", default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: MlpConfig,
    /// Record selection wall time; when false the column is written as 0 so
    /// result files are byte-identical across runs.
    #[serde(default = "default_true")]
    pub timing: bool,
    /// Gram log-determinant and mean norm of each selected batch.
    #[serde(default = "default_true")]
    pub diagnostics: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, selector: SelectorKind) -> Self {
        Self {
            dataset,
            selector,
            initial_labels: default_initial(),
            batch_size: default_batch(),
            rounds: default_rounds(),
            reps: default_reps(),
            seed: 0,
            model: MlpConfig::default(),
            timing: true,
            diagnostics: true,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.initial_labels == 0 || self.batch_size == 0 {
            return invalid("M and B must be at least 1");
        }
        if self.reps == 0 {
            return invalid("R must be at least 1");
        }
        if self.initial_labels > pool_size {
            return invalid(format!(
                "M = {} exceeds the pool of {pool_size}",
                self.initial_labels
            ));
        }
        if let SelectorKind::Albl { eta, gamma } = self.selector {
            if !(0.0..=1.0).contains(&gamma) || !eta.is_finite() {
                return invalid("ALBL needs finite eta and gamma in [0, 1]");
            }
        }
        Ok(())
    }

    /// `M + T * B`; larger than the pool means the run will end early.
    pub fn final_budget(&self) -> usize {
        self.initial_labels + self.rounds * self.batch_size
    }
}
