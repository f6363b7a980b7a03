//! `badge` command line: `run`, `compare`, `bench-samplers`, `diag`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::al_loop::{run_experiment, SelectorKind};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::report::{bench_samplers, compare_runs, write_diagnostics, write_learning_curves};
use crate::results::{read_run, unix_now, write_run, StoredRun};

#[derive(Debug, Parser)]
#[command(name = "badge", version, about = "Batch active learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Base seed; repetition r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the configured selector (badge, badge-kdpp, coreset, conf, marg, entropy, albl, rand).
        #[arg(long)]
        selector: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Aggregate run directories into a penalty matrix and normalized-error CDFs.
    Compare {
        /// Run directories (each with a manifest.json).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Selector used as the normalizing baseline and to derive n0.
        #[arg(long, default_value = "rand")]
        baseline: String,
    },
    /// Time k-means++ seeding against the k-DPP chain on random embeddings.
    BenchSamplers {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 192)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        k: usize,
        /// Chain length; defaults to floor(5 k ln k).
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Emit per-round batch diagnostics (log Gram determinant, mean norm) from stored runs.
    Diag {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::Config(e.render().to_string())),
    };
    execute(cli.command)
}

fn read_runs(dirs: &[PathBuf]) -> Result<Vec<StoredRun>> {
    dirs.iter().map(|d| read_run(d)).collect()
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            out_dir,
            selector,
            reps,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = selector {
                cfg.selector = SelectorKind::from_name(&s)?;
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let dataset = cfg.dataset.load(base)?;
            let out_dir = out_dir.unwrap_or_else(|| {
                PathBuf::from("results").join(format!(
                    "{}-{}-B{}",
                    dataset.name,
                    cfg.selector.name(),
                    cfg.batch_size
                ))
            });
            log::info!(
                "running {} on {} ({} pool / {} test, K={}), {} reps",
                cfg.selector.name(),
                dataset.name,
                dataset.train.len(),
                dataset.test.len(),
                dataset.num_classes(),
                cfg.reps
            );
            let started = unix_now();
            let results = run_experiment(&cfg, &dataset)?;
            write_run(
                &out_dir,
                &cfg,
                &dataset.name,
                &dataset.provenance,
                &results,
                started,
            )?;
            for r in &results {
                if let Some(last) = r.logs.last() {
                    println!(
                        "rep {} seed {}: {} labels, test accuracy {:.4}{}",
                        r.rep,
                        r.seed,
                        last.labels,
                        last.test_accuracy,
                        if r.truncated { " (truncated)" } else { "" }
                    );
                }
            }
            println!("wrote {}", out_dir.display());
        }
        Command::Compare {
            runs,
            out_dir,
            baseline,
        } => {
            let runs = read_runs(&runs)?;
            let report = compare_runs(&runs, &baseline)?;
            fs::create_dir_all(&out_dir)?;
            report
                .penalty
                .write_csv(File::create(out_dir.join("penalty_matrix.csv"))?)?;
            report
                .penalty
                .write_column_means_csv(File::create(out_dir.join("penalty_column_means.csv"))?)?;
            report
                .cdf
                .write_csv(File::create(out_dir.join("normalized_error_cdf.csv"))?)?;
            write_learning_curves(File::create(out_dir.join("learning_curves.csv"))?, &runs)?;
            let mut w = csv::Writer::from_path(out_dir.join("settings.csv"))?;
            w.write_record([
                "dataset",
                "batch_size",
                "architecture",
                "budget",
                "algorithm",
                "mean_error",
            ])?;
            for s in &report.settings {
                for (alg, errs) in &s.errors {
                    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                    w.write_record([
                        s.key.dataset.clone(),
                        s.key.batch_size.to_string(),
                        s.key.architecture.clone(),
                        s.key.budget.to_string(),
                        alg.clone(),
                        mean.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            for warn in &report.warnings {
                log::warn!("{warn}");
            }
            for s in &report.cdf.skipped {
                log::warn!("skipped {:?}: {}", s.key, s.reason);
            }
            println!(
                "{} settings over {} combinations",
                report.settings.len(),
                report.penalty.combinations
            );
            print!("{:>12}", "");
            for a in &report.algorithms {
                print!("{a:>12}");
            }
            println!();
            for (a, row) in report.algorithms.iter().zip(&report.penalty.values) {
                print!("{a:>12}");
                for v in row {
                    print!("{v:>12.3}");
                }
                println!();
            }
            println!("wrote {}", out_dir.display());
        }
        Command::BenchSamplers {
            n,
            dim,
            k,
            tau,
            seed,
            reps,
            out_dir,
        } => {
            let mut rows = Vec::new();
            for r in 0..reps.max(1) {
                let t = bench_samplers(n, dim, k, tau, seed.wrapping_add(r as u64))?;
                println!(
                    "rep {r}: n={} dim={} k={} tau={}  kmeans++ {:.4}s  k-dpp {:.4}s  ratio {:.1}x",
                    t.n,
                    t.dim,
                    t.k,
                    t.tau,
                    t.kmeanspp_s,
                    t.kdpp_s,
                    t.kdpp_s / t.kmeanspp_s
                );
                rows.push(t);
            }
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)?;
                let mut w = csv::Writer::from_path(dir.join("bench_samplers.csv"))?;
                for t in &rows {
                    w.serialize(t)?;
                }
                w.flush()?;
            }
        }
        Command::Diag { runs, out_dir } => {
            let runs = read_runs(&runs)?;
            fs::create_dir_all(&out_dir)?;
            write_diagnostics(File::create(out_dir.join("diagnostics.csv"))?, &runs)?;
            println!("wrote {}", out_dir.join("diagnostics.csv").display());
        }
    }
    Ok(())
}
