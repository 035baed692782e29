use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dkse::config::{DataSource, RunConfig};
use dkse::fsutil::{write_atomic, DirLock};
use dkse::ingest::PreparedDataset;
use dkse::metrics::DEFAULT_K_GRID;
use dkse::pipeline::{self, SweepAxis, DEFAULT_MAX_ROUTES};
use dkse::synth::SyntheticSpec;
use dkse::Execution;

#[derive(Parser)]
#[command(name = "dkse", version, about = "Knowledge-graph recommender: prepare data, train, evaluate, ablate, sweep")]
struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Config file (`DKSE-CONFIG v1`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter preset: lfm-1b, movielens-1m or amazon-book.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the epoch limit.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter, split and sample negatives; writes the split cache.
    Prepare {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model and write the best checkpoint, epoch log and reports.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Split cache or `prepare` output directory; prepared into OUT/data when omitted.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        k_grid: Option<Vec<usize>>,
    },
    /// Score a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        k_grid: Option<Vec<usize>>,
    },
    /// Train the full model, four grouping modes and five component ablations.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid over depth × fan-out (user or item side) or the query count.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// fanout (user side), depth (item side) or queries.
        #[arg(long)]
        axis: String,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip cells whose per-side route count exceeds this.
        #[arg(long, default_value_t = DEFAULT_MAX_ROUTES)]
        max_routes: usize,
    },
    /// Write planted-structure synthetic TSVs.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(run: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &run.preset {
        cfg.apply_preset(name)?;
    }
    if let Some(seed) = run.seed {
        cfg.hyper.seed = seed;
    }
    if let Some(epochs) = run.epochs {
        cfg.hyper.epochs = epochs;
    }
    cfg.hyper.validate()?;
    Ok(cfg)
}

fn load_dataset(path: &Path) -> Result<(PathBuf, PreparedDataset)> {
    let path = pipeline::dataset_path(path);
    let ds = PreparedDataset::load(&path).with_context(|| format!("loading split {}", path.display()))?;
    Ok((path, ds))
}

fn k_grid(k: Option<Vec<usize>>) -> Result<Vec<usize>> {
    let k = k.unwrap_or_else(|| DEFAULT_K_GRID.to_vec());
    if k.is_empty() || k.contains(&0) {
        bail!("--k-grid needs positive values");
    }
    Ok(k)
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Prepare { run, out } => {
            let cfg = load_config(&run)?;
            let ds = pipeline::prepare(&cfg, &out)?;
            println!("{}", ds.stats());
            println!("split written to {}", out.join(pipeline::DATASET_FILE).display());
        }
        Command::Train {
            run,
            split,
            out,
            k_grid: k,
        } => {
            let cfg = load_config(&run)?;
            let k = k_grid(k)?;
            let split = match split {
                Some(p) => pipeline::dataset_path(&p),
                None => {
                    let data = out.join("data");
                    pipeline::prepare(&cfg, &data)?;
                    data.join(pipeline::DATASET_FILE)
                }
            };
            let summary = pipeline::train(&split, &cfg.hyper, &out, &k, exec)?;
            for r in &summary.outcome.history {
                println!("{}", r.log_line());
            }
            print!("{}", summary.test.to_kv());
            println!("checkpoint written to {}", out.join(pipeline::CHECKPOINT_FILE).display());
        }
        Command::Evaluate {
            checkpoint,
            split,
            out,
            k_grid: k,
        } => {
            let k = k_grid(k)?;
            let split = pipeline::dataset_path(&split);
            let report = pipeline::evaluate(&checkpoint, &split, &k, &out, exec)?;
            print!("{}", report.to_kv());
        }
        Command::Ablate { run, split, out } => {
            let cfg = load_config(&run)?;
            let (_, ds) = load_dataset(&split)?;
            let _lock = DirLock::acquire(&out)?;
            let rows = pipeline::ablate(&ds, &cfg.hyper, exec)?;
            let csv = pipeline::ablation_csv(&rows);
            write_atomic(&out.join("ablation.csv"), csv.as_bytes())?;
            print!("{csv}");
        }
        Command::Sweep {
            run,
            axis,
            split,
            out,
            max_routes,
        } => {
            let cfg = load_config(&run)?;
            let axis: SweepAxis = axis.parse()?;
            let (_, ds) = load_dataset(&split)?;
            let _lock = DirLock::acquire(&out)?;
            let cells = pipeline::sweep(&ds, &cfg.hyper, axis, max_routes, exec)?;
            let csv = pipeline::sweep_csv(axis, &cells);
            write_atomic(&out.join(format!("sweep_{}.csv", axis.name())), csv.as_bytes())?;
            print!("{csv}");
        }
        Command::Synth { config, seed, out } => {
            let mut spec = match config {
                Some(p) => match RunConfig::load(&p)?.data {
                    DataSource::Synthetic(s) => s,
                    DataSource::Files { .. } => bail!("{} does not describe a synthetic dataset", p.display()),
                },
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let files = pipeline::synth(&spec, &out)?;
            println!("{}", files.interactions.display());
            println!("{}", files.kg.display());
            println!("{}", files.alignment.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("dkse: {msg}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
