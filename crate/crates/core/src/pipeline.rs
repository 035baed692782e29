//! End-to-end commands: prepare, train, evaluate, ablate, sweep, synth.
//!
//! Every command that writes takes an exclusive lock on its output
//! directory and writes files atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, IngestOptions, RunConfig};
use crate::error::{Error, Result};
use crate::eval::evaluate_pairs;
use crate::exec::Execution;
use crate::fsutil::{write_atomic, DirLock};
use crate::graph::route_count;
use crate::ingest::{
    compact, intern_pairs, k_core_filter, load_alignment, load_interactions, load_kg, split, to_implicit,
    DatasetSplit, IdMap, NegativeSampler, PreparedDataset,
};
use crate::metrics::{MetricsReport, DEFAULT_K_GRID};
use crate::model::{AblationMask, GroupingMode};
use crate::rng;
use crate::synth::{self, SyntheticFiles};
use crate::train::{fit, FitOutcome, HyperParams};

pub const DATASET_FILE: &str = "dataset.split";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train.log";
pub const VALID_REPORT_FILE: &str = "valid_report.txt";
pub const TEST_REPORT_FILE: &str = "test_report.txt";
pub const TOPK_CSV_FILE: &str = "topk.csv";
pub const STATS_FILE: &str = "stats.txt";
pub const CONFIG_FILE: &str = "run.config";

/// Sweep cells whose per-side route count exceeds this are skipped.
pub const DEFAULT_MAX_ROUTES: usize = 5000;

/// Runs ingestion on already-resolved files.
pub fn ingest_files(
    interactions: &Path,
    kg: Option<&Path>,
    alignment: Option<&Path>,
    options: &IngestOptions,
    seed: u64,
    tag: &str,
) -> Result<PreparedDataset> {
    let records = load_interactions(interactions)?;
    let implicit = to_implicit(&records, options.policy)?;
    let (dense, users, items) = intern_pairs(&implicit);
    let (dense, users, items) = if options.k_core > 1 {
        let kept = k_core_filter(&dense, options.k_core);
        log::info!(
            "{}-core filter kept {} of {} interactions",
            options.k_core,
            kept.len(),
            dense.len()
        );
        compact(&kept, &users, &items)
    } else {
        (dense, users, items)
    };
    if dense.is_empty() {
        return Err(Error::Dataset(format!(
            "no interactions left after the {}-core filter",
            options.k_core
        )));
    }

    let mut entities = IdMap::new();
    let mut relations = IdMap::new();
    let triples = match kg {
        Some(p) => load_kg(p, &mut entities, &mut relations)?,
        None => Vec::new(),
    };
    let alignment = match alignment {
        Some(p) => load_alignment(p, &items, &mut entities)?,
        None => Default::default(),
    };

    let (mut train, mut valid, mut test) = split(&dense, options.ratios, seed)?;
    let all: Vec<_> = train.iter().chain(&valid).chain(&test).copied().collect();
    let mut sampler = NegativeSampler::new(&all, items.len());
    for (k, (part, ratio)) in [
        (&mut train, options.train_negatives),
        (&mut valid, options.eval_negatives),
        (&mut test, options.eval_negatives),
    ]
    .into_iter()
    .enumerate()
    {
        let mut r = rng::rng_from(seed, &[rng::stream::NEGATIVES, k as u64]);
        let negatives = sampler.sample(part, ratio, &mut r);
        part.extend(negatives);
    }

    Ok(PreparedDataset {
        tag: tag.to_string(),
        split: DatasetSplit {
            train,
            valid,
            test,
            users,
            items,
        },
        entities,
        relations,
        triples,
        alignment,
    })
}

/// Loads, filters, splits and samples negatives for `config`. Synthetic
/// sources are generated into `raw_dir` first.
pub fn build_dataset(config: &RunConfig, raw_dir: &Path) -> Result<PreparedDataset> {
    let seed = config.hyper.seed;
    match &config.data {
        DataSource::Files {
            interactions,
            kg,
            alignment,
        } => {
            for p in std::iter::once(interactions).chain(kg).chain(alignment) {
                if !p.exists() {
                    return Err(Error::Config(format!("input file {} does not exist", p.display())));
                }
            }
            ingest_files(
                interactions,
                kg.as_deref(),
                alignment.as_deref(),
                &config.ingest,
                seed,
                &config.tag,
            )
        }
        DataSource::Synthetic(spec) => {
            let files = synth::write_files(&synth::generate(spec)?, raw_dir)?;
            ingest_files(
                &files.interactions,
                Some(&files.kg),
                Some(&files.alignment),
                &config.ingest,
                seed,
                &config.tag,
            )
        }
    }
}

/// `prepare`: writes the split cache, its id maps and a statistics file.
pub fn prepare(config: &RunConfig, out: &Path) -> Result<PreparedDataset> {
    let _lock = DirLock::acquire(out)?;
    let dataset = build_dataset(config, &out.join("raw"))?;
    dataset.save(&out.join(DATASET_FILE))?;
    write_atomic(&out.join(STATS_FILE), format!("{}\n", dataset.stats()).as_bytes())?;
    config.save(&out.join(CONFIG_FILE))?;
    Ok(dataset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub outcome: FitOutcome,
    pub valid: Option<MetricsReport>,
    pub test: MetricsReport,
}

fn has_both_classes(pairs: &[crate::ingest::LabeledPair]) -> bool {
    pairs.iter().any(|p| p.is_positive()) && pairs.iter().any(|p| !p.is_positive())
}

/// Fits and evaluates in memory without touching the filesystem.
pub fn train_and_evaluate(
    dataset: &PreparedDataset,
    hyper: &HyperParams,
    k_grid: &[usize],
    exec: Execution,
) -> Result<TrainSummary> {
    let graph = dataset.graph()?;
    let outcome = fit(&dataset.split, &graph, hyper, exec)?;
    let split = &dataset.split;
    let report = |pairs| {
        evaluate_pairs(
            &outcome.params,
            &graph,
            hyper,
            split,
            pairs,
            k_grid,
            &dataset.tag,
            outcome.best_epoch,
            exec,
        )
    };
    let valid = if has_both_classes(&split.valid) {
        Some(report(&split.valid)?)
    } else {
        None
    };
    let test = report(&split.test)?;
    Ok(TrainSummary { outcome, valid, test })
}

/// `train`: fits on `dataset_path` and writes the best checkpoint, the epoch
/// log and validation/test reports into `out`.
pub fn train(
    dataset_path: &Path,
    hyper: &HyperParams,
    out: &Path,
    k_grid: &[usize],
    exec: Execution,
) -> Result<TrainSummary> {
    let _lock = DirLock::acquire(out)?;
    let dataset = PreparedDataset::load(dataset_path)?;
    let summary = train_and_evaluate(&dataset, hyper, k_grid, exec)?;
    let ck = Checkpoint {
        dataset: dataset.tag.clone(),
        epoch: summary.outcome.best_epoch,
        hyper: hyper.clone(),
        params: summary.outcome.params.clone(),
    };
    ck.save(&out.join(CHECKPOINT_FILE))?;
    let mut log = String::new();
    for r in &summary.outcome.history {
        writeln!(log, "{}", r.log_line()).unwrap();
    }
    write_atomic(&out.join(TRAIN_LOG_FILE), log.as_bytes())?;
    if let Some(v) = &summary.valid {
        write_atomic(&out.join(VALID_REPORT_FILE), v.to_kv().as_bytes())?;
    }
    write_atomic(&out.join(TEST_REPORT_FILE), summary.test.to_kv().as_bytes())?;
    write_atomic(&out.join(TOPK_CSV_FILE), summary.test.to_csv().as_bytes())?;
    Ok(summary)
}

/// Test-split report of a checkpoint.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    dataset: &PreparedDataset,
    k_grid: &[usize],
    exec: Execution,
) -> Result<MetricsReport> {
    let graph = dataset.graph()?;
    checkpoint.check_compatible(&graph)?;
    evaluate_pairs(
        &checkpoint.params,
        &graph,
        &checkpoint.hyper,
        &dataset.split,
        &dataset.split.test,
        k_grid,
        &dataset.tag,
        checkpoint.epoch,
        exec,
    )
}

/// `evaluate`: writes the report and per-K CSV into `out`.
pub fn evaluate(
    checkpoint_path: &Path,
    dataset_path: &Path,
    k_grid: &[usize],
    out: &Path,
    exec: Execution,
) -> Result<MetricsReport> {
    let _lock = DirLock::acquire(out)?;
    let ck = Checkpoint::load(checkpoint_path)?;
    let dataset = PreparedDataset::load(dataset_path)?;
    let report = evaluate_checkpoint(&ck, &dataset, k_grid, exec)?;
    write_atomic(&out.join(TEST_REPORT_FILE), report.to_kv().as_bytes())?;
    write_atomic(&out.join(TOPK_CSV_FILE), report.to_csv().as_bytes())?;
    Ok(report)
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: &'static str,
    pub hyper: HyperParams,
}

/// Full model, the four grouping modes, and the five component ablations.
pub fn ablation_variants(base: &HyperParams) -> Vec<Variant> {
    let with = |name, f: &dyn Fn(&mut HyperParams)| {
        let mut h = base.clone();
        f(&mut h);
        Variant { name, hyper: h }
    };
    let drop = |letter: char| {
        let kept: String = "UHRT".chars().filter(|&c| c != letter).collect();
        AblationMask::from_str(&kept).expect("three-letter mask")
    };
    vec![
        with("full", &|h| {
            h.grouping = GroupingMode::Global;
            h.mask = AblationMask::FULL;
            h.use_contrastive = true;
        }),
        with("grouping=global", &|h| h.grouping = GroupingMode::Global),
        with("grouping=vertical", &|h| h.grouping = GroupingMode::Vertical),
        with("grouping=horizontal", &|h| h.grouping = GroupingMode::Horizontal),
        with("grouping=base", &|h| h.grouping = GroupingMode::Base),
        with("w/o U/V", &|h| h.mask = drop('U')),
        with("w/o H", &|h| h.mask = drop('H')),
        with("w/o R", &|h| h.mask = drop('R')),
        with("w/o T", &|h| h.mask = drop('T')),
        with("w/o CL", &|h| h.use_contrastive = false),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub hyper: HyperParams,
    pub report: MetricsReport,
}

pub fn ablate(dataset: &PreparedDataset, base: &HyperParams, exec: Execution) -> Result<Vec<AblationRow>> {
    ablation_variants(base)
        .into_iter()
        .map(|v| {
            log::info!("ablation variant {}", v.name);
            let s = train_and_evaluate(dataset, &v.hyper, &DEFAULT_K_GRID, exec)?;
            Ok(AblationRow {
                variant: v.name,
                hyper: v.hyper,
                report: s.test,
            })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("variant,grouping,mask,contrastive,auc,acc,f1,ndcg@10\n");
    for r in rows {
        let ndcg = r.report.ndcg_at_k.get(&10).copied().unwrap_or(f64::NAN);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.variant,
            r.hyper.grouping,
            r.hyper.mask,
            r.hyper.use_contrastive,
            r.report.auc,
            r.report.acc,
            r.report.f1,
            ndcg
        )
        .unwrap();
    }
    s
}

/// Hyperparameter sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// User side: `l_u ∈ 1..=4` × `n_u ∈ {4, 8, 16, 32, 64}`.
    Fanout,
    /// Item side: `l_v ∈ 1..=4` × `n_v ∈ {4, 8, 16, 32, 64}`.
    Depth,
    /// `n ∈ {1, 2, 4, 6, 8}` query vectors.
    Queries,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Fanout => "fanout",
            SweepAxis::Depth => "depth",
            SweepAxis::Queries => "queries",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fanout" | "user" => Ok(SweepAxis::Fanout),
            "depth" | "item" => Ok(SweepAxis::Depth),
            "queries" => Ok(SweepAxis::Queries),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?}; use depth, fanout or queries"))),
        }
    }
}

pub const SWEEP_DEPTHS: [usize; 4] = [1, 2, 3, 4];
pub const SWEEP_FANOUTS: [usize; 5] = [4, 8, 16, 32, 64];
pub const SWEEP_QUERIES: [usize; 5] = [1, 2, 4, 6, 8];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub hyper: HyperParams,
    /// `None` when the cell exceeded the route budget.
    pub auc: Option<f64>,
}

pub fn sweep_grid(base: &HyperParams, axis: SweepAxis) -> Vec<HyperParams> {
    match axis {
        SweepAxis::Queries => SWEEP_QUERIES
            .iter()
            .map(|&n| HyperParams {
                queries: n,
                ..base.clone()
            })
            .collect(),
        SweepAxis::Fanout | SweepAxis::Depth => {
            let mut out = Vec::new();
            for &l in &SWEEP_DEPTHS {
                for &n in &SWEEP_FANOUTS {
                    let mut h = base.clone();
                    if axis == SweepAxis::Fanout {
                        (h.user_depth, h.user_fanout) = (l, n);
                    } else {
                        (h.item_depth, h.item_fanout) = (l, n);
                    }
                    out.push(h);
                }
            }
            out
        }
    }
}

pub fn sweep(
    dataset: &PreparedDataset,
    base: &HyperParams,
    axis: SweepAxis,
    max_routes: usize,
    exec: Execution,
) -> Result<Vec<SweepCell>> {
    sweep_grid(base, axis)
        .into_iter()
        .map(|h| {
            let routes = route_count(h.user_depth, h.user_fanout).max(route_count(h.item_depth, h.item_fanout));
            if routes > max_routes {
                log::warn!("skipping sweep cell with {routes} routes (budget {max_routes})");
                return Ok(SweepCell { hyper: h, auc: None });
            }
            let s = train_and_evaluate(dataset, &h, &DEFAULT_K_GRID, exec)?;
            Ok(SweepCell {
                hyper: h,
                auc: Some(s.test.auc),
            })
        })
        .collect()
}

pub fn sweep_csv(axis: SweepAxis, cells: &[SweepCell]) -> String {
    let mut s = match axis {
        SweepAxis::Fanout => String::from("user_depth,user_fanout,auc\n"),
        SweepAxis::Depth => String::from("item_depth,item_fanout,auc\n"),
        SweepAxis::Queries => String::from("queries,auc\n"),
    };
    for c in cells {
        let auc = c.auc.map_or_else(|| "skipped".to_string(), |a| a.to_string());
        let h = &c.hyper;
        match axis {
            SweepAxis::Fanout => writeln!(s, "{},{},{auc}", h.user_depth, h.user_fanout),
            SweepAxis::Depth => writeln!(s, "{},{},{auc}", h.item_depth, h.item_fanout),
            SweepAxis::Queries => writeln!(s, "{},{auc}", h.queries),
        }
        .unwrap();
    }
    s
}

/// `synth`: writes the three TSVs of a synthetic spec into `out`.
pub fn synth(spec: &synth::SyntheticSpec, out: &Path) -> Result<SyntheticFiles> {
    let _lock = DirLock::acquire(out)?;
    synth::write_files(&synth::generate(spec)?, out)
}

/// Resolves the dataset cache inside a `prepare` output directory, or
/// returns `path` when it already names a file.
pub fn dataset_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(DATASET_FILE)
    } else {
        path.to_path_buf()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_ablation_variants() {
        let v = ablation_variants(&HyperParams::default());
        assert_eq!(v.len(), 10);
        assert_eq!(v.iter().filter(|v| v.name.starts_with("grouping=")).count(), 4);
        assert_eq!(v[4].hyper.grouping, GroupingMode::Base);
        assert_eq!(v[5].hyper.mask.to_string(), "HRT");
        assert!(!v[9].hyper.use_contrastive);
    }

    #[test]
    fn sweep_grid_shapes() {
        let h = HyperParams::default();
        assert_eq!(sweep_grid(&h, SweepAxis::Queries).len(), 5);
        assert_eq!(sweep_grid(&h, SweepAxis::Fanout).len(), 20);
        let depth = sweep_grid(&h, SweepAxis::Depth);
        assert_eq!(depth.len(), 20);
        assert!(depth.iter().all(|c| c.user_depth == h.user_depth));
        assert_eq!("item".parse::<SweepAxis>().unwrap(), SweepAxis::Depth);
        assert!("width".parse::<SweepAxis>().is_err());
    }
}
