//! Run configuration: a flat `key=value` text format with a version header,
//! and the published hyperparameter presets.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::ingest::{ImplicitPolicy, SplitRatios};
use crate::model::{Aggregation, Normalization};
use crate::synth::SyntheticSpec;
use crate::train::{ContrastiveLogit, HyperParams};

pub const CONFIG_MAGIC: &str = "DKSE-CONFIG v1";
pub const PRESETS: [&str; 3] = ["lfm-1b", "movielens-1m", "amazon-book"];

/// Hyperparameters of a named preset; fields the preset does not fix keep
/// their defaults.
pub fn preset(name: &str) -> Result<HyperParams> {
    let (user_depth, user_fanout, item_depth, item_fanout, dim, l2, queries) = match name {
        "lfm-1b" => (2, 64, 1, 32, 64, 1e-6, 6),
        "movielens-1m" => (1, 32, 2, 32, 32, 1e-5, 4),
        "amazon-book" => (2, 8, 3, 32, 64, 1e-5, 4),
        _ => {
            return Err(Error::Config(format!(
                "unknown preset {name:?}; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(HyperParams {
        user_depth,
        user_fanout,
        item_depth,
        item_fanout,
        dim,
        l2,
        queries,
        ..HyperParams::default()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        interactions: PathBuf,
        kg: Option<PathBuf>,
        alignment: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub policy: ImplicitPolicy,
    /// `k_core <= 1` keeps everything.
    pub k_core: usize,
    pub ratios: SplitRatios,
    /// Negatives per training positive.
    pub train_negatives: usize,
    /// Negatives per validation or test positive.
    pub eval_negatives: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            policy: ImplicitPolicy::default(),
            k_core: 20,
            ratios: SplitRatios::default(),
            train_negatives: 1,
            eval_negatives: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub tag: String,
    pub data: DataSource,
    pub ingest: IngestOptions,
    pub hyper: HyperParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::synthetic(SyntheticSpec::default())
    }
}

impl RunConfig {
    /// Synthetic data is already dense, so no k-core filtering by default.
    pub fn synthetic(spec: SyntheticSpec) -> Self {
        RunConfig {
            preset: None,
            tag: "synthetic".into(),
            data: DataSource::Synthetic(spec),
            ingest: IngestOptions {
                k_core: 1,
                ..IngestOptions::default()
            },
            hyper: HyperParams::default(),
        }
    }

    pub fn files(interactions: PathBuf, kg: Option<PathBuf>, alignment: Option<PathBuf>) -> Self {
        let tag = interactions
            .file_stem()
            .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
        RunConfig {
            preset: None,
            tag,
            data: DataSource::Files {
                interactions,
                kg,
                alignment,
            },
            ingest: IngestOptions::default(),
            hyper: HyperParams::default(),
        }
    }

    /// Replaces the hyperparameters with a preset, keeping the seed.
    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let seed = self.hyper.seed;
        self.hyper = preset(name)?;
        self.hyper.seed = seed;
        self.preset = Some(name.to_string());
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CONFIG_MAGIC}").unwrap();
        if let Some(p) = &self.preset {
            writeln!(s, "preset={p}").unwrap();
        }
        writeln!(s, "tag={}", self.tag).unwrap();
        match &self.data {
            DataSource::Files {
                interactions,
                kg,
                alignment,
            } => {
                writeln!(s, "data=files").unwrap();
                writeln!(s, "interactions={}", interactions.display()).unwrap();
                if let Some(kg) = kg {
                    writeln!(s, "kg={}", kg.display()).unwrap();
                }
                if let Some(a) = alignment {
                    writeln!(s, "alignment={}", a.display()).unwrap();
                }
            }
            DataSource::Synthetic(spec) => {
                writeln!(s, "data=synthetic").unwrap();
                writeln!(s, "synth.users={}", spec.users).unwrap();
                writeln!(s, "synth.items={}", spec.items).unwrap();
                writeln!(s, "synth.entities={}", spec.entities).unwrap();
                writeln!(s, "synth.relations={}", spec.relations).unwrap();
                writeln!(s, "synth.latent_dim={}", spec.latent_dim).unwrap();
                writeln!(s, "synth.interactions_per_user={}", spec.interactions_per_user).unwrap();
                writeln!(s, "synth.kg_edges_per_item={}", spec.kg_edges_per_item).unwrap();
                writeln!(s, "synth.clusters={}", spec.clusters).unwrap();
                writeln!(s, "synth.noise={}", spec.noise).unwrap();
                writeln!(s, "synth.seed={}", spec.seed).unwrap();
            }
        }
        let policy = match self.ingest.policy {
            ImplicitPolicy::AllPositive => "all".to_string(),
            ImplicitPolicy::Threshold { min, inclusive: true } => format!(">={min}"),
            ImplicitPolicy::Threshold { min, inclusive: false } => format!(">{min}"),
        };
        writeln!(s, "implicit={policy}").unwrap();
        writeln!(s, "k_core={}", self.ingest.k_core).unwrap();
        let r = self.ingest.ratios;
        writeln!(s, "split={},{},{}", r.train, r.valid, r.test).unwrap();
        writeln!(s, "train_negatives={}", self.ingest.train_negatives).unwrap();
        writeln!(s, "eval_negatives={}", self.ingest.eval_negatives).unwrap();
        s.push_str(&hyper_to_text(&self.hyper));
        s
    }

    /// Parses a config. A `preset` line loads that preset's values; lines
    /// after it override them.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CONFIG_MAGIC => {}
            _ => return Err(Error::Config(format!("config must start with {CONFIG_MAGIC:?}"))),
        }
        let mut cfg = RunConfig::default();
        let mut data_kind: Option<String> = None;
        let mut spec = SyntheticSpec::default();
        let (mut interactions, mut kg, mut alignment) = (None, None, None);
        let mut k_core = None;
        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let at = |e: Error| Error::Config(format!("config line {}: {e}", i + 1));
            match key {
                "preset" => cfg.apply_preset(value).map_err(at)?,
                "tag" => cfg.tag = value.to_string(),
                "data" => data_kind = Some(value.to_string()),
                "interactions" => interactions = Some(PathBuf::from(value)),
                "kg" => kg = Some(PathBuf::from(value)),
                "alignment" => alignment = Some(PathBuf::from(value)),
                "implicit" => cfg.ingest.policy = parse_policy(value).map_err(at)?,
                "k_core" => k_core = Some(num(key, value).map_err(at)?),
                "split" => cfg.ingest.ratios = parse_ratios(value).map_err(at)?,
                "train_negatives" => cfg.ingest.train_negatives = num(key, value).map_err(at)?,
                "eval_negatives" => cfg.ingest.eval_negatives = num(key, value).map_err(at)?,
                _ if key.starts_with("synth.") => set_synth(&mut spec, &key[6..], value).map_err(at)?,
                _ => {
                    if !set_hyper(&mut cfg.hyper, key, value).map_err(at)? {
                        return Err(Error::Config(format!("config line {}: unknown key {key:?}", i + 1)));
                    }
                }
            }
        }
        match data_kind.as_deref() {
            None | Some("synthetic") => {
                if interactions.is_some() {
                    return Err(Error::Config("interactions given but data=synthetic".into()));
                }
                cfg.data = DataSource::Synthetic(spec);
                cfg.ingest.k_core = k_core.unwrap_or(1);
            }
            Some("files") => {
                let interactions =
                    interactions.ok_or_else(|| Error::Config("data=files needs an interactions path".into()))?;
                cfg.data = DataSource::Files {
                    interactions,
                    kg,
                    alignment,
                };
                cfg.ingest.k_core = k_core.unwrap_or(20);
            }
            Some(other) => return Err(Error::Config(format!("unknown data source {other:?}"))),
        }
        cfg.ingest.ratios.validate()?;
        cfg.hyper.validate()?;
        if let DataSource::Synthetic(spec) = &cfg.data {
            spec.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_policy(value: &str) -> Result<ImplicitPolicy> {
    if value == "all" {
        return Ok(ImplicitPolicy::AllPositive);
    }
    let (inclusive, rest) = match value.strip_prefix(">=") {
        Some(r) => (true, r),
        None => match value.strip_prefix('>') {
            Some(r) => (false, r),
            None => return Err(Error::Config(format!("implicit: expected all, >=X or >X, got {value:?}"))),
        },
    };
    Ok(ImplicitPolicy::Threshold {
        min: num("implicit", rest)?,
        inclusive,
    })
}

fn parse_ratios(value: &str) -> Result<SplitRatios> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("split: expected three ratios, got {value:?}")));
    }
    Ok(SplitRatios {
        train: num("split", parts[0])?,
        valid: num("split", parts[1])?,
        test: num("split", parts[2])?,
    })
}

fn set_synth(spec: &mut SyntheticSpec, key: &str, value: &str) -> Result<()> {
    match key {
        "users" => spec.users = num(key, value)?,
        "items" => spec.items = num(key, value)?,
        "entities" => spec.entities = num(key, value)?,
        "relations" => spec.relations = num(key, value)?,
        "latent_dim" => spec.latent_dim = num(key, value)?,
        "interactions_per_user" => spec.interactions_per_user = num(key, value)?,
        "kg_edges_per_item" => spec.kg_edges_per_item = num(key, value)?,
        "clusters" => spec.clusters = num(key, value)?,
        "noise" => spec.noise = num(key, value)?,
        "seed" => spec.seed = num(key, value)?,
        _ => return Err(Error::Config(format!("unknown key synth.{key}"))),
    }
    Ok(())
}

/// The hyperparameter block of a config; also embedded in checkpoints.
pub fn hyper_to_text(h: &HyperParams) -> String {
    let mut s = String::new();
    let norm = match h.normalization {
        Normalization::Softmax => "softmax",
        Normalization::RawRatio => "raw_ratio",
    };
    let agg = match h.aggregation {
        Aggregation::SelectedFeature => "selected_feature",
        Aggregation::TerminalEmbedding => "terminal_embedding",
    };
    let logit = match h.contrastive_logit {
        ContrastiveLogit::Sigmoid => "sigmoid",
        ContrastiveLogit::Dot => "dot",
    };
    let pairs: [(&str, String); 19] = [
        ("user_depth", h.user_depth.to_string()),
        ("user_fanout", h.user_fanout.to_string()),
        ("item_depth", h.item_depth.to_string()),
        ("item_fanout", h.item_fanout.to_string()),
        ("dim", h.dim.to_string()),
        ("queries", h.queries.to_string()),
        ("l2", h.l2.to_string()),
        ("temperature", h.temperature.to_string()),
        ("learning_rate", h.learning_rate.to_string()),
        ("batch_size", h.batch_size.to_string()),
        ("epochs", h.epochs.to_string()),
        ("patience", h.patience.to_string()),
        ("grouping", h.grouping.to_string()),
        ("mask", h.mask.to_string()),
        ("use_contrastive", h.use_contrastive.to_string()),
        ("contrastive_logit", logit.to_string()),
        ("normalization", norm.to_string()),
        ("aggregation", agg.to_string()),
        ("seed", h.seed.to_string()),
    ];
    for (k, v) in pairs {
        writeln!(s, "{k}={v}").unwrap();
    }
    s
}

/// Sets one hyperparameter; `Ok(false)` when `key` is not a hyperparameter.
pub fn set_hyper(h: &mut HyperParams, key: &str, value: &str) -> Result<bool> {
    match key {
        "user_depth" => h.user_depth = num(key, value)?,
        "user_fanout" => h.user_fanout = num(key, value)?,
        "item_depth" => h.item_depth = num(key, value)?,
        "item_fanout" => h.item_fanout = num(key, value)?,
        "dim" => h.dim = num(key, value)?,
        "queries" => h.queries = num(key, value)?,
        "l2" => h.l2 = num(key, value)?,
        "temperature" => h.temperature = num(key, value)?,
        "learning_rate" => h.learning_rate = num(key, value)?,
        "batch_size" => h.batch_size = num(key, value)?,
        "epochs" => h.epochs = num(key, value)?,
        "patience" => h.patience = num(key, value)?,
        "grouping" => h.grouping = value.parse()?,
        "mask" => h.mask = value.parse()?,
        "use_contrastive" => h.use_contrastive = parse_bool(key, value)?,
        "contrastive_logit" => {
            h.contrastive_logit = match value {
                "sigmoid" => ContrastiveLogit::Sigmoid,
                "dot" => ContrastiveLogit::Dot,
                _ => return Err(Error::Config(format!("contrastive_logit: unknown {value:?}"))),
            }
        }
        "normalization" => {
            h.normalization = match value {
                "softmax" => Normalization::Softmax,
                "raw_ratio" => Normalization::RawRatio,
                _ => return Err(Error::Config(format!("normalization: unknown {value:?}"))),
            }
        }
        "aggregation" => {
            h.aggregation = match value {
                "selected_feature" => Aggregation::SelectedFeature,
                "terminal_embedding" => Aggregation::TerminalEmbedding,
                _ => return Err(Error::Config(format!("aggregation: unknown {value:?}"))),
            }
        }
        "seed" => h.seed = num(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Parses a block produced by [`hyper_to_text`]; every key must be known.
pub fn hyper_from_text(text: &str) -> Result<HyperParams> {
    let mut h = HyperParams::default();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("hyperparameter line {line:?} is not key=value")))?;
        if !set_hyper(&mut h, k, v)? {
            return Err(Error::Config(format!("unknown hyperparameter {k:?}")));
        }
    }
    Ok(h)
}
