use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::batch::{batch_loss_and_grad, training_samples};
use super::loss::LossBreakdown;
use super::HyperParams;
use crate::error::{Error, Result};
use crate::eval::pair_auc;
use crate::exec::Execution;
use crate::graph::UnifiedGraph;
use crate::ingest::DatasetSplit;
use crate::model::ParameterSet;
use crate::rng;

/// Mean batch losses and validation AUC after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_auc: Option<f64>,
}

impl EpochRecord {
    /// One machine-parseable `key=value` line.
    pub fn log_line(&self) -> String {
        let auc = self.val_auc.map_or_else(|| "nan".to_string(), |a| format!("{a:.6}"));
        format!(
            "epoch={} loss={:.6} bce={:.6} cl={:.6} l2={:.6} val_auc={auc}",
            self.epoch,
            self.loss.total(),
            self.loss.bce,
            self.loss.contrastive,
            self.loss.l2,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    /// Parameters of the best validation epoch (the last epoch when there
    /// is no usable validation set).
    pub params: ParameterSet,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

pub fn initial_params(graph: &UnifiedGraph, hyper: &HyperParams) -> ParameterSet {
    ParameterSet::init(graph.node_count(), graph.relation_count(), hyper.dim, hyper.queries, hyper.seed)
}

/// Trains from the seeded initialization.
pub fn fit(split: &DatasetSplit, graph: &UnifiedGraph, hyper: &HyperParams, exec: Execution) -> Result<FitOutcome> {
    fit_with(split, graph, hyper, exec, |_| {})
}

/// Like [`fit`], calling `on_epoch` after every epoch.
pub fn fit_with(
    split: &DatasetSplit,
    graph: &UnifiedGraph,
    hyper: &HyperParams,
    exec: Execution,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitOutcome> {
    hyper.validate()?;
    let space = graph.space();
    if split.users.len() != space.users || split.items.len() != space.items {
        return Err(Error::Dataset(format!(
            "split has {} users / {} items but the graph has {} / {}",
            split.users.len(),
            split.items.len(),
            space.users,
            space.items
        )));
    }
    let mut params = initial_params(graph, hyper);
    let mut state = AdamState::new(&params);
    let has_valid = split.valid.iter().any(|p| p.is_positive()) && split.valid.iter().any(|p| !p.is_positive());
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_auc = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..split.train.len()).collect();

    for epoch in 1..=hyper.epochs {
        let mut shuffle = rng::rng_from(hyper.seed, &[rng::stream::SHUFFLE, epoch as u64]);
        order.sort_unstable();
        order.shuffle(&mut shuffle);
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let pairs: Vec<_> = chunk.iter().map(|&i| split.train[i]).collect();
            let samples = training_samples(graph, &pairs, hyper, epoch, b * hyper.batch_size, exec);
            let (loss, grads) = batch_loss_and_grad(&params, graph, &pairs, &samples, hyper, exec);
            if !loss.total().is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}, batch {b}: {loss:?}")));
            }
            adam_step(&mut params, &grads, &mut state, hyper.learning_rate)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {b}: {e}")))?;
            sum.bce += loss.bce;
            sum.contrastive += loss.contrastive;
            sum.l2 += loss.l2;
            batches += 1;
        }
        let n = batches.max(1) as f64;
        let mean = LossBreakdown {
            bce: sum.bce / n,
            contrastive: sum.contrastive / n,
            l2: sum.l2 / n,
        };
        let val_auc = if has_valid {
            Some(pair_auc(&params, graph, hyper, &split.valid, exec)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            loss: mean,
            val_auc,
        };
        log::info!("{}", record.log_line());
        on_epoch(&record);
        history.push(record);

        match val_auc {
            Some(auc) if auc > best_auc => {
                best_auc = auc;
                best = params.clone();
                best_epoch = epoch;
                stale = 0;
            }
            Some(_) => {
                stale += 1;
                if stale >= hyper.patience {
                    stopped_early = true;
                    break;
                }
            }
            None => {
                best = params.clone();
                best_epoch = epoch;
            }
        }
    }
    Ok(FitOutcome {
        params: best,
        best_epoch,
        history,
        stopped_early,
    })
}
