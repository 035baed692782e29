//! Scoring with enriched embeddings: CTR metrics and full-ranking top-K.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{sample_neighborhood, NodeId, UnifiedGraph};
use crate::ingest::{DatasetSplit, LabeledPair};
use crate::metrics::{acc_f1, auc, ndcg_at_k, precision_at_k, topk_rank, MetricsReport, ScoredPair};
use crate::model::{dot, enrich, msal, sigmoid, ParameterSet};
use crate::rng;
use crate::train::HyperParams;

/// Enriched embeddings `e + e_N` for every user and item. Each node's
/// neighborhood is drawn from its own seeded stream, so the table does not
/// depend on evaluation order or thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichedTable {
    users: Vec<Vec<f64>>,
    items: Vec<Vec<f64>>,
}

impl EnrichedTable {
    pub fn build(params: &ParameterSet, graph: &UnifiedGraph, hyper: &HyperParams, exec: Execution) -> Self {
        let cfg = hyper.model_config();
        let space = graph.space();
        let one = |node: NodeId, depth: usize, fanout: usize| {
            let mut rng = rng::rng_from(hyper.seed, &[rng::stream::EVAL_SAMPLE, node as u64]);
            let sample = sample_neighborhood(graph, node, depth, fanout, &mut rng, None);
            enrich(params.nodes.row(node as usize), &msal(&sample, params, &cfg))
        };
        let users = exec.map_range(space.users, |u| {
            one(graph.user_node(u as u32), hyper.user_depth, hyper.user_fanout)
        });
        let items = exec.map_range(space.items, |i| {
            one(graph.item_node(i as u32), hyper.item_depth, hyper.item_fanout)
        });
        EnrichedTable { users, items }
    }

    pub fn user(&self, user: u32) -> &[f64] {
        &self.users[user as usize]
    }

    pub fn item(&self, item: u32) -> &[f64] {
        &self.items[item as usize]
    }

    /// Click probability `σ(ê_u · ê_v)`.
    pub fn score(&self, user: u32, item: u32) -> f64 {
        sigmoid(dot(self.user(user), self.item(item)))
    }

    pub fn score_pairs(&self, pairs: &[LabeledPair]) -> Vec<ScoredPair> {
        pairs
            .iter()
            .map(|p| ScoredPair {
                user: p.user,
                item: p.item,
                score: self.score(p.user, p.item),
                label: p.label,
            })
            .collect()
    }
}

/// AUC of `pairs` under the current parameters.
pub fn pair_auc(
    params: &ParameterSet,
    graph: &UnifiedGraph,
    hyper: &HyperParams,
    pairs: &[LabeledPair],
    exec: Execution,
) -> Result<f64> {
    let table = EnrichedTable::build(params, graph, hyper, exec);
    auc(&table.score_pairs(pairs))
}

/// Mean Precision@K and NDCG@K over users with at least one relevant item.
/// Candidates are all items the user has no training positive with.
pub fn topk_metrics(
    table: &EnrichedTable,
    split: &DatasetSplit,
    relevant: &[LabeledPair],
    k_grid: &[usize],
    exec: Execution,
) -> Result<(BTreeMap<usize, f64>, BTreeMap<usize, f64>, usize)> {
    if let Some(&k) = k_grid.iter().find(|&&k| k == 0) {
        return Err(Error::Metric(format!("K must be positive, got {k}")));
    }
    let mut seen: HashMap<u32, HashSet<u32>> = HashMap::new();
    for p in split.train.iter().filter(|p| p.is_positive()) {
        seen.entry(p.user).or_default().insert(p.item);
    }
    let mut targets: BTreeMap<u32, HashSet<u32>> = BTreeMap::new();
    for p in relevant.iter().filter(|p| p.is_positive()) {
        targets.entry(p.user).or_default().insert(p.item);
    }
    let users: Vec<(u32, HashSet<u32>)> = targets.into_iter().collect();
    let max_k = k_grid.iter().copied().max().unwrap_or(0);
    let n_items = split.items.len() as u32;
    let empty = HashSet::new();
    let per_user: Vec<Result<Vec<(f64, f64)>>> = exec.map(&users, |_, (user, rel)| {
        let train = seen.get(user).unwrap_or(&empty);
        let candidates: Vec<u32> = (0..n_items).filter(|i| !train.contains(i)).collect();
        let ranked = topk_rank(&candidates, |i| table.score(*user, i), max_k);
        k_grid
            .iter()
            .map(|&k| Ok((precision_at_k(&ranked, rel, k)?, ndcg_at_k(&ranked, rel, k)?)))
            .collect()
    });
    let mut precision: BTreeMap<usize, f64> = k_grid.iter().map(|&k| (k, 0.0)).collect();
    let mut ndcg = precision.clone();
    for row in per_user {
        for (&k, (p, n)) in k_grid.iter().zip(row?) {
            *precision.get_mut(&k).unwrap() += p;
            *ndcg.get_mut(&k).unwrap() += n;
        }
    }
    if !users.is_empty() {
        let n = users.len() as f64;
        precision.values_mut().for_each(|v| *v /= n);
        ndcg.values_mut().for_each(|v| *v /= n);
    }
    Ok((precision, ndcg, users.len()))
}

/// CTR metrics on `pairs` plus top-K metrics against their positives.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_pairs(
    params: &ParameterSet,
    graph: &UnifiedGraph,
    hyper: &HyperParams,
    split: &DatasetSplit,
    pairs: &[LabeledPair],
    k_grid: &[usize],
    dataset: &str,
    epoch: usize,
    exec: Execution,
) -> Result<MetricsReport> {
    let table = EnrichedTable::build(params, graph, hyper, exec);
    let scored = table.score_pairs(pairs);
    let auc = auc(&scored)?;
    let (acc, f1) = acc_f1(&scored, 0.5)?;
    let (precision_at_k, ndcg_at_k, ranked_users) = topk_metrics(&table, split, pairs, k_grid, exec)?;
    Ok(MetricsReport {
        dataset: dataset.to_string(),
        seed: hyper.seed,
        epoch,
        pairs: pairs.len(),
        positives: pairs.iter().filter(|p| p.is_positive()).count(),
        ranked_users,
        auc,
        acc,
        f1,
        precision_at_k,
        ndcg_at_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_unified_graph, NodeSpace};
    use crate::ingest::IdMap;

    fn toy() -> (UnifiedGraph, DatasetSplit, HyperParams) {
        let space = NodeSpace {
            users: 3,
            items: 4,
            entities: 0,
            relations: 0,
        };
        let train = vec![
            LabeledPair::positive(0, 0),
            LabeledPair::positive(1, 1),
            LabeledPair::positive(2, 2),
        ];
        let graph = build_unified_graph(space, &[(0, 0), (1, 1), (2, 2)], &[], &Default::default()).unwrap();
        let split = DatasetSplit {
            train,
            valid: vec![],
            test: vec![LabeledPair::positive(0, 3), LabeledPair::negative(0, 1)],
            users: ["a", "b", "c"].into_iter().collect::<IdMap>(),
            items: ["w", "x", "y", "z"].into_iter().collect::<IdMap>(),
        };
        let hyper = HyperParams {
            user_fanout: 2,
            item_fanout: 2,
            dim: 4,
            queries: 2,
            ..HyperParams::default()
        };
        (graph, split, hyper)
    }

    #[test]
    fn table_is_independent_of_execution() {
        let (graph, _, hyper) = toy();
        let p = ParameterSet::init(graph.node_count(), graph.relation_count(), 4, 2, 3);
        let a = EnrichedTable::build(&p, &graph, &hyper, Execution::Sequential);
        let b = EnrichedTable::build(&p, &graph, &hyper, Execution::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn topk_excludes_training_positives() {
        let (graph, split, hyper) = toy();
        let p = ParameterSet::init(graph.node_count(), graph.relation_count(), 4, 2, 3);
        let table = EnrichedTable::build(&p, &graph, &hyper, Execution::Sequential);
        let (prec, ndcg, users) = topk_metrics(&table, &split, &split.test, &[3], Execution::Sequential).unwrap();
        assert_eq!(users, 1);
        // user 0 ranks items {1,2,3}; the one relevant item is always in the top 3
        assert!((prec[&3] - 1.0 / 3.0).abs() < 1e-12);
        assert!(ndcg[&3] > 0.0);
    }

    #[test]
    fn zero_k_rejected() {
        let (graph, split, hyper) = toy();
        let p = ParameterSet::init(graph.node_count(), graph.relation_count(), 4, 2, 3);
        let table = EnrichedTable::build(&p, &graph, &hyper, Execution::Sequential);
        assert!(topk_metrics(&table, &split, &split.test, &[0], Execution::Sequential).is_err());
    }

    #[test]
    fn report_values_in_unit_interval() {
        let (graph, split, hyper) = toy();
        let p = ParameterSet::init(graph.node_count(), graph.relation_count(), 4, 2, 3);
        let r = evaluate_pairs(&p, &graph, &hyper, &split, &split.test, &[1, 2, 5], "toy", 0, Execution::Parallel)
            .unwrap();
        assert!(r.values_in_unit_interval());
        assert_eq!(r.pairs, 2);
        assert_eq!(r.positives, 1);
    }
}
