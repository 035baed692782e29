#![allow(dead_code)]

use std::collections::BTreeMap;

use dkse::graph::{build_unified_graph, NodeSpace, Triple, UnifiedGraph};
use dkse::ingest::LabeledPair;
use dkse::model::{AblationMask, GroupingMode, ParameterSet};
use dkse::rng::rng_from;
use dkse::train::{training_samples, HyperParams, PairSamples};
use dkse::Execution;
use rand::Rng as _;

/// A small randomized training problem with fixed samples.
pub struct Toy {
    pub graph: UnifiedGraph,
    pub params: ParameterSet,
    pub pairs: Vec<LabeledPair>,
    pub samples: Vec<PairSamples>,
    pub hyper: HyperParams,
}

pub fn toy_hyper(grouping: GroupingMode, mask: AblationMask, contrastive: bool) -> HyperParams {
    HyperParams {
        user_depth: 2,
        user_fanout: 2,
        item_depth: 2,
        item_fanout: 2,
        dim: 8,
        queries: 3,
        l2: 1e-3,
        temperature: 0.5,
        grouping,
        mask,
        use_contrastive: contrastive,
        ..HyperParams::default()
    }
}

fn min_key_margin(p: &ParameterSet) -> f64 {
    let d = p.dim();
    let mut z = vec![0.0; d];
    let mut margin = f64::INFINITY;
    for m in [&p.nodes, &p.relations] {
        for r in 0..m.rows() {
            p.key_weight.matvec_into(m.row(r), &mut z);
            for (zi, bi) in z.iter().zip(&p.key_bias) {
                margin = margin.min((zi + bi).abs());
            }
        }
    }
    margin
}

/// Builds a toy instance (3 users, 4 items, 8 entities, 2 relations: 15 nodes)
/// from `seed`, redrawing until no key pre-activation sits within 1e-3 of
/// the ReLU kink.
pub fn toy(seed: u64, hyper: HyperParams) -> Toy {
    for attempt in 0u64.. {
        let mut rng = rng_from(seed, &[99, attempt]);
        let space = NodeSpace {
            users: 3,
            items: 4,
            entities: 8,
            relations: 2,
        };
        let mut interactions = Vec::new();
        for u in 0..3u32 {
            for _ in 0..2 {
                interactions.push((u, rng.random_range(0..4u32)));
            }
        }
        interactions.sort_unstable();
        interactions.dedup();
        let alignment: BTreeMap<u32, u32> = (0..4u32).map(|i| (i, i)).collect();
        let triples: Vec<Triple> = (0..10)
            .map(|_| Triple::new(rng.random_range(0..8), rng.random_range(0..2), rng.random_range(0..8)))
            .filter(|t| t.head != t.tail)
            .collect();
        let graph = build_unified_graph(space, &interactions, &triples, &alignment).unwrap();
        let mut params = ParameterSet::init(graph.node_count(), graph.relation_count(), hyper.dim, hyper.queries, seed ^ attempt);
        for b in params.key_bias.iter_mut() {
            *b = rng.random_range(-0.1..0.1);
        }
        params.score_bias = rng.random_range(-0.2..0.2);
        if min_key_margin(&params) < 1e-3 {
            continue;
        }
        let mut pairs: Vec<LabeledPair> = interactions
            .iter()
            .take(3)
            .map(|&(u, i)| LabeledPair::positive(u, i))
            .collect();
        for u in 0..2u32 {
            let item = (0..4u32).find(|i| !interactions.contains(&(u, *i))).unwrap();
            pairs.push(LabeledPair::negative(u, item));
        }
        let samples = training_samples(&graph, &pairs, &hyper, 1, 0, Execution::Sequential);
        return Toy {
            graph,
            params,
            pairs,
            samples,
            hyper,
        };
    }
    unreachable!()
}
