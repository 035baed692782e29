//! Stand-alone building blocks of the attention layer. [`super::msal`]
//! fuses them with caching for training; these forms are the reference
//! semantics.

use super::config::{AblationMask, GroupingMode, ModelConfig, Normalization};
use super::params::ParameterSet;
use crate::graph::{ChainRoute, NodeId, RelationId};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(out: &mut [f64], scale: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += scale * v;
    }
}

/// Logistic function without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// In-place normalization of `scores` into weights.
pub(crate) fn normalize_in_place(scores: &mut [f64], norm: Normalization) {
    if scores.is_empty() {
        return;
    }
    match norm {
        Normalization::Softmax => {
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                sum += *s;
            }
            for s in scores.iter_mut() {
                *s /= sum;
            }
        }
        Normalization::RawRatio => {
            let sum: f64 = scores.iter().sum();
            if sum == 0.0 {
                let u = 1.0 / scores.len() as f64;
                scores.iter_mut().for_each(|s| *s = u);
            } else {
                scores.iter_mut().for_each(|s| *s /= sum);
            }
        }
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut w = scores.to_vec();
    normalize_in_place(&mut w, Normalization::Softmax);
    w
}

/// Identifies a row of either embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Emb {
    Node(NodeId),
    Relation(RelationId),
}

impl Emb {
    pub fn vector(self, params: &ParameterSet) -> &[f64] {
        match self {
            Emb::Node(n) => params.nodes.row(n as usize),
            Emb::Relation(r) => params.relations.row(r as usize),
        }
    }
}

/// Embedding rows the selector sees for `route` under `mask`: root (U/V),
/// relations (R), intermediate nodes (H), terminal (T). If the mask removes
/// everything the terminal node is kept.
pub fn route_elements(route: &ChainRoute, mask: AblationMask) -> Vec<Emb> {
    let mut out = Vec::with_capacity(route.elements().len());
    push_route_elements(route.elements(), mask, &mut out);
    out
}

pub(crate) fn push_route_elements(elements: &[u32], mask: AblationMask, out: &mut Vec<Emb>) {
    let start = out.len();
    let last = elements.len() - 1;
    for (pos, &id) in elements.iter().enumerate() {
        let keep = if pos == 0 {
            mask.user_item
        } else if pos % 2 == 1 {
            mask.relation
        } else if pos == last {
            mask.tail
        } else {
            mask.head
        };
        if keep {
            out.push(if pos % 2 == 1 { Emb::Relation(id) } else { Emb::Node(id) });
        }
    }
    if out.len() == start {
        out.push(Emb::Node(elements[last]));
    }
}

/// `ReLU(w_k · e + b_k)`
pub fn key(e: &[f64], params: &ParameterSet) -> Vec<f64> {
    let mut k = vec![0.0; e.len()];
    params.key_weight.matvec_into(e, &mut k);
    for (ki, bi) in k.iter_mut().zip(&params.key_bias) {
        *ki = (*ki + bi).max(0.0);
    }
    k
}

/// Selected feature of one route: element vectors weighted by the
/// normalized affinity between `query` and each element's key.
pub fn knowledge_selector(elements: &[&[f64]], query: &[f64], params: &ParameterSet) -> Vec<f64> {
    selector_with(elements, query, params, Normalization::Softmax)
}

pub(crate) fn selector_with(
    elements: &[&[f64]],
    query: &[f64],
    params: &ParameterSet,
    norm: Normalization,
) -> Vec<f64> {
    assert!(!elements.is_empty(), "selector needs at least one element");
    let mut w: Vec<f64> = elements.iter().map(|e| dot(query, &key(e, params))).collect();
    normalize_in_place(&mut w, norm);
    let mut out = vec![0.0; query.len()];
    for (wi, e) in w.iter().zip(elements) {
        axpy(&mut out, *wi, e);
    }
    out
}

/// `w_c · e_c + b_c`
pub fn route_score(selected: &[f64], params: &ParameterSet) -> f64 {
    dot(&params.score_weight, selected) + params.score_bias
}

/// Cell index per route and the number of cells.
pub(crate) fn grouping_cells(routes: &[ChainRoute], mode: GroupingMode) -> (Vec<usize>, usize) {
    match mode {
        GroupingMode::Global | GroupingMode::Base => (vec![0; routes.len()], usize::from(!routes.is_empty())),
        GroupingMode::Horizontal => cells_by_key(routes.iter().map(|r| r.depth() as u32)),
        GroupingMode::Vertical => cells_by_key(routes.iter().map(ChainRoute::first_hop)),
    }
}

fn cells_by_key(keys: impl Iterator<Item = u32>) -> (Vec<usize>, usize) {
    let mut seen: Vec<u32> = Vec::new();
    let cells = keys
        .map(|k| match seen.iter().position(|&s| s == k) {
            Some(i) => i,
            None => {
                seen.push(k);
                seen.len() - 1
            }
        })
        .collect();
    (cells, seen.len())
}

/// Route weights under `mode`: per-cell normalization, each cell scaled by
/// `1 / cell count` so the total is 1. Base mode ignores scores.
pub fn group_normalize(scores: &[f64], routes: &[ChainRoute], mode: GroupingMode) -> Vec<f64> {
    let (cells, count) = grouping_cells(routes, mode);
    group_weights(scores, &cells, count, mode, Normalization::Softmax)
}

pub(crate) fn group_weights(
    scores: &[f64],
    cells: &[usize],
    cell_count: usize,
    mode: GroupingMode,
    norm: Normalization,
) -> Vec<f64> {
    assert_eq!(scores.len(), cells.len());
    let m = scores.len();
    if m == 0 {
        return Vec::new();
    }
    if mode == GroupingMode::Base {
        return vec![1.0 / m as f64; m];
    }
    let mut out = vec![0.0; m];
    let mut members: Vec<usize> = Vec::with_capacity(m);
    let mut buf: Vec<f64> = Vec::with_capacity(m);
    for cell in 0..cell_count {
        members.clear();
        members.extend((0..m).filter(|&i| cells[i] == cell));
        buf.clear();
        buf.extend(members.iter().map(|&i| scores[i]));
        normalize_in_place(&mut buf, norm);
        for (&i, w) in members.iter().zip(&buf) {
            out[i] = w / cell_count as f64;
        }
    }
    out
}

/// `Σ weight_c · e_c`; zero vector for no routes.
pub fn evaluate_routes(features: &[Vec<f64>], weights: &[f64], dim: usize) -> Vec<f64> {
    assert_eq!(features.len(), weights.len());
    let mut out = vec![0.0; dim];
    for (f, w) in features.iter().zip(weights) {
        axpy(&mut out, *w, f);
    }
    out
}

/// `e + e_N`
pub fn enrich(embedding: &[f64], neighborhood: &[f64]) -> Vec<f64> {
    embedding.iter().zip(neighborhood).map(|(a, b)| a + b).collect()
}

/// Click probability `σ(ê_u · ê_v)`.
pub fn predict(user: &[f64], item: &[f64]) -> f64 {
    sigmoid(dot(user, item))
}

/// Unfused multi-query pipeline, used as the reference for the fused
/// implementation: per query, select → score → group-normalize; then average
/// weights and features over the queries.
pub fn msal_reference(routes: &[ChainRoute], params: &ParameterSet, config: &ModelConfig) -> Vec<f64> {
    let d = params.dim();
    if routes.is_empty() {
        return vec![0.0; d];
    }
    let n = params.query_count();
    let (cells, count) = grouping_cells(routes, config.grouping);
    let mut mean_w = vec![0.0; routes.len()];
    let mut mean_f = vec![vec![0.0; d]; routes.len()];
    for q in 0..n {
        let query = params.queries.row(q);
        let feats: Vec<Vec<f64>> = routes
            .iter()
            .map(|r| {
                let elems = route_elements(r, config.mask);
                let vecs: Vec<&[f64]> = elems.iter().map(|e| e.vector(params)).collect();
                selector_with(&vecs, query, params, config.normalization)
            })
            .collect();
        let scores: Vec<f64> = feats.iter().map(|f| route_score(f, params)).collect();
        let w = group_weights(&scores, &cells, count, config.grouping, config.normalization);
        for c in 0..routes.len() {
            mean_w[c] += w[c] / n as f64;
            axpy(&mut mean_f[c], 1.0 / n as f64, &feats[c]);
        }
    }
    match config.aggregation {
        super::Aggregation::SelectedFeature => evaluate_routes(&mean_f, &mean_w, d),
        super::Aggregation::TerminalEmbedding => {
            let terms: Vec<Vec<f64>> = routes
                .iter()
                .map(|r| params.nodes.row(r.terminal() as usize).to_vec())
                .collect();
            evaluate_routes(&terms, &mean_w, d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Matrix;

    const E: f64 = std::f64::consts::E;

    fn identity_params(d: usize) -> ParameterSet {
        let mut p = ParameterSet::init(1, 1, d, 1, 0);
        let mut w = Matrix::zeros(d, d);
        for i in 0..d {
            w.row_mut(i)[i] = 1.0;
        }
        p.key_weight = w;
        p.key_bias = vec![0.0; d];
        p
    }

    fn route(elements: &[u32]) -> ChainRoute {
        ChainRoute::new(elements.to_vec())
    }

    #[test]
    fn route_elements_by_mask() {
        let r = route(&[0, 5, 1]);
        assert_eq!(
            route_elements(&r, AblationMask::FULL),
            vec![Emb::Node(0), Emb::Relation(5), Emb::Node(1)]
        );
        let no_r: AblationMask = "UHT".parse().unwrap();
        assert_eq!(route_elements(&r, no_r), vec![Emb::Node(0), Emb::Node(1)]);
        let deep = route(&[10, 1, 11, 2, 12]);
        let no_h: AblationMask = "URT".parse().unwrap();
        assert_eq!(
            route_elements(&deep, no_h),
            vec![Emb::Node(10), Emb::Relation(1), Emb::Relation(2), Emb::Node(12)]
        );
        // H only on a depth-1 route has nothing to keep: terminal fallback
        assert_eq!(route_elements(&r, "H".parse().unwrap()), vec![Emb::Node(1)]);
    }

    #[test]
    fn route_elements_count_matches_classification() {
        for depth in 1..=3usize {
            let elems: Vec<u32> = (0..(2 * depth + 1) as u32).collect();
            let r = route(&elems);
            for m in AblationMask::all() {
                let expected = usize::from(m.user_item)
                    + depth * usize::from(m.relation)
                    + (depth - 1) * usize::from(m.head)
                    + usize::from(m.tail);
                assert_eq!(route_elements(&r, m).len(), expected.max(1), "{m} depth {depth}");
            }
        }
    }

    #[test]
    fn selector_examples() {
        let p = identity_params(2);
        let one = [0.3, -0.2];
        assert_eq!(knowledge_selector(&[&one], &[1.0, 0.0], &p), one.to_vec());

        let (e1, e2) = ([1.0, 0.0], [0.0, 1.0]);
        let out = knowledge_selector(&[&e1, &e2], &[1.0, 0.0], &p);
        assert!((out[0] - E / (E + 1.0)).abs() < 1e-12);
        assert!((out[1] - 1.0 / (E + 1.0)).abs() < 1e-12);
        assert!((out[0] - 0.7311).abs() < 1e-4 && (out[1] - 0.2689).abs() < 1e-4);

        let same = [0.4, 0.9];
        let out = knowledge_selector(&[&same, &same, &same], &[-3.0, 7.0], &p);
        assert!(out.iter().zip(same).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn relu_gating_gives_uniform_average() {
        let mut p = identity_params(3);
        p.key_bias = vec![-1e6; 3];
        let (a, b) = ([1.0, 2.0, 3.0], [-1.0, 0.0, 5.0]);
        let out = knowledge_selector(&[&a, &b], &[0.7, -0.1, 0.2], &p);
        assert_eq!(out, vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn score_examples() {
        let mut p = identity_params(2);
        p.score_weight = vec![0.0, 0.0];
        p.score_bias = 0.3;
        assert_eq!(route_score(&[5.0, -2.0], &p), 0.3);
        p.score_weight = vec![1.0, 1.0];
        p.score_bias = 0.0;
        assert_eq!(route_score(&[0.5, 0.25], &p), 0.75);
        assert!((route_score(&[1.5, 0.75], &p) - 3.0 * route_score(&[0.5, 0.25], &p)).abs() < 1e-15);
    }

    #[test]
    fn grouping_examples() {
        let routes: Vec<ChainRoute> = (0..4).map(|i| route(&[0, 0, i])).collect();
        assert_eq!(group_normalize(&[1.0, 5.0, -2.0, 0.0], &routes, GroupingMode::Base), vec![0.25; 4]);
        let w = group_normalize(&[0.4; 4], &routes, GroupingMode::Global);
        assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-15));

        let mixed = vec![route(&[0, 0, 1]), route(&[0, 0, 2]), route(&[0, 0, 1, 0, 3])];
        let w = group_normalize(&[1.0, 0.0, 123.0], &mixed, GroupingMode::Horizontal);
        assert!((w[0] - 0.5 * E / (E + 1.0)).abs() < 1e-12);
        assert!((w[1] - 0.5 / (E + 1.0)).abs() < 1e-12);
        assert!((w[2] - 0.5).abs() < 1e-12);

        // vertical: first-hop 1 holds routes 0 and 2, first-hop 2 holds route 1
        let w = group_normalize(&[0.0, 9.0, 0.0], &mixed, GroupingMode::Vertical);
        assert!((w[0] - 0.25).abs() < 1e-12 && (w[2] - 0.25).abs() < 1e-12);
        assert!((w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn raw_ratio_normalization() {
        let mut s = vec![1.0, 3.0];
        normalize_in_place(&mut s, Normalization::RawRatio);
        assert_eq!(s, vec![0.25, 0.75]);
        let mut z = vec![1.0, -1.0];
        normalize_in_place(&mut z, Normalization::RawRatio);
        assert_eq!(z, vec![0.5, 0.5]);
    }

    #[test]
    fn aggregation_enrichment_prediction() {
        assert_eq!(evaluate_routes(&[], &[], 3), vec![0.0; 3]);
        let f = vec![vec![0.2, 0.4]];
        assert_eq!(evaluate_routes(&f, &[1.0], 2), vec![0.2, 0.4]);
        let f = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(evaluate_routes(&f, &[0.75, 0.25], 2), vec![0.75, 0.25]);

        assert_eq!(enrich(&[1.0, 2.0], &[0.0, 0.0]), vec![1.0, 2.0]);
        assert_eq!(enrich(&[1.0, 2.0], &[0.5, -1.0]), vec![1.5, 1.0]);
        assert_eq!(enrich(&[2.0, 1.0], &[-1.0, 0.5]), vec![1.0, 1.5]);

        assert_eq!(predict(&[1.0, 0.0], &[0.0, 1.0]), 0.5);
        assert!((predict(&[3f64.ln()], &[1.0]) - 0.75).abs() < 1e-15);
        assert!((predict(&[10.0], &[1.0]) - 0.9999546).abs() < 1e-7);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
