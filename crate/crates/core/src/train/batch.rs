use crate::exec::Execution;
use crate::graph::{sample_neighborhood, NeighborhoodSample, UnifiedGraph};
use crate::ingest::LabeledPair;
use crate::model::{dot, Emb, Gradients, MsalTrace, ParameterSet, SparseGrad};
use crate::rng::{self, Rng};

use super::loss::{bce_with_grad, contrastive_with_grad, LossBreakdown};
use super::HyperParams;

/// User-side and item-side neighborhoods for one scored pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSamples {
    pub user: NeighborhoodSample,
    pub item: NeighborhoodSample,
}

/// Samples both sides of `pair`, never walking the pair's own interaction.
pub fn draw_pair_samples(graph: &UnifiedGraph, pair: &LabeledPair, hyper: &HyperParams, rng: &mut Rng) -> PairSamples {
    let u = graph.user_node(pair.user);
    let v = graph.item_node(pair.item);
    let exclude = Some((u, v));
    PairSamples {
        user: sample_neighborhood(graph, u, hyper.user_depth, hyper.user_fanout, rng, exclude),
        item: sample_neighborhood(graph, v, hyper.item_depth, hyper.item_fanout, rng, exclude),
    }
}

/// Fresh samples for a training batch; `offset` is the position of
/// `pairs[0]` within the epoch.
pub fn training_samples(
    graph: &UnifiedGraph,
    pairs: &[LabeledPair],
    hyper: &HyperParams,
    epoch: usize,
    offset: usize,
    exec: Execution,
) -> Vec<PairSamples> {
    exec.map(pairs, |i, pair| {
        let mut rng = rng::rng_from(
            hyper.seed,
            &[rng::stream::TRAIN_SAMPLE, epoch as u64, (offset + i) as u64],
        );
        draw_pair_samples(graph, pair, hyper, &mut rng)
    })
}

struct PairForward {
    user: MsalTrace,
    item: MsalTrace,
    user_vec: Vec<f64>,
    item_vec: Vec<f64>,
    logit: f64,
}

fn forward_pair(
    params: &ParameterSet,
    graph: &UnifiedGraph,
    pair: &LabeledPair,
    samples: &PairSamples,
    hyper: &HyperParams,
) -> PairForward {
    let cfg = hyper.model_config();
    let user = MsalTrace::forward(&samples.user, params, &cfg);
    let item = MsalTrace::forward(&samples.item, params, &cfg);
    let user_vec = crate::model::enrich(params.nodes.row(graph.user_node(pair.user) as usize), user.output());
    let item_vec = crate::model::enrich(params.nodes.row(graph.item_node(pair.item) as usize), item.output());
    let logit = dot(&user_vec, &item_vec);
    PairForward {
        user,
        item,
        user_vec,
        item_vec,
        logit,
    }
}

fn objective(
    params: &ParameterSet,
    graph: &UnifiedGraph,
    pairs: &[LabeledPair],
    samples: &[PairSamples],
    hyper: &HyperParams,
    exec: Execution,
    want_grad: bool,
) -> (LossBreakdown, Option<Gradients>) {
    assert_eq!(pairs.len(), samples.len(), "one sample per pair");
    let forwards: Vec<PairForward> = exec.map(pairs, |i, p| forward_pair(params, graph, p, &samples[i], hyper));
    let d = params.dim();
    let m = pairs.len();
    let mut loss = LossBreakdown::default();
    let mut d_user = vec![vec![0.0; d]; if want_grad { m } else { 0 }];
    let mut d_item = vec![vec![0.0; d]; if want_grad { m } else { 0 }];

    if m > 0 {
        let mut bce = 0.0;
        for (i, (f, p)) in forwards.iter().zip(pairs).enumerate() {
            let (l, g) = bce_with_grad(f.logit, p.label);
            bce += l;
            if want_grad && g != 0.0 {
                let g = g / m as f64;
                for t in 0..d {
                    d_user[i][t] += g * f.item_vec[t];
                    d_item[i][t] += g * f.user_vec[t];
                }
            }
        }
        loss.bce = bce / m as f64;
    }

    if hyper.use_contrastive {
        let pos: Vec<usize> = (0..m).filter(|&i| pairs[i].is_positive()).collect();
        if !pos.is_empty() {
            let users: Vec<Vec<f64>> = pos.iter().map(|&i| forwards[i].user_vec.clone()).collect();
            let items: Vec<Vec<f64>> = pos.iter().map(|&i| forwards[i].item_vec.clone()).collect();
            let (l, du, dv) =
                contrastive_with_grad(&users, &items, hyper.temperature, hyper.contrastive_logit, want_grad);
            loss.contrastive = l;
            if want_grad {
                for (k, &i) in pos.iter().enumerate() {
                    for t in 0..d {
                        d_user[i][t] += du[k][t];
                        d_item[i][t] += dv[k][t];
                    }
                }
            }
        }
    }

    loss.l2 = hyper.l2 * params.squared_norm();
    if !want_grad {
        return (loss, None);
    }

    let nq = params.query_count();
    let partials: Vec<SparseGrad> = exec.map(&forwards, |i, f| {
        let mut g = SparseGrad::new(d, nq);
        g.add_row(Emb::Node(graph.user_node(pairs[i].user)), d_user[i].clone());
        g.add_row(Emb::Node(graph.item_node(pairs[i].item)), d_item[i].clone());
        f.user.backward(params, &d_user[i], &mut g);
        f.item.backward(params, &d_item[i], &mut g);
        g
    });
    let mut grads = params.zeros_like();
    for g in &partials {
        g.add_into(&mut grads);
    }
    if hyper.l2 > 0.0 {
        grads.add_scaled(params, 2.0 * hyper.l2);
    }
    (loss, Some(grads))
}

/// Composite loss of a batch with fixed samples.
pub fn batch_loss(
    params: &ParameterSet,
    graph: &UnifiedGraph,
    pairs: &[LabeledPair],
    samples: &[PairSamples],
    hyper: &HyperParams,
    exec: Execution,
) -> LossBreakdown {
    objective(params, graph, pairs, samples, hyper, exec, false).0
}

/// Composite loss and its exact gradient for every parameter tensor.
pub fn batch_loss_and_grad(
    params: &ParameterSet,
    graph: &UnifiedGraph,
    pairs: &[LabeledPair],
    samples: &[PairSamples],
    hyper: &HyperParams,
    exec: Execution,
) -> (LossBreakdown, Gradients) {
    let (loss, grads) = objective(params, graph, pairs, samples, hyper, exec, true);
    (loss, grads.expect("gradients requested"))
}
