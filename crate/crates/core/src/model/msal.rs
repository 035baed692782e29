//! Fused multi-query attention over a neighborhood sample, with a recorded
//! forward pass that can be replayed backward.
//!
//! Keys depend only on the embedding row, so they are computed once per
//! distinct row ("slot") of the sample and shared by every route and query.

use std::collections::HashMap;

use super::config::{Aggregation, GroupingMode, ModelConfig, Normalization};
use super::ops::{self, axpy, dot, Emb};
use super::params::{Gradients, ParameterSet};
use crate::graph::NeighborhoodSample;

/// Gradient contributions of one scored pair: touched embedding rows plus the
/// small shared tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrad {
    pub rows: Vec<(Emb, Vec<f64>)>,
    pub queries: Vec<f64>,
    pub key_weight: Vec<f64>,
    pub key_bias: Vec<f64>,
    pub score_weight: Vec<f64>,
    pub score_bias: f64,
}

impl SparseGrad {
    pub fn new(dim: usize, queries: usize) -> Self {
        SparseGrad {
            rows: Vec::new(),
            queries: vec![0.0; queries * dim],
            key_weight: vec![0.0; dim * dim],
            key_bias: vec![0.0; dim],
            score_weight: vec![0.0; dim],
            score_bias: 0.0,
        }
    }

    pub fn add_row(&mut self, emb: Emb, grad: Vec<f64>) {
        self.rows.push((emb, grad));
    }

    /// Accumulates into dense gradients in a fixed order.
    pub fn add_into(&self, grads: &mut Gradients) {
        for (emb, g) in &self.rows {
            let row = match *emb {
                Emb::Node(n) => grads.nodes.row_mut(n as usize),
                Emb::Relation(r) => grads.relations.row_mut(r as usize),
            };
            axpy(row, 1.0, g);
        }
        axpy(grads.queries.as_mut_slice(), 1.0, &self.queries);
        axpy(grads.key_weight.as_mut_slice(), 1.0, &self.key_weight);
        axpy(&mut grads.key_bias, 1.0, &self.key_bias);
        axpy(&mut grads.score_weight, 1.0, &self.score_weight);
        grads.score_bias += self.score_bias;
    }
}

/// Everything the backward pass needs from one MSAL evaluation.
#[derive(Debug, Clone)]
pub struct MsalTrace {
    config: ModelConfig,
    dim: usize,
    queries: usize,
    slots: Vec<Emb>,
    x: Vec<f64>,
    z: Vec<f64>,
    k: Vec<f64>,
    route_offsets: Vec<usize>,
    route_slots: Vec<u32>,
    terminal_slots: Vec<u32>,
    cells: Vec<usize>,
    cell_count: usize,
    /// `[query][element]` selector weights.
    alpha: Vec<f64>,
    /// `[query][route]` raw selector score sums (raw-ratio backward).
    pi_sums: Vec<f64>,
    /// `[query][route][d]`
    feats: Vec<f64>,
    /// `[query][route]`
    scores: Vec<f64>,
    /// `[query][route]`
    weights: Vec<f64>,
    mean_weights: Vec<f64>,
    /// `[route][d]`
    mean_feats: Vec<f64>,
    output: Vec<f64>,
}

impl MsalTrace {
    pub fn forward(sample: &NeighborhoodSample, params: &ParameterSet, config: &ModelConfig) -> Self {
        let d = params.dim();
        let nq = params.query_count();
        let routes = &sample.routes;
        let r_count = routes.len();

        let mut slot_of: HashMap<Emb, u32> = HashMap::new();
        let mut slots: Vec<Emb> = Vec::new();
        let mut intern = |e: Emb, slots: &mut Vec<Emb>| -> u32 {
            *slot_of.entry(e).or_insert_with(|| {
                slots.push(e);
                (slots.len() - 1) as u32
            })
        };
        let mut route_offsets = Vec::with_capacity(r_count + 1);
        let mut route_slots = Vec::new();
        let mut terminal_slots = Vec::new();
        let mut scratch = Vec::new();
        route_offsets.push(0);
        for route in routes {
            scratch.clear();
            ops::push_route_elements(route.elements(), config.mask, &mut scratch);
            for &e in &scratch {
                route_slots.push(intern(e, &mut slots));
            }
            route_offsets.push(route_slots.len());
            if config.aggregation == Aggregation::TerminalEmbedding {
                terminal_slots.push(intern(Emb::Node(route.terminal()), &mut slots));
            }
        }

        let s_count = slots.len();
        let mut x = vec![0.0; s_count * d];
        let mut z = vec![0.0; s_count * d];
        let mut k = vec![0.0; s_count * d];
        for (s, emb) in slots.iter().enumerate() {
            let xs = &mut x[s * d..(s + 1) * d];
            xs.copy_from_slice(emb.vector(params));
            let zs = &mut z[s * d..(s + 1) * d];
            params.key_weight.matvec_into(xs, zs);
            for ((zi, bi), ki) in zs.iter_mut().zip(&params.key_bias).zip(&mut k[s * d..(s + 1) * d]) {
                *zi += bi;
                *ki = zi.max(0.0);
            }
        }

        let (cells, cell_count) = ops::grouping_cells(routes, config.grouping);
        let e_count = route_slots.len();
        let mut alpha = vec![0.0; nq * e_count];
        let mut pi_sums = vec![0.0; nq * r_count];
        let mut feats = vec![0.0; nq * r_count * d];
        let mut scores = vec![0.0; nq * r_count];
        let mut weights = vec![0.0; nq * r_count];
        let mut mean_weights = vec![0.0; r_count];
        let mut mean_feats = vec![0.0; r_count * d];
        let inv_n = 1.0 / nq as f64;

        for j in 0..nq {
            let q = params.queries.row(j);
            for c in 0..r_count {
                let (lo, hi) = (route_offsets[c], route_offsets[c + 1]);
                let a = &mut alpha[j * e_count + lo..j * e_count + hi];
                for (ai, &s) in a.iter_mut().zip(&route_slots[lo..hi]) {
                    *ai = dot(q, &k[s as usize * d..(s as usize + 1) * d]);
                }
                pi_sums[j * r_count + c] = a.iter().sum();
                ops::normalize_in_place(a, config.normalization);
                let f = &mut feats[(j * r_count + c) * d..(j * r_count + c + 1) * d];
                for (ai, &s) in a.iter().zip(&route_slots[lo..hi]) {
                    axpy(f, *ai, &x[s as usize * d..(s as usize + 1) * d]);
                }
                scores[j * r_count + c] = dot(&params.score_weight, f) + params.score_bias;
                axpy(&mut mean_feats[c * d..(c + 1) * d], inv_n, f);
            }
            let w = ops::group_weights(
                &scores[j * r_count..(j + 1) * r_count],
                &cells,
                cell_count,
                config.grouping,
                config.normalization,
            );
            for (c, wc) in w.iter().enumerate() {
                weights[j * r_count + c] = *wc;
                mean_weights[c] += wc * inv_n;
            }
        }

        let mut output = vec![0.0; d];
        for c in 0..r_count {
            let v = match config.aggregation {
                Aggregation::SelectedFeature => &mean_feats[c * d..(c + 1) * d],
                Aggregation::TerminalEmbedding => {
                    let s = terminal_slots[c] as usize;
                    &x[s * d..(s + 1) * d]
                }
            };
            axpy(&mut output, mean_weights[c], v);
        }

        MsalTrace {
            config: *config,
            dim: d,
            queries: nq,
            slots,
            x,
            z,
            k,
            route_offsets,
            route_slots,
            terminal_slots,
            cells,
            cell_count,
            alpha,
            pi_sums,
            feats,
            scores,
            weights,
            mean_weights,
            mean_feats,
            output,
        }
    }

    /// Neighborhood vector `e_N`.
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Final per-route weights (averaged over queries).
    pub fn route_weights(&self) -> &[f64] {
        &self.mean_weights
    }

    pub fn route_count(&self) -> usize {
        self.mean_weights.len()
    }

    /// Distinct embedding rows touched by the sample.
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Propagates `∂L/∂e_N` into `grad`.
    pub fn backward(&self, params: &ParameterSet, grad_out: &[f64], grad: &mut SparseGrad) {
        let d = self.dim;
        let nq = self.queries;
        let r_count = self.route_count();
        if r_count == 0 {
            return;
        }
        let e_count = self.route_slots.len();
        let inv_n = 1.0 / nq as f64;
        let mut dx = vec![0.0; self.slots.len() * d];
        let mut dk = vec![0.0; self.slots.len() * d];

        // ∂L/∂ω̄_c
        let mut d_mean_w = vec![0.0; r_count];
        for c in 0..r_count {
            match self.config.aggregation {
                Aggregation::SelectedFeature => {
                    d_mean_w[c] = dot(grad_out, &self.mean_feats[c * d..(c + 1) * d]);
                }
                Aggregation::TerminalEmbedding => {
                    let s = self.terminal_slots[c] as usize;
                    d_mean_w[c] = dot(grad_out, &self.x[s * d..(s + 1) * d]);
                    axpy(&mut dx[s * d..(s + 1) * d], self.mean_weights[c], grad_out);
                }
            }
        }

        let mut ds = vec![0.0; r_count];
        let mut cell_acc = vec![0.0; self.cell_count];
        let mut cell_sum = vec![0.0; self.cell_count];
        let mut d_feat = vec![0.0; d];
        let mut a_buf: Vec<f64> = Vec::new();
        for j in 0..nq {
            let w = &self.weights[j * r_count..(j + 1) * r_count];
            let s = &self.scores[j * r_count..(j + 1) * r_count];
            self.group_backward(w, s, &d_mean_w, inv_n, &mut ds, &mut cell_acc, &mut cell_sum);

            let q = params.queries.row(j);
            for c in 0..r_count {
                d_feat.iter_mut().for_each(|v| *v = 0.0);
                axpy(&mut d_feat, ds[c], &params.score_weight);
                if self.config.aggregation == Aggregation::SelectedFeature {
                    axpy(&mut d_feat, self.mean_weights[c] * inv_n, grad_out);
                }
                let f = &self.feats[(j * r_count + c) * d..(j * r_count + c + 1) * d];
                axpy(&mut grad.score_weight, ds[c], f);
                grad.score_bias += ds[c];

                let (lo, hi) = (self.route_offsets[c], self.route_offsets[c + 1]);
                let alpha = &self.alpha[j * e_count + lo..j * e_count + hi];
                let slots = &self.route_slots[lo..hi];
                a_buf.clear();
                a_buf.extend(
                    slots
                        .iter()
                        .map(|&sl| dot(&d_feat, &self.x[sl as usize * d..(sl as usize + 1) * d])),
                );
                let mean_a: f64 = alpha.iter().zip(&a_buf).map(|(al, a)| al * a).sum();
                let pi_sum = self.pi_sums[j * r_count + c];
                for ((&sl, &al), &a) in slots.iter().zip(alpha).zip(&a_buf) {
                    let sl = sl as usize;
                    axpy(&mut dx[sl * d..(sl + 1) * d], al, &d_feat);
                    let d_pi = match self.config.normalization {
                        Normalization::Softmax => al * (a - mean_a),
                        Normalization::RawRatio if pi_sum == 0.0 => 0.0,
                        Normalization::RawRatio => (a - mean_a) / pi_sum,
                    };
                    if d_pi != 0.0 {
                        axpy(&mut grad.queries[j * d..(j + 1) * d], d_pi, &self.k[sl * d..(sl + 1) * d]);
                        axpy(&mut dk[sl * d..(sl + 1) * d], d_pi, q);
                    }
                }
            }
        }

        // keys: k = relu(W x + b)
        let w = params.key_weight.as_slice();
        for (sl, emb) in self.slots.iter().enumerate() {
            let dxs = &mut dx[sl * d..(sl + 1) * d];
            let xs = &self.x[sl * d..(sl + 1) * d];
            for i in 0..d {
                if self.z[sl * d + i] <= 0.0 {
                    continue;
                }
                let dz = dk[sl * d + i];
                if dz == 0.0 {
                    continue;
                }
                grad.key_bias[i] += dz;
                axpy(&mut grad.key_weight[i * d..(i + 1) * d], dz, xs);
                axpy(dxs, dz, &w[i * d..(i + 1) * d]);
            }
            grad.add_row(*emb, dxs.to_vec());
        }
    }

    /// `∂L/∂s` for one query given `∂L/∂ω̄`.
    #[allow(clippy::too_many_arguments)]
    fn group_backward(
        &self,
        weights: &[f64],
        scores: &[f64],
        d_mean_w: &[f64],
        inv_n: f64,
        ds: &mut [f64],
        cell_acc: &mut [f64],
        cell_sum: &mut [f64],
    ) {
        if self.config.grouping == GroupingMode::Base {
            ds.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let k = self.cell_count as f64;
        cell_acc.iter_mut().for_each(|v| *v = 0.0);
        cell_sum.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..weights.len() {
            // Σ_{c' ∈ cell} p_{c'} G_{c'} with p = K·ω
            cell_acc[self.cells[c]] += k * weights[c] * d_mean_w[c] * inv_n;
            cell_sum[self.cells[c]] += scores[c];
        }
        for c in 0..weights.len() {
            let g = d_mean_w[c] * inv_n;
            let cell = self.cells[c];
            ds[c] = match self.config.normalization {
                Normalization::Softmax => weights[c] * (g - cell_acc[cell]),
                Normalization::RawRatio if cell_sum[cell] == 0.0 => 0.0,
                Normalization::RawRatio => (g - cell_acc[cell]) / (k * cell_sum[cell]),
            };
        }
    }
}

/// Neighborhood vector of `sample.root`.
pub fn msal(sample: &NeighborhoodSample, params: &ParameterSet, config: &ModelConfig) -> Vec<f64> {
    MsalTrace::forward(sample, params, config).output
}

/// Final per-route weights for `sample` (instrumentation hook).
pub fn route_weights(sample: &NeighborhoodSample, params: &ParameterSet, config: &ModelConfig) -> Vec<f64> {
    MsalTrace::forward(sample, params, config).mean_weights
}
