use crate::model::{dot, sigmoid, ParameterSet};

use super::ContrastiveLogit;

pub const PROB_EPS: f64 = 1e-7;

/// Binary cross-entropy with the prediction clamped to `[ε, 1−ε]`.
pub fn bce_loss(prob: f64, label: u8) -> f64 {
    let p = prob.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// BCE as a function of the logit, with `∂/∂logit`. The derivative is zero
/// where the clamp is active.
pub(crate) fn bce_with_grad(logit: f64, label: u8) -> (f64, f64) {
    let p = sigmoid(logit);
    let loss = bce_loss(p, label);
    let grad = if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
        0.0
    } else {
        p - f64::from(label)
    };
    (loss, grad)
}

/// In-batch contrastive loss over positive pairs `(users[i], items[i])`:
/// each user's own item against every other item of the batch.
pub fn contrastive_loss(users: &[Vec<f64>], items: &[Vec<f64>], temperature: f64) -> f64 {
    contrastive_with_grad(users, items, temperature, ContrastiveLogit::Sigmoid, false).0
}

/// Loss and, when `want_grad`, gradients w.r.t. each user and item vector.
pub(crate) fn contrastive_with_grad(
    users: &[Vec<f64>],
    items: &[Vec<f64>],
    temperature: f64,
    logit: ContrastiveLogit,
    want_grad: bool,
) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = users.len();
    assert_eq!(m, items.len());
    let d = users.first().map_or(0, Vec::len);
    let mut du = if want_grad { vec![vec![0.0; d]; m] } else { Vec::new() };
    let mut dv = if want_grad { vec![vec![0.0; d]; m] } else { Vec::new() };
    if m == 0 {
        return (0.0, du, dv);
    }
    let mut total = 0.0;
    let mut logits = vec![0.0; m];
    let mut slopes = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let a = dot(&users[i], &items[j]);
            match logit {
                ContrastiveLogit::Sigmoid => {
                    let s = sigmoid(a);
                    logits[j] = s / temperature;
                    slopes[j] = s * (1.0 - s) / temperature;
                }
                ContrastiveLogit::Dot => {
                    logits[j] = a / temperature;
                    slopes[j] = 1.0 / temperature;
                }
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        total += max + sum.ln() - logits[i];
        if want_grad {
            for j in 0..m {
                let p = (logits[j] - max).exp() / sum;
                let g = (p - f64::from(u8::from(i == j))) / m as f64 * slopes[j];
                if g == 0.0 {
                    continue;
                }
                for t in 0..d {
                    du[i][t] += g * items[j][t];
                    dv[j][t] += g * users[i][t];
                }
            }
        }
    }
    (total / m as f64, du, dv)
}

/// `λ · Σ θ²` over every trainable tensor.
pub fn l2_penalty(params: &ParameterSet, lambda: f64) -> f64 {
    lambda * params.squared_norm()
}

/// The three loss terms of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub bce: f64,
    pub contrastive: f64,
    pub l2: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.bce + self.contrastive + self.l2
    }
}
