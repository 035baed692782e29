use crate::error::{Error, Result};

/// A model score attached to a labeled pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub user: u32,
    pub item: u32,
    pub score: f64,
    pub label: u8,
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Sort-based, `O(m log m)`.
pub fn auc(pairs: &[ScoredPair]) -> Result<f64> {
    let positives = pairs.iter().filter(|p| p.label == 1).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric(format!(
            "AUC needs both classes ({positives} positives, {negatives} negatives)"
        )));
    }
    if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
        return Err(Error::Metric(format!("non-finite score for ({}, {})", p.user, p.item)));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[a].score.total_cmp(&pairs[b].score));
    // Sum of positive ranks with ties given their average rank.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pairs[order[j + 1]].score == pairs[order[i]].score {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_block = order[i..=j].iter().filter(|&&k| pairs[k].label == 1).count();
        rank_sum += avg_rank * pos_in_block as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Accuracy and positive-class F1 at `score >= threshold`.
pub fn acc_f1(pairs: &[ScoredPair], threshold: f64) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::Metric("accuracy of an empty set".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for p in pairs {
        match (p.score >= threshold, p.label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let acc = (tp + tn) as f64 / pairs.len() as f64;
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((acc, f1))
}
