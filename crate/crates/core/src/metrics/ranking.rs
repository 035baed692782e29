use std::collections::HashSet;

use crate::error::{Error, Result};

/// Candidates sorted by descending score (ties: lower id first), truncated
/// to `k`.
pub fn topk_rank(candidates: &[u32], score: impl Fn(u32) -> f64, k: usize) -> Vec<u32> {
    let mut scored: Vec<(f64, u32)> = candidates.iter().map(|&c| (score(c), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, c)| c).collect()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Metric("K must be positive".into()));
    }
    Ok(())
}

/// `|top-K ∩ relevant| / K`
pub fn precision_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> Result<f64> {
    check_k(k)?;
    let hits = ranked.iter().take(k).filter(|i| relevant.contains(i)).count();
    Ok(hits as f64 / k as f64)
}

/// Binary-gain NDCG with `log2(rank + 1)` discounts.
pub fn ndcg_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Ok(0.0);
    }
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.contains(i))
        .map(|(pos, _)| discount(pos + 1))
        .sum();
    let ideal: f64 = (1..=k.min(relevant.len())).map(discount).sum();
    Ok(dcg / ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[u32]) -> HashSet<u32> {
        items.iter().copied().collect()
    }

    #[test]
    fn ranking_order_and_ties() {
        let scores = [0.2, 0.9, 0.9, 0.1];
        let ranked = topk_rank(&[0, 1, 2, 3], |i| scores[i as usize], 10);
        assert_eq!(ranked, vec![1, 2, 0, 3]);
        assert_eq!(topk_rank(&[3, 2, 1, 0], |i| scores[i as usize], 2), vec![1, 2]);
        let moved = topk_rank(&[0, 1, 2, 3], |i| (scores[i as usize] * 5.0).exp(), 10);
        assert_eq!(moved, ranked);
    }

    #[test]
    fn precision_examples() {
        assert_eq!(precision_at_k(&[1, 2], &set(&[1, 2, 3]), 2).unwrap(), 1.0);
        assert_eq!(precision_at_k(&[1, 2], &set(&[5]), 2).unwrap(), 0.0);
        assert_eq!(precision_at_k(&[7, 8], &set(&[8]), 2).unwrap(), 0.5);
        assert!(precision_at_k(&[1], &set(&[1]), 0).is_err());
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[1, 2, 3], &set(&[1, 2]), 3).unwrap(), 1.0);
        let v = ndcg_at_k(&[4, 9], &set(&[9]), 2).unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[1, 2], &HashSet::new(), 2).unwrap(), 0.0);
        assert!(ndcg_at_k(&[1], &set(&[1]), 0).is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_ideal_iff_prefix_relevant(
            ranked in proptest::collection::vec(0u32..30, 0..30).prop_map(|mut v| { v.sort(); v.dedup(); v }),
            relevant in proptest::collection::hash_set(0u32..30, 0..10),
            k in 1usize..15,
        ) {
            let p = precision_at_k(&ranked, &relevant, k).unwrap();
            let n = ndcg_at_k(&ranked, &relevant, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
            let need = k.min(relevant.len());
            let ideal = need > 0 && ranked.len() >= need && ranked[..need].iter().all(|i| relevant.contains(i));
            prop_assert_eq!((n - 1.0).abs() < 1e-12, ideal);
        }
    }
}
