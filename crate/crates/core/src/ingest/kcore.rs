use std::collections::HashMap;

/// Repeatedly drops pairs whose user or item has fewer than `k` pairs until
/// nothing changes. Surviving pairs keep their input order.
pub fn k_core_filter(positives: &[(u32, u32)], k: usize) -> Vec<(u32, u32)> {
    let mut current = positives.to_vec();
    loop {
        let mut user_deg: HashMap<u32, usize> = HashMap::new();
        let mut item_deg: HashMap<u32, usize> = HashMap::new();
        for &(u, i) in &current {
            *user_deg.entry(u).or_default() += 1;
            *item_deg.entry(i).or_default() += 1;
        }
        let before = current.len();
        current.retain(|(u, i)| user_deg[u] >= k && item_deg[i] >= k);
        if current.len() == before {
            return current;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_input() {
        assert!(k_core_filter(&[], 20).is_empty());
    }

    #[test]
    fn cascade_empties_small_example() {
        // A=0, B=1; i1=0, i2=1
        assert!(k_core_filter(&[(0, 0), (0, 1), (1, 0)], 2).is_empty());
    }

    #[test]
    fn k_one_is_identity() {
        let pairs = vec![(3, 1), (0, 2), (5, 5)];
        assert_eq!(k_core_filter(&pairs, 1), pairs);
    }

    proptest! {
        #[test]
        fn survivors_meet_degree_and_filter_is_idempotent(
            pairs in proptest::collection::btree_set((0u32..15, 0u32..15), 0..150),
            k in 1usize..6,
        ) {
            let pairs: Vec<_> = pairs.into_iter().collect();
            let once = k_core_filter(&pairs, k);
            let mut u: HashMap<u32, usize> = HashMap::new();
            let mut i: HashMap<u32, usize> = HashMap::new();
            for &(a, b) in &once {
                *u.entry(a).or_default() += 1;
                *i.entry(b).or_default() += 1;
            }
            prop_assert!(u.values().all(|&d| d >= k));
            prop_assert!(i.values().all(|&d| d >= k));
            prop_assert_eq!(k_core_filter(&once, k), once);
        }
    }
}
