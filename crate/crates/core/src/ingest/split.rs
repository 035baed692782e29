use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::IdMap;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// A `(user, item)` pair with a binary click label. Ids are dense user and
/// item indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPair {
    pub user: u32,
    pub item: u32,
    pub label: u8,
}

impl LabeledPair {
    pub fn positive(user: u32, item: u32) -> Self {
        LabeledPair {
            user,
            item,
            label: 1,
        }
    }

    pub fn negative(user: u32, item: u32) -> Self {
        LabeledPair {
            user,
            item,
            label: 0,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetSplit {
    pub train: Vec<LabeledPair>,
    pub valid: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    pub users: IdMap,
    pub items: IdMap,
}

impl DatasetSplit {
    pub fn positives(&self) -> impl Iterator<Item = &LabeledPair> {
        self.train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .filter(|p| p.is_positive())
    }

    pub fn train_positive_pairs(&self) -> Vec<(u32, u32)> {
        self.train
            .iter()
            .filter(|p| p.is_positive())
            .map(|p| (p.user, p.item))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            valid: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Shuffles the positives and cuts them into train/valid/test blocks of
/// `floor(N·train)`, `floor(N·valid)` and the remainder.
pub fn split(
    positives: &[(u32, u32)],
    ratios: SplitRatios,
    seed: u64,
) -> Result<(Vec<LabeledPair>, Vec<LabeledPair>, Vec<LabeledPair>)> {
    ratios.validate()?;
    if positives.len() < 3 {
        return Err(Error::Dataset(format!(
            "need at least 3 positive interactions to split, got {}",
            positives.len()
        )));
    }
    let mut shuffled: Vec<LabeledPair> = positives
        .iter()
        .map(|&(u, i)| LabeledPair::positive(u, i))
        .collect();
    shuffled.shuffle(&mut rng::rng_from(seed, &[rng::stream::SPLIT]));
    let n = shuffled.len() as f64;
    let n_train = (n * ratios.train + 1e-9).floor() as usize;
    let n_valid = (n * ratios.valid + 1e-9).floor() as usize;
    let test = shuffled.split_off(n_train + n_valid);
    let valid = shuffled.split_off(n_train);
    Ok((shuffled, valid, test))
}

/// Draws negatives from items a user never interacted with in any split.
/// Drawn items are remembered, so negatives are also unique per user across
/// every call on the same sampler.
pub struct NegativeSampler {
    n_items: u32,
    taken: HashMap<u32, HashSet<u32>>,
    exhausted: HashSet<u32>,
}

impl NegativeSampler {
    pub fn new<'a>(all_positives: impl IntoIterator<Item = &'a LabeledPair>, n_items: usize) -> Self {
        let mut taken: HashMap<u32, HashSet<u32>> = HashMap::new();
        for p in all_positives {
            taken.entry(p.user).or_default().insert(p.item);
        }
        NegativeSampler {
            n_items: n_items as u32,
            taken,
            exhausted: HashSet::new(),
        }
    }

    pub fn sample(&mut self, positives: &[LabeledPair], ratio: usize, rng: &mut Rng) -> Vec<LabeledPair> {
        let mut out = Vec::with_capacity(positives.len() * ratio);
        for p in positives.iter().filter(|p| p.is_positive()) {
            let seen = self.taken.entry(p.user).or_default();
            for _ in 0..ratio {
                if seen.len() >= self.n_items as usize {
                    if self.exhausted.insert(p.user) {
                        log::warn!(
                            "user {} has interacted with or been assigned every item; no further negatives",
                            p.user
                        );
                    }
                    break;
                }
                let item = loop {
                    let j = rng.random_range(0..self.n_items);
                    if !seen.contains(&j) {
                        break j;
                    }
                };
                seen.insert(item);
                out.push(LabeledPair::negative(p.user, item));
            }
        }
        out
    }
}

/// One-shot negative sampling for a single split (`ratio` per positive).
pub fn sample_negatives(
    split_positives: &[LabeledPair],
    all_positives: &[LabeledPair],
    n_items: usize,
    ratio: usize,
    seed: u64,
) -> Vec<LabeledPair> {
    let mut sampler = NegativeSampler::new(all_positives, n_items);
    sampler.sample(
        split_positives,
        ratio,
        &mut rng::rng_from(seed, &[rng::stream::NEGATIVES]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(n: u32) -> Vec<(u32, u32)> {
        (0..n).map(|i| (i % 7, i)).collect()
    }

    #[test]
    fn split_counts() {
        let (a, b, c) = split(&pairs(100), SplitRatios::default(), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (60, 20, 20));
        let (a, b, c) = split(&pairs(5), SplitRatios::default(), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (3, 1, 1));
        assert!(split(&pairs(2), SplitRatios::default(), 1).is_err());
        let bad = SplitRatios {
            train: 0.5,
            valid: 0.2,
            test: 0.2,
        };
        assert!(split(&pairs(10), bad, 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let x = split(&pairs(50), SplitRatios::default(), 42).unwrap();
        let y = split(&pairs(50), SplitRatios::default(), 42).unwrap();
        assert_eq!(x, y);
        let z = split(&pairs(50), SplitRatios::default(), 43).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn forced_negative() {
        let pos: Vec<_> = (0..4).map(|i| LabeledPair::positive(0, i)).collect();
        let negs = sample_negatives(&pos[..1], &pos, 5, 1, 9);
        assert_eq!(negs, vec![LabeledPair::negative(0, 4)]);
    }

    #[test]
    fn saturated_user_yields_nothing() {
        let pos: Vec<_> = (0..3).map(|i| LabeledPair::positive(0, i)).collect();
        assert!(sample_negatives(&pos, &pos, 3, 2, 0).is_empty());
    }

    #[test]
    fn ratio_one_gives_one_per_positive() {
        let pos: Vec<_> = (0..30).map(|i| LabeledPair::positive(i % 3, i)).collect();
        assert_eq!(sample_negatives(&pos, &pos, 200, 1, 3).len(), 30);
    }

    proptest! {
        #[test]
        fn split_partitions_input(n in 3u32..300, seed in any::<u64>()) {
            let input = pairs(n);
            let (a, b, c) = split(&input, SplitRatios::default(), seed).unwrap();
            let mut all: Vec<(u32, u32)> = a.iter().chain(&b).chain(&c).map(|p| (p.user, p.item)).collect();
            all.sort_unstable();
            let mut expected = input.clone();
            expected.sort_unstable();
            prop_assert_eq!(all, expected);
        }

        #[test]
        fn negatives_never_hit_positives(
            pos in proptest::collection::btree_set((0u32..6, 0u32..20), 1..60),
            seed in any::<u64>(),
            ratio in 1usize..4,
        ) {
            let pos: Vec<LabeledPair> = pos.into_iter().map(|(u, i)| LabeledPair::positive(u, i)).collect();
            let negs = sample_negatives(&pos, &pos, 20, ratio, seed);
            let set: HashSet<(u32, u32)> = pos.iter().map(|p| (p.user, p.item)).collect();
            let mut drawn = HashSet::new();
            for n in &negs {
                prop_assert_eq!(n.label, 0);
                prop_assert!(!set.contains(&(n.user, n.item)));
                prop_assert!(drawn.insert((n.user, n.item)));
            }
        }
    }
}
