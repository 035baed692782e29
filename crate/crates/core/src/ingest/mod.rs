//! Raw files → implicit feedback → k-core → train/valid/test with negatives.

mod dataset;
mod idmap;
mod kcore;
mod kg;
mod records;
mod split;

pub use dataset::{DatasetStats, PreparedDataset, SPLIT_MAGIC};
pub use idmap::IdMap;
pub use kcore::k_core_filter;
pub use kg::{load_alignment, load_kg};
pub use records::{load_interactions, to_implicit, ImplicitPolicy, InteractionRecord};
pub use split::{sample_negatives, split, DatasetSplit, LabeledPair, NegativeSampler, SplitRatios};

/// Interns string pairs into dense user/item ids (first-seen order).
pub fn intern_pairs(pairs: &[(String, String)]) -> (Vec<(u32, u32)>, IdMap, IdMap) {
    let (mut users, mut items) = (IdMap::new(), IdMap::new());
    let dense = pairs
        .iter()
        .map(|(u, i)| (users.intern(u), items.intern(i)))
        .collect();
    (dense, users, items)
}

/// Renumbers users and items that survive filtering to be contiguous again,
/// keeping their relative order.
pub fn compact(pairs: &[(u32, u32)], users: &IdMap, items: &IdMap) -> (Vec<(u32, u32)>, IdMap, IdMap) {
    let (mut new_users, mut new_items) = (IdMap::new(), IdMap::new());
    let mut alive_u: Vec<u32> = pairs.iter().map(|p| p.0).collect();
    let mut alive_i: Vec<u32> = pairs.iter().map(|p| p.1).collect();
    alive_u.sort_unstable();
    alive_u.dedup();
    alive_i.sort_unstable();
    alive_i.dedup();
    for &u in &alive_u {
        new_users.intern(users.name(u).expect("user id in map"));
    }
    for &i in &alive_i {
        new_items.intern(items.name(i).expect("item id in map"));
    }
    let remapped = pairs
        .iter()
        .map(|&(u, i)| {
            (
                new_users.get(users.name(u).unwrap()).unwrap(),
                new_items.get(items.name(i).unwrap()).unwrap(),
            )
        })
        .collect();
    (remapped, new_users, new_items)
}
