//! Planted-structure synthetic datasets.
//!
//! Entities (and the items aligned to them) belong to latent clusters. Every
//! item links to entities of its own cluster, and users click the items whose
//! cluster latent best matches their own latent vector, plus Gaussian noise.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::dot;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    /// Includes the entities aligned to items, so at least `items`.
    pub entities: usize,
    pub relations: usize,
    pub latent_dim: usize,
    pub interactions_per_user: usize,
    pub kg_edges_per_item: usize,
    pub clusters: usize,
    /// Standard deviation of the per-(user, item) preference noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users: 200,
            items: 300,
            entities: 500,
            relations: 5,
            latent_dim: 8,
            interactions_per_user: 12,
            kg_edges_per_item: 4,
            clusters: 10,
            noise: 0.3,
            seed: 2023,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("users", self.users),
            ("items", self.items),
            ("entities", self.entities),
            ("relations", self.relations),
            ("latent_dim", self.latent_dim),
            ("interactions_per_user", self.interactions_per_user),
            ("kg_edges_per_item", self.kg_edges_per_item),
            ("clusters", self.clusters),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("synthetic {name} must be at least 1")));
        }
        if self.entities < self.items {
            return Err(Error::Config(format!(
                "synthetic entities ({}) must cover the {} aligned items",
                self.entities, self.items
            )));
        }
        if self.clusters > self.items {
            return Err(Error::Config("more clusters than items".into()));
        }
        if self.interactions_per_user > self.items {
            return Err(Error::Config("interactions_per_user exceeds the item count".into()));
        }
        let smallest = self.items / self.clusters + (self.entities - self.items) / self.clusters;
        if smallest <= self.kg_edges_per_item {
            return Err(Error::Config(format!(
                "each cluster needs more than kg_edges_per_item={} entities",
                self.kg_edges_per_item
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be ≥ 0, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Generated data in raw-id form, plus the latent ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub items: usize,
    /// `(user, item)` index pairs, `interactions_per_user` per user.
    pub interactions: Vec<(usize, usize)>,
    /// `(head entity, relation, tail entity)`.
    pub triples: Vec<(usize, usize, usize)>,
    /// Item `i` is aligned to entity `i`.
    pub entity_cluster: Vec<usize>,
    pub user_latent: Vec<Vec<f64>>,
    pub cluster_latent: Vec<Vec<f64>>,
}

impl SyntheticData {
    pub fn item_cluster(&self, item: usize) -> usize {
        self.entity_cluster[item]
    }

    /// Cluster with the highest latent affinity for `user` (lowest index on ties).
    pub fn favorite_cluster(&self, user: usize) -> usize {
        let mut best = 0;
        for c in 1..self.cluster_latent.len() {
            if dot(&self.user_latent[user], &self.cluster_latent[c])
                > dot(&self.user_latent[user], &self.cluster_latent[best])
            {
                best = c;
            }
        }
        best
    }

    pub fn ratings_text(&self) -> String {
        let mut s = String::new();
        for &(u, i) in &self.interactions {
            writeln!(s, "u{u}\ti{i}\t5").unwrap();
        }
        s
    }

    pub fn kg_text(&self) -> String {
        let mut s = String::new();
        for &(h, r, t) in &self.triples {
            writeln!(s, "e{h}\tr{r}\te{t}").unwrap();
        }
        s
    }

    pub fn alignment_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.items {
            writeln!(s, "i{i}\te{i}").unwrap();
        }
        s
    }
}

fn gaussian(rng: &mut rng::Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = rng::rng_from(spec.seed, &[rng::stream::SYNTH]);
    let c_count = spec.clusters;

    // Items and the remaining entities are each dealt round-robin into
    // clusters, then the assignment is shuffled within each kind.
    let mut item_cluster: Vec<usize> = (0..spec.items).map(|i| i % c_count).collect();
    item_cluster.shuffle(&mut rng);
    let mut other_cluster: Vec<usize> = (0..spec.entities - spec.items).map(|i| i % c_count).collect();
    other_cluster.shuffle(&mut rng);
    let entity_cluster: Vec<usize> = item_cluster.iter().chain(&other_cluster).copied().collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c_count];
    for (e, &c) in entity_cluster.iter().enumerate() {
        members[c].push(e);
    }

    let cluster_latent: Vec<Vec<f64>> = (0..c_count).map(|_| gaussian(&mut rng, spec.latent_dim)).collect();
    let user_latent: Vec<Vec<f64>> = (0..spec.users).map(|_| gaussian(&mut rng, spec.latent_dim)).collect();

    // KG: each item links to distinct entities of its cluster. Entities that
    // are not items are handed out first so that every one of them appears.
    let mut triples = Vec::with_capacity(spec.items * spec.kg_edges_per_item);
    let mut pending: Vec<Vec<usize>> = members
        .iter()
        .map(|m| {
            let mut v: Vec<usize> = m.iter().copied().filter(|&e| e >= spec.items).collect();
            v.shuffle(&mut rng);
            v
        })
        .collect();
    for item in 0..spec.items {
        let c = entity_cluster[item];
        let mut tails = BTreeSet::new();
        let mut chosen = Vec::with_capacity(spec.kg_edges_per_item);
        while chosen.len() < spec.kg_edges_per_item {
            let t = match pending[c].pop() {
                Some(t) => t,
                None => members[c][rng.random_range(0..members[c].len())],
            };
            if t != item && tails.insert(t) {
                chosen.push(t);
            }
        }
        for t in chosen {
            let r = if triples.len() < spec.relations {
                triples.len()
            } else {
                rng.random_range(0..spec.relations)
            };
            triples.push((item, r, t));
        }
    }

    // Interactions: top-scoring items under latent affinity plus noise; a
    // random permutation breaks exact ties.
    let mut picks: Vec<Vec<usize>> = Vec::with_capacity(spec.users);
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(spec.users);
    for u in 0..spec.users {
        let affinity: Vec<f64> = cluster_latent.iter().map(|z| dot(&user_latent[u], z)).collect();
        let s: Vec<f64> = (0..spec.items)
            .map(|i| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                affinity[entity_cluster[i]] + spec.noise * eps
            })
            .collect();
        let mut order: Vec<usize> = (0..spec.items).collect();
        order.shuffle(&mut rng);
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        order.truncate(spec.interactions_per_user);
        picks.push(order);
        scores.push(s);
    }
    cover_items(&mut picks, &scores, &entity_cluster, spec.items);

    let interactions = picks
        .iter()
        .enumerate()
        .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
        .collect();
    Ok(SyntheticData {
        items: spec.items,
        interactions,
        triples,
        entity_cluster,
        user_latent,
        cluster_latent,
    })
}

/// Gives every item at least one click by swapping it in for a replaceable
/// click of the user who likes it most: preferably another item of the same
/// cluster, otherwise that user's weakest pick. Per-user counts are kept.
fn cover_items(picks: &mut [Vec<usize>], scores: &[Vec<f64>], cluster: &[usize], n_items: usize) {
    let mut count = vec![0usize; n_items];
    for p in picks.iter() {
        for &i in p {
            count[i] += 1;
        }
    }
    for item in 0..n_items {
        if count[item] > 0 {
            continue;
        }
        let mut best: Option<(bool, f64, usize, usize)> = None;
        for (u, p) in picks.iter().enumerate() {
            for (slot, &j) in p.iter().enumerate() {
                if count[j] < 2 {
                    continue;
                }
                let same = cluster[j] == cluster[item];
                let key = (same, scores[u][item] - scores[u][j], u, slot);
                let better = match best {
                    None => true,
                    Some(b) => (key.0, key.1) > (b.0, b.1),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        if let Some((_, _, u, slot)) = best {
            count[picks[u][slot]] -= 1;
            picks[u][slot] = item;
            count[item] += 1;
        }
    }
}

/// TSV paths written by [`write_files`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticFiles {
    pub interactions: PathBuf,
    pub kg: PathBuf,
    pub alignment: PathBuf,
}

impl SyntheticFiles {
    pub fn in_dir(dir: &Path) -> Self {
        SyntheticFiles {
            interactions: dir.join("ratings.tsv"),
            kg: dir.join("kg.tsv"),
            alignment: dir.join("alignment.tsv"),
        }
    }
}

pub fn write_files(data: &SyntheticData, dir: &Path) -> Result<SyntheticFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SyntheticFiles::in_dir(dir);
    write_atomic(&files.interactions, data.ratings_text().as_bytes())?;
    write_atomic(&files.kg, data.kg_text().as_bytes())?;
    write_atomic(&files.alignment, data.alignment_text().as_bytes())?;
    Ok(files)
}
