use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::records::read_to_string;
use super::{DatasetSplit, IdMap, LabeledPair};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::graph::{build_unified_graph, NodeSpace, Triple, UnifiedGraph};

pub const SPLIT_MAGIC: &str = "DKSE-SPLIT v1";
const IDS_MAGIC: &str = "DKSE-IDS v1";

/// A processed dataset: labeled splits plus the KG side, all in dense ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PreparedDataset {
    pub tag: String,
    pub split: DatasetSplit,
    pub entities: IdMap,
    pub relations: IdMap,
    pub triples: Vec<Triple>,
    pub alignment: BTreeMap<u32, u32>,
}

/// Table-1 style summary counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub avg_user_clicks: f64,
    pub avg_clicked_items: f64,
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "#users={}", self.users)?;
        writeln!(f, "#items={}", self.items)?;
        writeln!(f, "#interactions={}", self.interactions)?;
        writeln!(f, "#avg_user_clicks={:.1}", self.avg_user_clicks)?;
        writeln!(f, "#avg_clicked_items={:.1}", self.avg_clicked_items)?;
        writeln!(f, "#entities={}", self.entities)?;
        writeln!(f, "#relations={}", self.relations)?;
        write!(f, "#triples={}", self.triples)
    }
}

impl PreparedDataset {
    pub fn space(&self) -> NodeSpace {
        NodeSpace {
            users: self.split.users.len(),
            items: self.split.items.len(),
            entities: self.entities.len(),
            relations: self.relations.len(),
        }
    }

    /// Unified graph over the training positives only.
    pub fn graph(&self) -> Result<UnifiedGraph> {
        build_unified_graph(
            self.space(),
            &self.split.train_positive_pairs(),
            &self.triples,
            &self.alignment,
        )
    }

    pub fn stats(&self) -> DatasetStats {
        let interactions = self.split.positives().count();
        let space = self.space();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        DatasetStats {
            users: space.users,
            items: space.items,
            interactions,
            avg_user_clicks: ratio(interactions, space.users),
            avg_clicked_items: ratio(interactions, space.items),
            entities: space.entities,
            relations: space.relations,
            triples: self.triples.len(),
        }
    }

    /// Sidecar id-map path: `dataset.split` → `dataset.ids`.
    pub fn ids_path(path: &Path) -> PathBuf {
        path.with_extension("ids")
    }

    pub fn to_split_text(&self) -> String {
        let mut s = String::new();
        let sp = self.space();
        writeln!(s, "{SPLIT_MAGIC}").unwrap();
        writeln!(s, "tag\t{}", self.tag).unwrap();
        writeln!(s, "space\t{}\t{}\t{}\t{}", sp.users, sp.items, sp.entities, sp.relations).unwrap();
        for (name, pairs) in [
            ("train", &self.split.train),
            ("valid", &self.split.valid),
            ("test", &self.split.test),
        ] {
            for p in pairs {
                writeln!(s, "{name}\t{}\t{}\t{}", p.user, p.item, p.label).unwrap();
            }
        }
        for t in &self.triples {
            writeln!(s, "triple\t{}\t{}\t{}", t.head, t.relation, t.tail).unwrap();
        }
        for (item, entity) in &self.alignment {
            writeln!(s, "align\t{item}\t{entity}").unwrap();
        }
        s
    }

    pub fn to_ids_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{IDS_MAGIC}").unwrap();
        for (kind, map) in [
            ("user", &self.split.users),
            ("item", &self.split.items),
            ("entity", &self.entities),
            ("relation", &self.relations),
        ] {
            for (id, name) in map.iter() {
                writeln!(s, "{kind}\t{id}\t{name}").unwrap();
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(&Self::ids_path(path), self.to_ids_text().as_bytes())?;
        write_atomic(path, self.to_split_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ids_path = Self::ids_path(path);
        let mut ds = PreparedDataset::default();
        parse_ids(&read_to_string(&ids_path)?, &ids_path, &mut ds)?;
        let space = parse_split(&read_to_string(path)?, path, &mut ds)?;
        if space != ds.space() {
            return Err(Error::Dataset(format!(
                "{} declares {space:?} but {} holds {:?}",
                path.display(),
                ids_path.display(),
                ds.space()
            )));
        }
        Ok(ds)
    }
}

fn parse_ids(text: &str, path: &Path, ds: &mut PreparedDataset) -> Result<()> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == IDS_MAGIC => {}
        _ => return Err(Error::parse(path, 1, format!("missing {IDS_MAGIC:?} header"))),
    }
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.splitn(3, '\t').collect();
        let bad = |m: &str| Error::parse(path, i + 1, m.to_string());
        if f.len() != 3 {
            return Err(bad("expected kind, id, name"));
        }
        let map = match f[0] {
            "user" => &mut ds.split.users,
            "item" => &mut ds.split.items,
            "entity" => &mut ds.entities,
            "relation" => &mut ds.relations,
            other => return Err(bad(&format!("unknown id kind {other:?}"))),
        };
        let id: u32 = f[1].parse().map_err(|_| bad("id is not an integer"))?;
        if id as usize != map.len() || map.get(f[2]).is_some() {
            return Err(bad("ids must be dense, ordered and unique"));
        }
        map.intern(f[2]);
    }
    Ok(())
}

fn parse_split(text: &str, path: &Path, ds: &mut PreparedDataset) -> Result<NodeSpace> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == SPLIT_MAGIC => {}
        _ => return Err(Error::parse(path, 1, format!("missing {SPLIT_MAGIC:?} header"))),
    }
    let mut space = None;
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |m: &str| Error::parse(path, i + 1, m.to_string());
        let nums = |want: usize| -> Result<Vec<u64>> {
            if f.len() != want + 1 {
                return Err(bad(&format!("{} expects {want} fields", f[0])));
            }
            f[1..]
                .iter()
                .map(|s| s.parse::<u64>().map_err(|_| bad("expected an integer")))
                .collect()
        };
        match f[0] {
            "tag" => ds.tag = f.get(1).copied().unwrap_or("").to_string(),
            "space" => {
                let n = nums(4)?;
                space = Some(NodeSpace {
                    users: n[0] as usize,
                    items: n[1] as usize,
                    entities: n[2] as usize,
                    relations: n[3] as usize,
                });
            }
            "train" | "valid" | "test" => {
                let n = nums(3)?;
                if n[2] > 1 {
                    return Err(bad("label must be 0 or 1"));
                }
                let pair = LabeledPair {
                    user: n[0] as u32,
                    item: n[1] as u32,
                    label: n[2] as u8,
                };
                match f[0] {
                    "train" => ds.split.train.push(pair),
                    "valid" => ds.split.valid.push(pair),
                    _ => ds.split.test.push(pair),
                }
            }
            "triple" => {
                let n = nums(3)?;
                ds.triples.push(Triple::new(n[0] as u32, n[1] as u32, n[2] as u32));
            }
            "align" => {
                let n = nums(2)?;
                ds.alignment.insert(n[0] as u32, n[1] as u32);
            }
            other => return Err(bad(&format!("unknown record kind {other:?}"))),
        }
    }
    space.ok_or_else(|| Error::parse(path, 0, "missing space record"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PreparedDataset {
        PreparedDataset {
            tag: "toy".into(),
            split: DatasetSplit {
                train: vec![LabeledPair::positive(0, 1), LabeledPair::negative(0, 0)],
                valid: vec![LabeledPair::positive(1, 0)],
                test: vec![LabeledPair::positive(1, 1)],
                users: ["alice", "bob"].into_iter().collect(),
                items: ["x", "y"].into_iter().collect(),
            },
            entities: ["ex", "ey", "genre"].into_iter().collect(),
            relations: ["has_genre"].into_iter().collect(),
            triples: vec![Triple::new(0, 0, 2), Triple::new(1, 0, 2)],
            alignment: BTreeMap::from([(0, 0), (1, 1)]),
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.split");
        let ds = sample();
        ds.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("DKSE-SPLIT v1\n"));
        assert_eq!(PreparedDataset::load(&path).unwrap(), ds);
    }

    #[test]
    fn stats_and_graph() {
        let ds = sample();
        let st = ds.stats();
        assert_eq!((st.users, st.items, st.interactions, st.triples), (2, 2, 3, 2));
        assert!((st.avg_user_clicks - 1.5).abs() < 1e-12);
        let g = ds.graph().unwrap();
        // 2 users + 2 items (aligned) + 1 unaligned entity
        assert_eq!(g.node_count(), 5);
        assert!(g.has_edge(0, g.interact_relation(), g.item_node(1)));
        assert!(!g.has_edge(1, g.interact_relation(), g.item_node(0)));
    }

    #[test]
    fn rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.split");
        sample().save(&path).unwrap();
        std::fs::write(&path, "DKSE-SPLIT v0\n").unwrap();
        assert!(PreparedDataset::load(&path).is_err());
    }
}
