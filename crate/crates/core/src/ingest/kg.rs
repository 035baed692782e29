use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use super::records::read_to_string;
use super::IdMap;
use crate::error::{Error, Result};
use crate::graph::Triple;

fn fields<'a>(line: &'a str, want: usize, path: &Path, lineno: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split('\t').map(str::trim).collect();
    if f.len() != want || f.iter().any(|s| s.is_empty()) {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {want} non-empty tab-separated columns"),
        ));
    }
    Ok(f)
}

/// Reads `head\trelation\ttail` lines, interning names into the shared maps.
/// Repeated triples are kept once.
pub fn load_kg(path: impl AsRef<Path>, entities: &mut IdMap, relations: &mut IdMap) -> Result<Vec<Triple>> {
    let path = path.as_ref();
    parse_kg(&read_to_string(path)?, path, entities, relations)
}

pub(crate) fn parse_kg(
    text: &str,
    path: &Path,
    entities: &mut IdMap,
    relations: &mut IdMap,
) -> Result<Vec<Triple>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let f = fields(line, 3, path, i + 1)?;
        let t = Triple::new(entities.intern(f[0]), relations.intern(f[1]), entities.intern(f[2]));
        if seen.insert(t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Reads `item\tentity` lines. Items unknown to `items` (for example removed
/// by k-core filtering) are skipped; unknown entities are allocated.
pub fn load_alignment(
    path: impl AsRef<Path>,
    items: &IdMap,
    entities: &mut IdMap,
) -> Result<BTreeMap<u32, u32>> {
    let path = path.as_ref();
    parse_alignment(&read_to_string(path)?, path, items, entities)
}

pub(crate) fn parse_alignment(
    text: &str,
    path: &Path,
    items: &IdMap,
    entities: &mut IdMap,
) -> Result<BTreeMap<u32, u32>> {
    let mut out = BTreeMap::new();
    let mut owner: BTreeMap<u32, u32> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let f = fields(line, 2, path, i + 1)?;
        let Some(item) = items.get(f[0]) else {
            continue;
        };
        let entity = entities.intern(f[1]);
        match out.get(&item) {
            Some(&prev) if prev != entity => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("item {:?} aligned to two different entities", f[0]),
                ))
            }
            Some(_) => continue,
            None => {}
        }
        if let Some(&other) = owner.get(&entity) {
            return Err(Error::parse(
                path,
                i + 1,
                format!(
                    "entity {:?} already aligned to item {:?}",
                    f[1],
                    items.name(other).unwrap_or("?")
                ),
            ));
        }
        owner.insert(entity, item);
        out.insert(item, entity);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_duplicate_triples() {
        let (mut e, mut r) = (IdMap::new(), IdMap::new());
        assert!(parse_kg("", Path::new("kg"), &mut e, &mut r).unwrap().is_empty());
        let t = parse_kg("a\tlikes\tb\na\tlikes\tb\n", Path::new("kg"), &mut e, &mut r).unwrap();
        assert_eq!(t, vec![Triple::new(0, 0, 1)]);
        assert_eq!((e.len(), r.len()), (2, 1));
    }

    #[test]
    fn malformed_kg_line() {
        let (mut e, mut r) = (IdMap::new(), IdMap::new());
        let err = parse_kg("a\tb\tc\na\tb\n", Path::new("kg.tsv"), &mut e, &mut r).unwrap_err();
        assert!(err.to_string().contains("kg.tsv:2"), "{err}");
    }

    #[test]
    fn alignment_allocates_new_entities() {
        let mut e = IdMap::new();
        let mut r = IdMap::new();
        parse_kg("x\tr\ty\n", Path::new("kg"), &mut e, &mut r).unwrap();
        let items: IdMap = ["i0", "i1"].into_iter().collect();
        let a = parse_alignment("i0\tx\ni1\tfresh\nghost\ty\n", Path::new("al"), &items, &mut e).unwrap();
        assert_eq!(a, BTreeMap::from([(0, 0), (1, 2)]));
        assert_eq!(e.len(), 3);
    }

    #[test]
    fn conflicting_alignment_rejected() {
        let mut e = IdMap::new();
        let items: IdMap = ["i0", "i1"].into_iter().collect();
        assert!(parse_alignment("i0\tx\ni0\ty\n", Path::new("al"), &items, &mut e).is_err());
        let mut e = IdMap::new();
        assert!(parse_alignment("i0\tx\ni1\tx\n", Path::new("al"), &items, &mut e).is_err());
    }
}
