use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub user: String,
    pub item: String,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

/// How explicit ratings become implicit positives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImplicitPolicy {
    /// `rating >= min` is positive (`rating > min` when `inclusive` is false).
    Threshold { min: f64, inclusive: bool },
    AllPositive,
}

impl Default for ImplicitPolicy {
    fn default() -> Self {
        ImplicitPolicy::Threshold {
            min: 4.0,
            inclusive: true,
        }
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads `user\titem[\trating[\ttimestamp]]` lines.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<Vec<InteractionRecord>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    parse_interactions(&text, path)
}

pub(crate) fn parse_interactions(text: &str, path: &Path) -> Result<Vec<InteractionRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |msg: &str| Error::parse(path, lineno + 1, msg.to_string());
        if fields.len() < 2 || fields.len() > 4 {
            return Err(bad("expected 2 to 4 tab-separated columns"));
        }
        let (user, item) = (fields[0].trim(), fields[1].trim());
        if user.is_empty() || item.is_empty() {
            return Err(bad("empty user or item id"));
        }
        let rating = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => {
                let r: f64 = s
                    .parse()
                    .map_err(|_| bad(&format!("rating {s:?} is not a number")))?;
                if !r.is_finite() {
                    return Err(bad("rating is not finite"));
                }
                Some(r)
            }
        };
        let timestamp = match fields.get(3).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse()
                    .map_err(|_| bad(&format!("timestamp {s:?} is not an integer")))?,
            ),
        };
        out.push(InteractionRecord {
            user: user.to_owned(),
            item: item.to_owned(),
            rating,
            timestamp,
        });
    }
    Ok(out)
}

/// Keeps the records that count as positive feedback, deduplicated, in
/// first-seen order. Sub-threshold ratings are dropped, not turned into
/// negatives.
pub fn to_implicit(
    records: &[InteractionRecord],
    policy: ImplicitPolicy,
) -> Result<Vec<(String, String)>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let positive = match policy {
            ImplicitPolicy::AllPositive => true,
            ImplicitPolicy::Threshold { min, inclusive } => {
                let r = rec.rating.ok_or_else(|| {
                    Error::Dataset(format!(
                        "record {} ({}, {}) has no rating but a rating threshold is configured",
                        i + 1,
                        rec.user,
                        rec.item
                    ))
                })?;
                if inclusive {
                    r >= min
                } else {
                    r > min
                }
            }
        };
        if positive && seen.insert((rec.user.as_str(), rec.item.as_str())) {
            out.push((rec.user.clone(), rec.item.clone()));
        }
    }
    Ok(out)
}
