use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const DEFAULT_K_GRID: [usize; 7] = [1, 2, 5, 10, 20, 50, 100];

/// Metrics of one evaluation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub dataset: String,
    pub seed: u64,
    pub epoch: usize,
    pub pairs: usize,
    pub positives: usize,
    pub ranked_users: usize,
    pub auc: f64,
    pub acc: f64,
    pub f1: f64,
    pub precision_at_k: BTreeMap<usize, f64>,
    pub ndcg_at_k: BTreeMap<usize, f64>,
}

impl MetricsReport {
    /// Flat `key=value` document, one entry per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "dataset={}", self.dataset).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        writeln!(s, "epoch={}", self.epoch).unwrap();
        writeln!(s, "pairs={}", self.pairs).unwrap();
        writeln!(s, "positives={}", self.positives).unwrap();
        writeln!(s, "ranked_users={}", self.ranked_users).unwrap();
        writeln!(s, "auc={}", self.auc).unwrap();
        writeln!(s, "acc={}", self.acc).unwrap();
        writeln!(s, "f1={}", self.f1).unwrap();
        for (k, v) in &self.precision_at_k {
            writeln!(s, "precision@{k}={v}").unwrap();
        }
        for (k, v) in &self.ndcg_at_k {
            writeln!(s, "ndcg@{k}={v}").unwrap();
        }
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut r = MetricsReport::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Metric(format!("report line {line:?} is not key=value")))?;
            let num = |v: &str| -> Result<f64> {
                v.parse().map_err(|_| Error::Metric(format!("bad number in {line:?}")))
            };
            let int = |v: &str| -> Result<u64> {
                v.parse().map_err(|_| Error::Metric(format!("bad integer in {line:?}")))
            };
            match key {
                "dataset" => r.dataset = value.to_string(),
                "seed" => r.seed = int(value)?,
                "epoch" => r.epoch = int(value)? as usize,
                "pairs" => r.pairs = int(value)? as usize,
                "positives" => r.positives = int(value)? as usize,
                "ranked_users" => r.ranked_users = int(value)? as usize,
                "auc" => r.auc = num(value)?,
                "acc" => r.acc = num(value)?,
                "f1" => r.f1 = num(value)?,
                _ => {
                    if let Some(k) = key.strip_prefix("precision@") {
                        r.precision_at_k.insert(int(k)? as usize, num(value)?);
                    } else if let Some(k) = key.strip_prefix("ndcg@") {
                        r.ndcg_at_k.insert(int(k)? as usize, num(value)?);
                    } else {
                        return Err(Error::Metric(format!("unknown report key {key:?}")));
                    }
                }
            }
        }
        Ok(r)
    }

    /// `k,precision,ndcg` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,precision,ndcg\n");
        for (k, p) in &self.precision_at_k {
            let n = self.ndcg_at_k.get(k).copied().unwrap_or(f64::NAN);
            writeln!(s, "{k},{p},{n}").unwrap();
        }
        s
    }

    pub fn values_in_unit_interval(&self) -> bool {
        [self.auc, self.acc, self.f1]
            .into_iter()
            .chain(self.precision_at_k.values().copied())
            .chain(self.ndcg_at_k.values().copied())
            .all(|v| (0.0..=1.0).contains(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip_and_csv() {
        let r = MetricsReport {
            dataset: "synthetic".into(),
            seed: 3,
            epoch: 7,
            pairs: 10,
            positives: 5,
            ranked_users: 2,
            auc: 0.9123,
            acc: 0.1 + 0.2,
            f1: 2.0 / 3.0,
            precision_at_k: BTreeMap::from([(1, 0.5), (10, 0.25)]),
            ndcg_at_k: BTreeMap::from([(1, 0.5), (10, 0.41)]),
        };
        let text = r.to_kv();
        assert!(text.contains("auc=0.9123\n"));
        assert!(text.contains("ndcg@10=0.41\n"));
        assert_eq!(MetricsReport::from_kv(&text).unwrap(), r);
        assert_eq!(r.to_csv(), "k,precision,ndcg\n1,0.5,0.5\n10,0.25,0.41\n");
        assert!(r.values_in_unit_interval());
    }
}
