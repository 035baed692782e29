//! Binary checkpoints: `DKSE-CKPT v1`, little-endian throughout.
//!
//! Layout: magic line, `u32` length + UTF-8 metadata block (`key=value`
//! lines: dataset, epoch, then the hyperparameters), `u64` seed, `u32`
//! tensor count, then per tensor `u32` name length, name, `u64` rows,
//! `u64` cols and `rows * cols` `f64` values.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::{hyper_from_text, hyper_to_text};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::graph::UnifiedGraph;
use crate::model::{Matrix, ParameterSet, TENSOR_NAMES};
use crate::train::HyperParams;

pub const CHECKPOINT_MAGIC: &[u8] = b"DKSE-CKPT v1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub dataset: String,
    pub epoch: usize,
    pub hyper: HyperParams,
    pub params: ParameterSet,
}

impl Checkpoint {
    /// Rejects a checkpoint whose shapes do not fit `graph` or disagree with
    /// its own hyperparameters.
    pub fn check_compatible(&self, graph: &UnifiedGraph) -> Result<()> {
        let p = &self.params;
        let mismatch = |what: String| Err(Error::Checkpoint(format!("dimension mismatch: {what}")));
        if p.nodes.rows() != graph.node_count() {
            return mismatch(format!("{} node rows, graph has {} nodes", p.nodes.rows(), graph.node_count()));
        }
        if p.relations.rows() != graph.relation_count() {
            return mismatch(format!(
                "{} relation rows, graph has {} relations",
                p.relations.rows(),
                graph.relation_count()
            ));
        }
        if p.dim() != self.hyper.dim {
            return mismatch(format!("embeddings have d={} but dim={}", p.dim(), self.hyper.dim));
        }
        if p.query_count() != self.hyper.queries {
            return mismatch(format!("{} query rows but queries={}", p.query_count(), self.hyper.queries));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut meta = String::new();
        writeln!(meta, "dataset={}", self.dataset).unwrap();
        writeln!(meta, "epoch={}", self.epoch).unwrap();
        meta.push_str(&hyper_to_text(&self.hyper));

        let mut out = Vec::with_capacity(64 + self.params.len() * 8 + meta.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        out.extend_from_slice(&self.hyper.seed.to_le_bytes());
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(shape[0] as u64).to_le_bytes());
            out.extend_from_slice(&(shape[1] as u64).to_le_bytes());
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a DKSE-CKPT v1 file".into()));
        }
        let meta_len = r.u32()? as usize;
        let meta = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| Error::Checkpoint("metadata is not UTF-8".into()))?;
        let (mut dataset, mut epoch) = (String::new(), 0);
        let mut hyper_lines = String::new();
        for line in meta.lines() {
            if let Some(v) = line.strip_prefix("dataset=") {
                dataset = v.to_string();
            } else if let Some(v) = line.strip_prefix("epoch=") {
                epoch = v.parse().map_err(|_| Error::Checkpoint(format!("bad epoch {v:?}")))?;
            } else {
                hyper_lines.push_str(line);
                hyper_lines.push('\n');
            }
        }
        let mut hyper = hyper_from_text(&hyper_lines).map_err(|e| Error::Checkpoint(e.to_string()))?;
        hyper.seed = r.u64()?;
        let count = r.u32()? as usize;
        if count != TENSOR_NAMES.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {count}", TENSOR_NAMES.len())));
        }
        let mut mats = Vec::with_capacity(count);
        for expected in TENSOR_NAMES {
            let name_len = r.u32()? as usize;
            let name = r.take(name_len)?;
            if name != expected.as_bytes() {
                return Err(Error::Checkpoint(format!(
                    "expected tensor {expected}, found {:?}",
                    String::from_utf8_lossy(name)
                )));
            }
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.saturating_mul(8) <= bytes.len())
                .ok_or_else(|| Error::Checkpoint(format!("tensor {expected} has impossible shape {rows}x{cols}")))?;
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
            mats.push(Matrix::from_vec(rows, cols, data));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let mut it = mats.into_iter();
        let nodes = it.next().unwrap();
        let relations = it.next().unwrap();
        let queries = it.next().unwrap();
        let key_weight = it.next().unwrap();
        let key_bias = it.next().unwrap();
        let score_weight = it.next().unwrap();
        let score_bias = it.next().unwrap();
        let d = nodes.cols();
        let shapes_ok = relations.cols() == d
            && queries.cols() == d
            && key_weight.rows() == d
            && key_weight.cols() == d
            && key_bias.as_slice().len() == d
            && score_weight.as_slice().len() == d
            && score_bias.as_slice().len() == 1;
        if !shapes_ok {
            return Err(Error::Checkpoint("dimension mismatch between tensors".into()));
        }
        let params = ParameterSet {
            nodes,
            relations,
            queries,
            key_weight,
            key_bias: key_bias.as_slice().to_vec(),
            score_weight: score_weight.as_slice().to_vec(),
            score_bias: score_bias.as_slice()[0],
        };
        Ok(Checkpoint {
            dataset,
            epoch,
            hyper,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
