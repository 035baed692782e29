use rand::Rng as _;

use crate::rng::{self, Rng};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out = self · x`
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = super::ops::dot(row, x);
        }
    }
}

/// Every trainable tensor of the model.
///
/// `nodes` covers users, items and entities in the merged id space;
/// `relations` includes the interact relation as its last row.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub nodes: Matrix,
    pub relations: Matrix,
    pub queries: Matrix,
    pub key_weight: Matrix,
    pub key_bias: Vec<f64>,
    pub score_weight: Vec<f64>,
    pub score_bias: f64,
}

/// Gradients share the parameter layout.
pub type Gradients = ParameterSet;

pub const TENSOR_NAMES: [&str; 7] = [
    "nodes",
    "relations",
    "queries",
    "key_weight",
    "key_bias",
    "score_weight",
    "score_bias",
];

impl ParameterSet {
    /// Uniform `[-1/√d, 1/√d]` for embeddings, queries and both weight maps;
    /// biases start at zero.
    pub fn init(node_count: usize, relation_count: usize, dim: usize, queries: usize, seed: u64) -> Self {
        assert!(dim > 0 && queries > 0, "dimension and query count must be positive");
        let mut rng = rng::rng_from(seed, &[rng::stream::INIT]);
        let bound = 1.0 / (dim as f64).sqrt();
        let nodes = Matrix::uniform(node_count, dim, bound, &mut rng);
        let relations = Matrix::uniform(relation_count, dim, bound, &mut rng);
        let queries = Matrix::uniform(queries, dim, bound, &mut rng);
        let key_weight = Matrix::uniform(dim, dim, bound, &mut rng);
        let score_weight = Matrix::uniform(1, dim, bound, &mut rng).data;
        ParameterSet {
            nodes,
            relations,
            queries,
            key_weight,
            key_bias: vec![0.0; dim],
            score_weight,
            score_bias: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let d = self.dim();
        ParameterSet {
            nodes: Matrix::zeros(self.nodes.rows, d),
            relations: Matrix::zeros(self.relations.rows, d),
            queries: Matrix::zeros(self.queries.rows, d),
            key_weight: Matrix::zeros(d, d),
            key_bias: vec![0.0; d],
            score_weight: vec![0.0; d],
            score_bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes.cols
    }

    pub fn query_count(&self) -> usize {
        self.queries.rows
    }

    /// `(name, shape, values)` for every tensor, in a fixed order.
    pub fn tensors(&self) -> [(&'static str, [usize; 2], &[f64]); 7] {
        let d = self.dim();
        [
            (TENSOR_NAMES[0], [self.nodes.rows, d], self.nodes.as_slice()),
            (TENSOR_NAMES[1], [self.relations.rows, d], self.relations.as_slice()),
            (TENSOR_NAMES[2], [self.queries.rows, d], self.queries.as_slice()),
            (TENSOR_NAMES[3], [d, d], self.key_weight.as_slice()),
            (TENSOR_NAMES[4], [1, d], &self.key_bias),
            (TENSOR_NAMES[5], [1, d], &self.score_weight),
            (TENSOR_NAMES[6], [1, 1], std::slice::from_ref(&self.score_bias)),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 7] {
        [
            self.nodes.as_mut_slice(),
            self.relations.as_mut_slice(),
            self.queries.as_mut_slice(),
            self.key_weight.as_mut_slice(),
            &mut self.key_bias,
            &mut self.score_weight,
            std::slice::from_mut(&mut self.score_bias),
        ]
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|v| v.is_finite()))
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.2.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ParameterSet, scale: f64) {
        let src = other.tensors();
        for (dst, (_, _, s)) in self.tensors_mut().into_iter().zip(src) {
            for (a, b) in dst.iter_mut().zip(s) {
                *a += scale * b;
            }
        }
    }

    /// Flat read by global index (test and diagnostics helper).
    pub fn get_flat(&self, mut index: usize) -> f64 {
        for (_, _, t) in self.tensors() {
            if index < t.len() {
                return t[index];
            }
            index -= t.len();
        }
        panic!("flat parameter index out of range")
    }

    pub fn set_flat(&mut self, mut index: usize, value: f64) {
        for t in self.tensors_mut() {
            if index < t.len() {
                t[index] = value;
                return;
            }
            index -= t.len();
        }
        panic!("flat parameter index out of range")
    }

    /// Tensor name and in-tensor offset for a flat index.
    pub fn locate_flat(&self, mut index: usize) -> (&'static str, usize) {
        for (name, _, t) in self.tensors() {
            if index < t.len() {
                return (name, index);
            }
            index -= t.len();
        }
        panic!("flat parameter index out of range")
    }
}
