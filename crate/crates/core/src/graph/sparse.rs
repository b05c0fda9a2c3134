use std::sync::Arc;

use super::hetero::{Csr, HeteroGraph, Relation};
use crate::kernels;
use crate::tensor::{Function, Matrix, TensorError};

/// Weighted CSR operator used for message passing.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    fn from_csr_weights(csr: &Csr, n_cols: usize, weight: impl Fn(usize, usize) -> f64) -> Self {
        let mut vals = Vec::with_capacity(csr.nnz());
        for i in 0..csr.n_rows() {
            for &j in csr.neighbors(i) {
                vals.push(weight(i, j));
            }
        }
        Self {
            n_rows: csr.n_rows(),
            n_cols,
            offsets: csr.offsets().to_vec(),
            cols: csr.indices().to_vec(),
            vals,
        }
    }

    /// Row `i` averages over `N_r(i)`; empty neighborhoods give zero rows.
    pub fn relation_mean(g: &HeteroGraph, r: Relation) -> Self {
        let csr = g.relation(r);
        Self::from_csr_weights(csr, g.n_nodes(), |i, _| 1.0 / csr.degree(i) as f64)
    }

    /// `D̃^{-1/2}(A+I)D̃^{-1/2}` over a homogenized graph that already has self-loops.
    pub fn gcn_normalized(homog: &Csr) -> Self {
        let inv_sqrt: Vec<f64> = (0..homog.n_rows())
            .map(|i| 1.0 / (homog.degree(i) as f64).sqrt())
            .collect();
        Self::from_csr_weights(homog, homog.n_rows(), |i, j| inv_sqrt[i] * inv_sqrt[j])
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut cols = vec![0; self.cols.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                let slot = cursor[j];
                cols[slot] = i;
                vals[slot] = v;
                cursor[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            offsets,
            cols,
            vals,
        }
    }

    /// `S·X`. Each row's terms are accumulated in a canonical order (by
    /// weight, then by the neighbor's feature row), so the result depends
    /// only on the multiset of terms and not on how nodes are numbered.
    pub fn matmul_dense(&self, x: &Matrix) -> Matrix {
        debug_assert_eq!(self.n_cols, x.rows());
        let d = x.cols();
        let mut out = Matrix::zeros(self.n_rows, d);
        kernels::for_each_row(out.as_mut_slice(), d, |i, row| {
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            let mut order: Vec<usize> = (lo..hi).collect();
            if order.len() > 2 {
                order.sort_unstable_by(|&a, &b| {
                    self.vals[a]
                        .total_cmp(&self.vals[b])
                        .then_with(|| cmp_rows(x.row(self.cols[a]), x.row(self.cols[b])))
                });
            }
            // Two terms need no ordering: a + b == b + a exactly.
            for k in order {
                let v = self.vals[k];
                for (o, &t) in row.iter_mut().zip(x.row(self.cols[k])) {
                    *o += v * t;
                }
            }
        });
        out
    }
}

fn cmp_rows(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Tape op for `S·X` with a fixed sparse `S`.
pub(crate) struct SparseProduct {
    pub(crate) op: Arc<SparseMatrix>,
    pub(crate) op_t: Arc<SparseMatrix>,
}

impl Function for SparseProduct {
    fn name(&self) -> &'static str {
        "sparse_product"
    }

    fn forward(&mut self, inputs: &[&Matrix]) -> Result<Matrix, TensorError> {
        let x = inputs[0];
        if x.rows() != self.op.n_cols() {
            return Err(TensorError::ShapeMismatch {
                op: "sparse_product",
                left: (self.op.n_rows(), self.op.n_cols()),
                right: x.shape(),
            });
        }
        Ok(self.op.matmul_dense(x))
    }

    fn backward(&self, _inputs: &[&Matrix], _output: &Matrix, grad: &Matrix) -> Vec<Option<Matrix>> {
        vec![Some(self.op_t.matmul_dense(grad))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_twice_is_identity() {
        let g = HeteroGraph::from_follow_edges(4, &[(0, 1), (0, 2), (3, 1), (2, 0)]).unwrap();
        let s = SparseMatrix::relation_mean(&g, Relation::Following);
        assert_eq!(s.transpose().transpose(), s);
    }

    #[test]
    fn product_ignores_node_numbering() {
        // Node 0 follows 1..=5; relabeling the neighbors reorders the CSR row.
        let edges: Vec<(usize, usize)> = (1..6).map(|j| (0, j)).collect();
        let g = HeteroGraph::from_follow_edges(6, &edges).unwrap();
        let x = Matrix::from_rows(&[[0.0], [0.1], [1e16], [0.3], [-1e16], [0.7]]);
        let base = SparseMatrix::relation_mean(&g, Relation::Following).matmul_dense(&x);
        let perm = [0, 5, 3, 1, 4, 2];
        let gp = g.permute(&perm);
        let mut inv = [0; 6];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let xp = x.gather_rows(&inv);
        let moved = SparseMatrix::relation_mean(&gp, Relation::Following).matmul_dense(&xp);
        assert_eq!(moved.get(0, 0).to_bits(), base.get(0, 0).to_bits());
    }

    #[test]
    fn gcn_two_node_example() {
        let g = HeteroGraph::from_follow_edges(2, &[(0, 1)]).unwrap();
        let a = SparseMatrix::gcn_normalized(&g.homogenized());
        let h = Matrix::from_rows(&[[1.0], [3.0]]);
        let out = a.matmul_dense(&h);
        assert!((out.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((out.get(1, 0) - 2.0).abs() < 1e-15);
    }
}
