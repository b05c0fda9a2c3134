//! Single-head graph attention over a homogenized neighborhood (self included).

use std::sync::Arc;

use super::hetero::Csr;
use crate::kernels::ExactSum;
use crate::tensor::{Function, Matrix, TensorError};

/// Attention slope used inside GAT logits.
pub const GAT_SLOPE: f64 = 0.2;

fn scores(z: &Matrix, a: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let d = z.cols();
    let (a_self, a_nbr) = a.as_slice().split_at(d);
    let dot = |row: &[f64], w: &[f64]| row.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
    let s = (0..z.rows()).map(|i| dot(z.row(i), a_self)).collect();
    let t = (0..z.rows()).map(|i| dot(z.row(i), a_nbr)).collect();
    (s, t)
}

/// Attention coefficients `α_ij`, laid out like `graph.indices()`.
///
/// `z` holds the projected rows `W·h`, `a` is the 2D×1 attention vector whose
/// first half scores the receiving node and second half the neighbor.
pub fn attention_coefficients(z: &Matrix, a: &Matrix, graph: &Csr, slope: f64) -> Vec<f64> {
    let (s, t) = scores(z, a);
    let mut alpha = Vec::with_capacity(graph.nnz());
    let mut denom = ExactSum::new();
    for (i, &si) in s.iter().enumerate().take(graph.n_rows()) {
        let ns = graph.neighbors(i);
        let logits: Vec<f64> = ns
            .iter()
            .map(|&j| {
                let u = si + t[j];
                if u >= 0.0 {
                    u
                } else {
                    slope * u
                }
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        denom.clear();
        let exps: Vec<f64> = logits.iter().map(|&e| (e - max).exp()).collect();
        exps.iter().for_each(|&e| denom.add(e));
        let z_sum = denom.value();
        alpha.extend(exps.iter().map(|&e| e / z_sum));
    }
    alpha
}

pub(crate) struct EdgeAttention {
    pub(crate) graph: Arc<Csr>,
    pub(crate) slope: f64,
    alpha: Vec<f64>,
}

impl EdgeAttention {
    pub(crate) fn new(graph: Arc<Csr>, slope: f64) -> Self {
        Self {
            graph,
            slope,
            alpha: Vec::new(),
        }
    }
}

impl Function for EdgeAttention {
    fn name(&self) -> &'static str {
        "edge_attention"
    }

    fn forward(&mut self, inputs: &[&Matrix]) -> Result<Matrix, TensorError> {
        let (z, a) = (inputs[0], inputs[1]);
        if z.rows() != self.graph.n_rows() || a.shape() != (2 * z.cols(), 1) {
            return Err(TensorError::ShapeMismatch {
                op: "edge_attention",
                left: z.shape(),
                right: a.shape(),
            });
        }
        self.alpha = attention_coefficients(z, a, &self.graph, self.slope);
        let g = &self.graph;
        let mut out = Matrix::zeros(z.rows(), z.cols());
        let mut acc = ExactSum::new();
        for i in 0..g.n_rows() {
            let lo = g.offsets()[i];
            let ns = g.neighbors(i);
            for c in 0..z.cols() {
                acc.clear();
                for (k, &j) in ns.iter().enumerate() {
                    acc.add(self.alpha[lo + k] * z.get(j, c));
                }
                out.set(i, c, acc.value());
            }
        }
        Ok(out)
    }

    fn backward(&self, inputs: &[&Matrix], _output: &Matrix, grad: &Matrix) -> Vec<Option<Matrix>> {
        let (z, a) = (inputs[0], inputs[1]);
        let (n, d) = z.shape();
        let g = &self.graph;
        let (s, t) = scores(z, a);
        let (a_self, a_nbr) = a.as_slice().split_at(d);

        let mut dz = Matrix::zeros(n, d);
        let mut ds = vec![0.0; n];
        let mut dt = vec![0.0; n];
        for i in 0..n {
            let lo = g.offsets()[i];
            let ns = g.neighbors(i);
            let gi = grad.row(i);
            let dalpha: Vec<f64> = ns
                .iter()
                .map(|&j| gi.iter().zip(z.row(j)).map(|(x, y)| x * y).sum())
                .collect();
            let weighted: f64 = ns
                .iter()
                .enumerate()
                .map(|(k, _)| self.alpha[lo + k] * dalpha[k])
                .sum();
            for (k, &j) in ns.iter().enumerate() {
                let alpha = self.alpha[lo + k];
                for (o, &gv) in dz.row_mut(j).iter_mut().zip(gi) {
                    *o += alpha * gv;
                }
                let de = alpha * (dalpha[k] - weighted);
                let du = if s[i] + t[j] >= 0.0 { de } else { self.slope * de };
                ds[i] += du;
                dt[j] += du;
            }
        }

        let mut da = Matrix::zeros(2 * d, 1);
        for i in 0..n {
            let zi = z.row(i).to_vec();
            let row = dz.row_mut(i);
            for c in 0..d {
                row[c] += ds[i] * a_self[c] + dt[i] * a_nbr[c];
            }
            let da = da.as_mut_slice();
            for c in 0..d {
                da[c] += ds[i] * zi[c];
                da[d + c] += dt[i] * zi[c];
            }
        }
        vec![Some(dz), Some(da)]
    }
}
