use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::attention::{EdgeAttention, GAT_SLOPE};
use super::hetero::{Csr, HeteroGraph, Relation};
use super::sparse::{SparseMatrix, SparseProduct};
use crate::tensor::{Tape, TensorError, Var};

/// Message-passing layer family. Fixed for a whole model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnnVariant {
    Rgcn,
    Gcn,
    Gat,
    Mlp,
}

impl GnnVariant {
    pub const ALL: [GnnVariant; 4] = [GnnVariant::Rgcn, GnnVariant::Gcn, GnnVariant::Gat, GnnVariant::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            GnnVariant::Rgcn => "rgcn",
            GnnVariant::Gcn => "gcn",
            GnnVariant::Gat => "gat",
            GnnVariant::Mlp => "mlp",
        }
    }
}

impl fmt::Display for GnnVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GnnVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rgcn" => Ok(GnnVariant::Rgcn),
            "gcn" => Ok(GnnVariant::Gcn),
            "gat" => Ok(GnnVariant::Gat),
            "mlp" => Ok(GnnVariant::Mlp),
            other => Err(format!("unknown GNN variant `{other}` (expected rgcn, gcn, gat or mlp)")),
        }
    }
}

#[derive(Clone, Debug)]
struct SparsePair {
    op: Arc<SparseMatrix>,
    op_t: Arc<SparseMatrix>,
}

impl SparsePair {
    fn new(op: SparseMatrix) -> Self {
        let op_t = Arc::new(op.transpose());
        Self {
            op: Arc::new(op),
            op_t,
        }
    }
}

/// Precomputed, immutable propagation operators for one graph.
///
/// Only the operators the chosen variant needs are built; the MLP variant
/// never touches the edge lists.
#[derive(Clone, Debug)]
pub struct GraphOperators {
    n_nodes: usize,
    relation_mean: Option<[SparsePair; 2]>,
    gcn: Option<SparsePair>,
    homogenized: Option<Arc<Csr>>,
}

impl GraphOperators {
    pub fn for_variant(g: &HeteroGraph, variant: GnnVariant) -> Self {
        let mut ops = Self {
            n_nodes: g.n_nodes(),
            relation_mean: None,
            gcn: None,
            homogenized: None,
        };
        match variant {
            GnnVariant::Rgcn => {
                ops.relation_mean = Some(Relation::ALL.map(|r| SparsePair::new(SparseMatrix::relation_mean(g, r))));
            }
            GnnVariant::Gcn => {
                ops.gcn = Some(SparsePair::new(SparseMatrix::gcn_normalized(&g.homogenized())));
            }
            GnnVariant::Gat => ops.homogenized = Some(Arc::new(g.homogenized())),
            GnnVariant::Mlp => {}
        }
        ops
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn homogenized(&self) -> Option<&Csr> {
        self.homogenized.as_deref()
    }
}

fn sparse_apply(tape: &mut Tape, pair: &SparsePair, x: Var) -> Result<Var, TensorError> {
    tape.apply(
        Box::new(SparseProduct {
            op: Arc::clone(&pair.op),
            op_t: Arc::clone(&pair.op_t),
        }),
        &[x],
    )
}

/// Row `i` is the mean of `H` over `N_r(i)`; an empty neighborhood gives zeros.
pub fn relational_mean_aggregate(
    tape: &mut Tape,
    h: Var,
    ops: &GraphOperators,
    r: Relation,
) -> Result<Var, TensorError> {
    let pairs = ops
        .relation_mean
        .as_ref()
        .ok_or(TensorError::MissingOperator("relation_mean"))?;
    sparse_apply(tape, &pairs[r.index()], h)
}

/// Projection matrices of one relational layer, each D×D.
#[derive(Clone, Copy, Debug)]
pub struct RgcnLayerVars {
    pub theta_self: Var,
    pub theta_following: Var,
    pub theta_follower: Var,
}

/// `H·Θ_selfᵀ + Σ_r mean_r(H)·Θ_rᵀ`; no bias, no activation.
pub fn rgcn_layer(
    tape: &mut Tape,
    h: Var,
    ops: &GraphOperators,
    p: RgcnLayerVars,
) -> Result<Var, TensorError> {
    let mut out = tape.matmul_nt(h, p.theta_self)?;
    for (r, theta) in [
        (Relation::Following, p.theta_following),
        (Relation::Follower, p.theta_follower),
    ] {
        let agg = relational_mean_aggregate(tape, h, ops, r)?;
        let msg = tape.matmul_nt(agg, theta)?;
        out = tape.add(out, msg)?;
    }
    Ok(out)
}

/// `Â·H·Wᵀ` with the symmetric-normalized, self-looped homogenized adjacency.
pub fn gcn_layer(tape: &mut Tape, h: Var, ops: &GraphOperators, w: Var) -> Result<Var, TensorError> {
    let pair = ops
        .gcn
        .as_ref()
        .ok_or(TensorError::MissingOperator("gcn"))?;
    let hw = tape.matmul_nt(h, w)?;
    sparse_apply(tape, pair, hw)
}

/// Single-head attention: `out_i = Σ_{j∈N(i)∪{i}} α_ij·W·h_j`.
pub fn gat_layer(
    tape: &mut Tape,
    h: Var,
    ops: &GraphOperators,
    w: Var,
    attn: Var,
) -> Result<Var, TensorError> {
    let graph = ops
        .homogenized
        .as_ref()
        .ok_or(TensorError::MissingOperator("homogenized"))?;
    let z = tape.matmul_nt(h, w)?;
    tape.apply(Box::new(EdgeAttention::new(Arc::clone(graph), GAT_SLOPE)), &[z, attn])
}

/// Per-node affine map `H·Wᵀ + b`; the graph is not consulted.
pub fn mlp_layer(tape: &mut Tape, h: Var, w: Var, b: Var) -> Result<Var, TensorError> {
    let hw = tape.matmul_nt(h, w)?;
    tape.add_row(hw, b)
}
