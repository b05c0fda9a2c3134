//! Heterogeneous follow graphs and the message-passing layers run over them.

mod attention;
mod hetero;
mod layers;
mod sparse;

use thiserror::Error;

pub use attention::{attention_coefficients, GAT_SLOPE};
pub use hetero::{Csr, HeteroGraph, Relation};
pub use layers::{
    gat_layer, gcn_layer, mlp_layer, relational_mean_aggregate, rgcn_layer, GnnVariant,
    GraphOperators, RgcnLayerVars,
};
pub use sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("CSR offsets are malformed")]
    BadOffsets,
    #[error("node {node} has neighbor {neighbor} outside [0, {n_nodes})")]
    NeighborOutOfRange {
        node: usize,
        neighbor: usize,
        n_nodes: usize,
    },
    #[error("node {node} outside [0, {n_nodes})")]
    NodeOutOfRange { node: usize, n_nodes: usize },
    #[error("neighbors of node {node} are not sorted and unique")]
    UnsortedNeighbors { node: usize },
}
