//! BotRGCN: Twitter bot detection with relational graph convolutional networks.
//!
//! The crate covers the whole pipeline: parsing user records and follow
//! edges ([`ingest`]), a small reverse-mode autodiff core ([`tensor`]),
//! relational and homogeneous message passing ([`graph`]), the end-to-end
//! model and its regularized loss ([`model`]), and full-batch training with
//! accuracy/F1/MCC evaluation and ablation sweeps ([`train`]).
//!
//! With the default `parallel` feature, dense and sparse kernels split work
//! across rows with rayon and ablation sweeps train configurations
//! concurrently. Results are bit-identical with the feature disabled.

pub mod diagnostics;
pub mod graph;
pub mod ingest;
pub mod kernels;
pub mod model;
pub mod synthetic;
pub mod train;
pub mod tensor;
