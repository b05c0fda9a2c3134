use super::config::{LossReduction, Modality, ModelConfig};
use super::params::BoundParams;
use super::ModelError;
use crate::graph::{gat_layer, gcn_layer, mlp_layer, rgcn_layer, GnnVariant, GraphOperators, RgcnLayerVars};
use crate::ingest::{FeatureBundle, Label};
use crate::tensor::{Matrix, Tape, TensorError, Var};

fn stage(name: impl Into<String>) -> impl FnOnce(TensorError) -> ModelError {
    let name = name.into();
    move |source| ModelError::Stage { stage: name, source }
}

fn modality_input(features: &FeatureBundle, m: Modality) -> &Matrix {
    match m {
        Modality::Description => &features.description,
        Modality::Tweets => &features.tweets,
        Modality::Numerical => &features.numerical,
        Modality::Categorical => &features.categorical,
    }
}

/// Four-modality user representation `r = [r_b; r_t; r_num; r_cat]`, n×D.
///
/// Each enabled block is `φ(x·Wᵀ + b)`; disabled blocks are zeros and never
/// read their raw input.
pub fn encode_features(
    tape: &mut Tape,
    features: &FeatureBundle,
    params: &BoundParams,
    cfg: &ModelConfig,
) -> Result<Var, ModelError> {
    if cfg.features.is_empty() {
        return Err(ModelError::Config("at least one feature modality must be enabled".into()));
    }
    let n = features.n_nodes();
    let q = cfg.block_dim();
    let mut blocks = Vec::with_capacity(4);
    for m in Modality::ALL {
        if !cfg.features.contains(m) {
            blocks.push(tape.constant(Matrix::zeros(n, q)));
            continue;
        }
        let x = modality_input(features, m);
        let expected = cfg.input_dim(m);
        if x.cols() != expected || x.rows() != n {
            return Err(ModelError::Width {
                modality: m.as_str(),
                expected,
                found: x.cols(),
            });
        }
        let label = format!("encode.{}", m.as_str());
        let p = m.param_prefix();
        let xv = tape.constant(x.clone());
        let h = tape
            .matmul_nt(xv, params.var(&format!("{p}.W")))
            .and_then(|h| tape.add_row(h, params.var(&format!("{p}.b"))))
            .and_then(|h| tape.leaky_relu(h, cfg.slope))
            .map_err(stage(label))?;
        blocks.push(h);
    }
    tape.concat_cols(&blocks).map_err(stage("encode.concat"))
}

/// Tape handles produced by a forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardPass {
    pub logits: Var,
    pub probs: Var,
}

/// Input transform, message passing, output MLP and softmax over an encoded `r`.
pub fn propagate(
    tape: &mut Tape,
    r: Var,
    ops: &GraphOperators,
    params: &BoundParams,
    cfg: &ModelConfig,
) -> Result<ForwardPass, ModelError> {
    let (n, d) = tape.shape(r);
    if d != cfg.dim {
        return Err(ModelError::Width {
            modality: "r",
            expected: cfg.dim,
            found: d,
        });
    }
    if cfg.variant != GnnVariant::Mlp && ops.n_nodes() != n {
        return Err(ModelError::Config(format!(
            "graph has {} nodes but features have {n} rows",
            ops.n_nodes()
        )));
    }

    let mut x = tape
        .matmul_nt(r, params.var("in.W_1"))
        .and_then(|h| tape.add_row(h, params.var("in.b_1")))
        .and_then(|h| tape.leaky_relu(h, cfg.slope))
        .map_err(stage("input"))?;

    for l in 0..cfg.layers {
        let name = format!("{}.{l}", cfg.variant);
        x = match cfg.variant {
            GnnVariant::Rgcn => rgcn_layer(
                tape,
                x,
                ops,
                RgcnLayerVars {
                    theta_self: params.var(&format!("rgcn.{l}.theta_self")),
                    theta_following: params.var(&format!("rgcn.{l}.theta_following")),
                    theta_follower: params.var(&format!("rgcn.{l}.theta_follower")),
                },
            ),
            GnnVariant::Gcn => gcn_layer(tape, x, ops, params.var(&format!("gcn.{l}.W"))),
            GnnVariant::Gat => gat_layer(
                tape,
                x,
                ops,
                params.var(&format!("gat.{l}.W")),
                params.var(&format!("gat.{l}.attn")),
            ),
            GnnVariant::Mlp => mlp_layer(
                tape,
                x,
                params.var(&format!("mlp.{l}.W")),
                params.var(&format!("mlp.{l}.b")),
            ),
        }
        .map_err(stage(name.clone()))?;
        if cfg.inter_layer_activation && l + 1 < cfg.layers {
            x = tape.leaky_relu(x, cfg.slope).map_err(stage(name))?;
        }
    }

    let h = tape
        .matmul_nt(x, params.var("out.W_2"))
        .and_then(|h| tape.add_row(h, params.var("out.b_2")))
        .and_then(|h| tape.leaky_relu(h, cfg.slope))
        .map_err(stage("output"))?;
    let logits = tape
        .matmul_nt(h, params.var("out.W_O"))
        .and_then(|z| tape.add_row(z, params.var("out.b_O")))
        .map_err(stage("logits"))?;
    let probs = tape.softmax_rows(logits).map_err(stage("softmax"))?;
    Ok(ForwardPass { logits, probs })
}

/// [`encode_features`] followed by [`propagate`].
pub fn forward(
    tape: &mut Tape,
    features: &FeatureBundle,
    ops: &GraphOperators,
    params: &BoundParams,
    cfg: &ModelConfig,
) -> Result<ForwardPass, ModelError> {
    let r = encode_features(tape, features, params, cfg)?;
    propagate(tape, r, ops, params, cfg)
}

/// `(row, y)` targets for the labeled nodes under `mask`.
pub fn masked_targets(labels: &[Option<Label>], mask: &[bool]) -> Result<Vec<(usize, f64)>, ModelError> {
    let mut out = Vec::new();
    for (i, (&m, l)) in mask.iter().zip(labels).enumerate() {
        if !m {
            continue;
        }
        match l {
            Some(l) => out.push((i, l.as_class() as f64)),
            None => return Err(ModelError::UnlabeledInMask(i)),
        }
    }
    if out.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    Ok(out)
}

/// Cross-entropy on `P(bot)` over the masked users plus `λ·Σ w²` over every parameter.
pub fn loss(
    tape: &mut Tape,
    probs: Var,
    labels: &[Option<Label>],
    mask: &[bool],
    params: &BoundParams,
    cfg: &ModelConfig,
) -> Result<Var, ModelError> {
    let targets = masked_targets(labels, mask)?;
    let divisor = match cfg.reduction {
        LossReduction::Sum => 1.0,
        LossReduction::Mean => targets.len() as f64,
    };
    let mut total = tape
        .binary_cross_entropy(probs, targets, divisor)
        .map_err(stage("loss.data"))?;
    if cfg.lambda > 0.0 {
        let mut reg: Option<Var> = None;
        for &v in params.vars() {
            let sq = tape.sum_squares(v).map_err(stage("loss.l2"))?;
            reg = Some(match reg {
                None => sq,
                Some(acc) => tape.add(acc, sq).map_err(stage("loss.l2"))?,
            });
        }
        if let Some(reg) = reg {
            let scaled = tape.scale(reg, cfg.lambda).map_err(stage("loss.l2"))?;
            total = tape.add(total, scaled).map_err(stage("loss"))?;
        }
    }
    Ok(total)
}
