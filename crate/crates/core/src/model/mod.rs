//! The end-to-end bot detector: feature encoders, message passing, softmax
//! head and the L2-regularized cross-entropy loss.

mod config;
mod forward;
mod params;

use thiserror::Error;

pub use config::{FeatureSet, LossReduction, Modality, ModelConfig};
pub use forward::{encode_features, forward, loss, masked_targets, propagate, ForwardPass};
pub use params::{param_layout, BoundParams, ModelParams, ParamSpec};

use crate::graph::{GnnVariant, GraphOperators, HeteroGraph};
use crate::ingest::{FeatureBundle, Label};
use crate::tensor::{Matrix, Tape, TensorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{modality} input is {found} wide, expected {expected}")]
    Width {
        modality: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        #[source]
        source: TensorError,
    },
    #[error("loss mask selects no users")]
    EmptyMask,
    #[error("node {0} is under the loss mask but has no label")]
    UnlabeledInMask(usize),
    #[error("parameters: {0}")]
    Params(String),
}

impl ModelError {
    /// True for NaN/Inf failures, as opposed to shape or data problems.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ModelError::Stage {
                source: TensorError::NonFinite { .. } | TensorError::NonFiniteGradient { .. },
                ..
            }
        )
    }
}

impl From<TensorError> for ModelError {
    fn from(source: TensorError) -> Self {
        ModelError::Stage {
            stage: "backward".into(),
            source,
        }
    }
}

/// Output of a tape-free prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Matrix,
    pub probs: Matrix,
}

/// A configuration together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = ModelParams::init(&config, seed);
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams) -> Result<Self, ModelError> {
        config.validate()?;
        let params = ModelParams::from_named(&config, params.to_named())?;
        Ok(Self { config, params })
    }

    pub fn operators(&self, g: &HeteroGraph) -> GraphOperators {
        GraphOperators::for_variant(g, self.config.variant)
    }

    pub fn predict(&self, features: &FeatureBundle, ops: &GraphOperators) -> Result<Prediction, ModelError> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = forward(&mut tape, features, ops, &bound, &self.config)?;
        Ok(Prediction {
            logits: tape.value(out.logits).clone(),
            probs: tape.value(out.probs).clone(),
        })
    }

    /// Loss value over `mask` without keeping the tape.
    pub fn loss_value(
        &self,
        features: &FeatureBundle,
        ops: &GraphOperators,
        labels: &[Option<Label>],
        mask: &[bool],
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = forward(&mut tape, features, ops, &bound, &self.config)?;
        let l = loss(&mut tape, out.probs, labels, mask, &bound, &self.config)?;
        Ok(tape.value(l).item())
    }
}

/// Recovers the architecture of a checkpoint from its tensor names and shapes.
///
/// Fields that leave no trace in the tensors (slope, inter-layer activation,
/// λ, reduction, enabled features) are copied from `base`.
pub fn infer_config(named: &[(String, Matrix)], base: &ModelConfig) -> Result<ModelConfig, ModelError> {
    let find = |name: &str| {
        named
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| ModelError::Params(format!("checkpoint lacks `{name}`")))
    };
    let w1 = find("in.W_1")?;
    let desc = find("enc.desc.W")?;
    let (variant, marker) = [
        (GnnVariant::Rgcn, ".theta_self"),
        (GnnVariant::Gcn, ".W"),
        (GnnVariant::Gat, ".attn"),
        (GnnVariant::Mlp, ".b"),
    ]
    .into_iter()
    .find(|(v, _)| named.iter().any(|(n, _)| n.starts_with(&format!("{v}."))))
    .ok_or_else(|| ModelError::Params("checkpoint has no message-passing layers".into()))?;
    let layers = named
        .iter()
        .filter(|(n, _)| n.starts_with(&format!("{variant}.")) && n.ends_with(marker))
        .count();
    let cfg = ModelConfig {
        dim: w1.rows(),
        text_dim: desc.cols(),
        layers,
        variant,
        ..base.clone()
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infer_config_recovers_architecture() {
        for variant in GnnVariant::ALL {
            let cfg = ModelConfig {
                dim: 12,
                text_dim: 7,
                layers: 3,
                variant,
                ..ModelConfig::default()
            };
            let p = ModelParams::init(&cfg, 3);
            let got = infer_config(&p.to_named(), &ModelConfig::default()).unwrap();
            assert_eq!(got, cfg, "{variant}");
        }
    }
}
