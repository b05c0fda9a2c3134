//! Full-batch training, model selection on validation F1, metrics and ablation sweeps.

mod ablation;
mod metrics;
mod optim;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::{ablate, ablation_csv, AblationAxis, AblationRow};
pub use metrics::{evaluate, predict_labels, score, Confusion, Metrics};
pub use optim::OptimizerKind;

use crate::graph::GraphOperators;
use crate::ingest::{Dataset, Split};
use crate::model::{forward, loss, Model, ModelConfig, ModelError, ModelParams};
use crate::tensor::{Matrix, Tape};
use optim::Optimizer;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("training diverged at epoch {epoch}: {source}")]
    Diverged {
        epoch: usize,
        #[source]
        source: ModelError,
    },
    #[error("{0} mask selects no users")]
    EmptyMask(&'static str),
    #[error("node {0} is under the mask but has no label")]
    Unlabeled(usize),
}

impl TrainError {
    pub fn is_numerical(&self) -> bool {
        match self {
            TrainError::Diverged { .. } => true,
            TrainError::Model(e) => e.is_numerical(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Stop after this many epochs without a strictly better val F1; 0 never stops early.
    pub patience: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            optimizer: OptimizerKind::ADAM,
            seed: 0,
            patience: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate must be finite and nonnegative (got {})", self.lr)));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !unit(beta1) || !unit(beta2) || eps.is_nan() || eps <= 0.0 {
                return Err(TrainError::Config("adam needs beta1, beta2 in [0, 1) and eps > 0".into()));
            }
        }
        self.model.validate()?;
        Ok(())
    }
}

/// One row of the training history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Train loss of the parameters the epoch started from.
    pub loss: f64,
    /// Validation metrics of the parameters the epoch ended with.
    pub val: Option<Metrics>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best-val-F1 parameters, or the final ones when there is no val split.
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn best_val(&self) -> Option<Metrics> {
        self.history[self.best_epoch - 1].val
    }
}

/// Trains from a seeded initialization on `dataset`'s train split.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let ops = GraphOperators::for_variant(&dataset.graph, cfg.model.variant);
    let init = ModelParams::init(&cfg.model, cfg.seed);
    train_from(dataset, &ops, cfg, init)
}

/// Trains starting from `params` with prebuilt graph operators.
pub fn train_from(
    dataset: &Dataset,
    ops: &GraphOperators,
    cfg: &TrainConfig,
    mut params: ModelParams,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mcfg = &cfg.model;
    let train_mask = dataset.masks.train();
    if !train_mask.contains(&true) {
        return Err(TrainError::EmptyMask("train"));
    }
    let val_mask = dataset.masks.val();
    let has_val = val_mask.contains(&true);

    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, &params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let diverged = |source: ModelError| {
            if source.is_numerical() {
                TrainError::Diverged { epoch, source }
            } else {
                TrainError::Model(source)
            }
        };
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let out = forward(&mut tape, &dataset.features, ops, &bound, mcfg).map_err(diverged)?;
        let l = loss(&mut tape, out.probs, &dataset.labels, train_mask, &bound, mcfg).map_err(diverged)?;
        let loss_value = tape.value(l).item();
        let grads = tape.backward(l).map_err(|e| diverged(e.into()))?;
        let grads: Vec<Matrix> = bound.vars().iter().map(|&v| grads.wrt(v)).collect();
        opt.step(&mut params, &grads);
        if params.values().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged {
                epoch,
                source: ModelError::Params("optimizer step produced non-finite parameters".into()),
            });
        }

        let val = if has_val {
            let probs = predict_probs(&params, mcfg, dataset, ops).map_err(diverged)?;
            Some(evaluate(&probs, &dataset.labels, val_mask)?)
        } else {
            None
        };
        history.push(EpochRecord {
            epoch,
            loss: loss_value,
            val,
        });

        if let Some(m) = val {
            if best.as_ref().is_none_or(|(f1, _, _)| m.f1 > *f1) {
                best = Some((m.f1, epoch, params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if cfg.patience > 0 && stale >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    let last = history.len();
    let (best_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (last, params),
    };
    Ok(TrainOutcome {
        model: Model {
            config: mcfg.clone(),
            params,
        },
        history,
        best_epoch,
        stopped_early,
    })
}

fn predict_probs(
    params: &ModelParams,
    cfg: &ModelConfig,
    dataset: &Dataset,
    ops: &GraphOperators,
) -> Result<Matrix, ModelError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = forward(&mut tape, &dataset.features, ops, &bound, cfg)?;
    Ok(tape.value(out.probs).clone())
}

/// Metrics of `model` on one split of `dataset`.
pub fn evaluate_split(
    model: &Model,
    dataset: &Dataset,
    ops: &GraphOperators,
    split: Split,
) -> Result<Metrics, TrainError> {
    let mask = dataset
        .masks
        .get(split)
        .ok_or_else(|| TrainError::Config("only train, val and test splits can be evaluated".into()))?;
    if !mask.contains(&true) {
        return Err(TrainError::EmptyMask(split_name(split)));
    }
    let probs = model.predict(&dataset.features, ops)?.probs;
    evaluate(&probs, &dataset.labels, mask)
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
        Split::Unlabeled => "unlabeled",
    }
}

/// `epoch,loss,val_acc,val_f1,val_mcc`; val columns are empty without a val split.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,loss,val_acc,val_f1,val_mcc\n");
    for r in history {
        let _ = write!(out, "{},{}", r.epoch, r.loss);
        match r.val {
            Some(m) => {
                let _ = writeln!(out, ",{},{},{}", m.accuracy, m.f1, m.mcc);
            }
            None => out.push_str(",,,\n"),
        }
    }
    out
}
