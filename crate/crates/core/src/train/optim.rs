use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::ADAM),
            other => Err(format!("unknown optimizer `{other}` (expected sgd or adam)")),
        }
    }
}

/// Per-parameter optimizer state.
pub(crate) struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Optimizer {
    pub(crate) fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Self {
        let zeros = || params.values().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (zeros(), zeros()),
        };
        Self { kind, lr, step: 0, m, v }
    }

    /// `grads` are in the canonical parameter order.
    pub(crate) fn step(&mut self, params: &mut ModelParams, grads: &[Matrix]) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.values_mut().zip(grads) {
                    for (w, &dw) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *w -= self.lr * dw;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for (((p, g), m), v) in params.values_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    let slots = p.as_mut_slice().iter_mut().zip(g.as_slice());
                    for ((w, &dw), (mi, vi)) in slots.zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice())) {
                        *mi = beta1 * *mi + (1.0 - beta1) * dw;
                        *vi = beta2 * *vi + (1.0 - beta2) * dw * dw;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= self.lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn first_adam_step_moves_each_weight_by_lr() {
        // With bias correction the first step is lr·g/(|g| + eps).
        let cfg = ModelConfig {
            dim: 4,
            text_dim: 2,
            layers: 1,
            ..ModelConfig::default()
        };
        let mut p = ModelParams::init(&cfg, 0);
        let before = p.clone();
        let grads: Vec<Matrix> = p.values().map(|m| m.map(|_| 2.0)).collect();
        let mut opt = Optimizer::new(OptimizerKind::ADAM, 0.1, &p);
        opt.step(&mut p, &grads);
        for (a, b) in p.values().zip(before.values()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((y - x - 0.1 * 2.0 / (2.0 + 1e-8)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sgd_step() {
        let cfg = ModelConfig {
            dim: 4,
            text_dim: 2,
            layers: 1,
            ..ModelConfig::default()
        };
        let mut p = ModelParams::init(&cfg, 0);
        let before = p.clone();
        let grads: Vec<Matrix> = p.values().map(|m| m.map(|_| -1.0)).collect();
        Optimizer::new(OptimizerKind::Sgd, 0.5, &p).step(&mut p, &grads);
        for (a, b) in p.values().zip(before.values()) {
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y - 0.5).abs() < 1e-12);
            }
        }
    }
}
