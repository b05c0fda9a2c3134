use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Modality, ModelConfig};
use super::ModelError;
use crate::graph::GnnVariant;
use crate::tensor::{Matrix, Tape, Var};

/// Shape and initialization rule of one learnable tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// `Some(fan_in)` for weights drawn from `U(−1/√fan_in, 1/√fan_in)`; `None` for zero-initialized biases.
    pub fan_in: Option<usize>,
}

fn weight(name: String, rows: usize, cols: usize) -> ParamSpec {
    ParamSpec {
        name,
        rows,
        cols,
        fan_in: Some(cols),
    }
}

fn bias(name: String, cols: usize) -> ParamSpec {
    ParamSpec {
        name,
        rows: 1,
        cols,
        fan_in: None,
    }
}

/// Canonical parameter names and shapes for `cfg`, in checkpoint order.
///
/// Weights are stored out×in, so a layer computes `x·Wᵀ + b` row-wise.
pub fn param_layout(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let d = cfg.dim;
    let q = cfg.block_dim();
    let mut out = Vec::new();
    for m in Modality::ALL {
        let p = m.param_prefix();
        out.push(weight(format!("{p}.W"), q, cfg.input_dim(m)));
        out.push(bias(format!("{p}.b"), q));
    }
    out.push(weight("in.W_1".into(), d, d));
    out.push(bias("in.b_1".into(), d));
    for l in 0..cfg.layers {
        match cfg.variant {
            GnnVariant::Rgcn => {
                for part in ["theta_self", "theta_following", "theta_follower"] {
                    out.push(weight(format!("rgcn.{l}.{part}"), d, d));
                }
            }
            GnnVariant::Gcn => out.push(weight(format!("gcn.{l}.W"), d, d)),
            GnnVariant::Gat => {
                out.push(weight(format!("gat.{l}.W"), d, d));
                out.push(ParamSpec {
                    name: format!("gat.{l}.attn"),
                    rows: 2 * d,
                    cols: 1,
                    fan_in: Some(2 * d),
                });
            }
            GnnVariant::Mlp => {
                out.push(weight(format!("mlp.{l}.W"), d, d));
                out.push(bias(format!("mlp.{l}.b"), d));
            }
        }
    }
    out.push(weight("out.W_2".into(), d, d));
    out.push(bias("out.b_2".into(), d));
    out.push(weight("out.W_O".into(), 2, d));
    out.push(bias("out.b_O".into(), 2));
    out
}

/// RNG stream for a parameter; per-layer main weights map to a shared name.
fn stream_id(name: &str) -> u64 {
    let shared = ["rgcn", "gcn", "gat", "mlp"].iter().find_map(|v| {
        let rest = name.strip_prefix(v)?.strip_prefix('.')?;
        let (layer, part) = rest.split_once('.')?;
        matches!(part, "theta_self" | "W").then(|| format!("layer.{layer}.W"))
    });
    let key = shared.as_deref().unwrap_or(name);
    // FNV-1a; stable across platforms and releases.
    key.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// All learnable tensors of a model, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    entries: Vec<(String, Matrix)>,
    index: HashMap<String, usize>,
}

impl ModelParams {
    /// Seeded fan-in uniform weights and zero biases.
    ///
    /// Every tensor draws from its own ChaCha stream keyed by its role, so a
    /// tensor's initial value does not depend on which other tensors exist.
    /// The main weight of layer `l` shares one stream across all variants.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let entries = param_layout(cfg)
            .into_iter()
            .map(|spec| {
                let m = match spec.fan_in {
                    None => Matrix::zeros(spec.rows, spec.cols),
                    Some(fan_in) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(stream_id(&spec.name));
                        let k = 1.0 / (fan_in as f64).sqrt();
                        let data = (0..spec.rows * spec.cols).map(|_| rng.gen_range(-k..k)).collect();
                        Matrix::from_vec(spec.rows, spec.cols, data).expect("sized by layout")
                    }
                };
                (spec.name, m)
            })
            .collect();
        Self::from_entries_unchecked(entries)
    }

    fn from_entries_unchecked(entries: Vec<(String, Matrix)>) -> Self {
        let index = entries.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
        Self { entries, index }
    }

    /// Takes named tensors (e.g. from a checkpoint) and checks them against `cfg`'s layout.
    pub fn from_named(cfg: &ModelConfig, named: Vec<(String, Matrix)>) -> Result<Self, ModelError> {
        let mut by_name: HashMap<String, Matrix> = named.into_iter().collect();
        let mut entries = Vec::new();
        for spec in param_layout(cfg) {
            let m = by_name
                .remove(&spec.name)
                .ok_or_else(|| ModelError::Params(format!("missing tensor `{}`", spec.name)))?;
            if m.shape() != (spec.rows, spec.cols) {
                return Err(ModelError::Params(format!(
                    "tensor `{}` is {:?}, expected {:?}",
                    spec.name,
                    m.shape(),
                    (spec.rows, spec.cols)
                )));
            }
            if !m.is_finite() {
                return Err(ModelError::Params(format!("tensor `{}` is not finite", spec.name)));
            }
            entries.push((spec.name, m));
        }
        if let Some(extra) = by_name.keys().min() {
            return Err(ModelError::Params(format!("unexpected tensor `{extra}`")));
        }
        Ok(Self::from_entries_unchecked(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.index.get(name).map(|&i| &mut self.entries[i].1)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn values(&self) -> impl Iterator<Item = &Matrix> {
        self.entries.iter().map(|(_, m)| m)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.entries.iter_mut().map(|(_, m)| m)
    }

    pub fn to_named(&self) -> Vec<(String, Matrix)> {
        self.entries.clone()
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }

    /// Records every tensor as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let vars = self.entries.iter().map(|(_, m)| tape.param(m.clone())).collect();
        BoundParams {
            vars,
            index: self.index.clone(),
        }
    }

    /// Binding over leaves the caller already recorded, in canonical order.
    pub fn bind_vars(&self, vars: Vec<Var>) -> BoundParams {
        assert_eq!(vars.len(), self.entries.len(), "one var per parameter");
        BoundParams {
            vars,
            index: self.index.clone(),
        }
    }
}

/// Tape handles for a [`ModelParams`], looked up by canonical name.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Var {
        match self.index.get(name) {
            Some(&i) => self.vars[i],
            None => panic!("parameter `{name}` is not part of this model"),
        }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_names_and_shapes() {
        let cfg = ModelConfig {
            dim: 8,
            text_dim: 5,
            layers: 2,
            ..ModelConfig::default()
        };
        let names: Vec<String> = param_layout(&cfg).into_iter().map(|s| s.name).collect();
        assert_eq!(names[0], "enc.desc.W");
        assert!(names.contains(&"rgcn.1.theta_follower".to_string()));
        assert_eq!(names.last().unwrap(), "out.b_O");

        let p = ModelParams::init(&cfg, 1);
        assert_eq!(p.get("enc.desc.W").unwrap().shape(), (2, 5));
        assert_eq!(p.get("enc.cat.W").unwrap().shape(), (2, 22));
        assert_eq!(p.get("out.W_O").unwrap().shape(), (2, 8));
        assert!(p.get("in.b_1").unwrap().as_slice().iter().all(|&x| x == 0.0));
        let k = 1.0 / 5f64.sqrt();
        assert!(p.get("enc.desc.W").unwrap().as_slice().iter().all(|x| x.abs() <= k));
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig {
            dim: 8,
            text_dim: 4,
            ..ModelConfig::default()
        };
        assert_eq!(ModelParams::init(&cfg, 7), ModelParams::init(&cfg, 7));
        assert_ne!(ModelParams::init(&cfg, 7), ModelParams::init(&cfg, 8));
    }

    #[test]
    fn main_layer_weights_match_across_variants() {
        let base = ModelConfig {
            dim: 8,
            text_dim: 3,
            ..ModelConfig::default()
        };
        let rgcn = ModelParams::init(&base, 5);
        for (variant, name) in [(GnnVariant::Mlp, "mlp.1.W"), (GnnVariant::Gcn, "gcn.1.W"), (GnnVariant::Gat, "gat.1.W")] {
            let other = ModelParams::init(&ModelConfig { variant, ..base.clone() }, 5);
            assert_eq!(other.get(name), rgcn.get("rgcn.1.theta_self"));
            assert_eq!(other.get("out.W_O"), rgcn.get("out.W_O"));
        }
        assert_ne!(rgcn.get("rgcn.0.theta_self"), rgcn.get("rgcn.1.theta_self"));
        assert_ne!(rgcn.get("rgcn.0.theta_self"), rgcn.get("rgcn.0.theta_following"));
    }

    #[test]
    fn from_named_validates_layout() {
        let cfg = ModelConfig {
            dim: 4,
            text_dim: 3,
            layers: 1,
            variant: GnnVariant::Gat,
            ..ModelConfig::default()
        };
        let p = ModelParams::init(&cfg, 0);
        assert_eq!(ModelParams::from_named(&cfg, p.to_named()).unwrap(), p);

        let mut named = p.to_named();
        named.pop();
        assert!(ModelParams::from_named(&cfg, named).is_err());

        let mut named = p.to_named();
        named.push(("extra".into(), Matrix::zeros(1, 1)));
        assert!(ModelParams::from_named(&cfg, named).is_err());
    }
}
