use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::graph::GnnVariant;

/// One of the four per-user input blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Description,
    Tweets,
    Numerical,
    Categorical,
}

impl Modality {
    /// Concatenation order of the encoded blocks.
    pub const ALL: [Modality; 4] = [
        Modality::Description,
        Modality::Tweets,
        Modality::Numerical,
        Modality::Categorical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Description => "desc",
            Modality::Tweets => "tweets",
            Modality::Numerical => "num",
            Modality::Categorical => "cat",
        }
    }

    /// Parameter-name prefix of this modality's encoder.
    pub fn param_prefix(self) -> &'static str {
        match self {
            Modality::Description => "enc.desc",
            Modality::Tweets => "enc.tweets",
            Modality::Numerical => "enc.num",
            Modality::Categorical => "enc.cat",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "desc" | "description" => Ok(Modality::Description),
            "tweets" | "tweet" => Ok(Modality::Tweets),
            "num" | "numerical" => Ok(Modality::Numerical),
            "cat" | "categorical" => Ok(Modality::Categorical),
            other => Err(format!("unknown feature `{other}` (expected desc, tweets, num or cat)")),
        }
    }
}

/// Subset of enabled modalities. Disabled ones feed zero blocks.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FeatureSet(u8);

impl FeatureSet {
    pub const ALL: FeatureSet = FeatureSet(0b1111);

    pub fn empty() -> Self {
        FeatureSet(0)
    }

    pub fn of(modalities: &[Modality]) -> Self {
        FeatureSet(modalities.iter().fold(0, |acc, m| acc | m.bit()))
    }

    pub fn contains(self, m: Modality) -> bool {
        self.0 & m.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn without(self, m: Modality) -> Self {
        FeatureSet(self.0 & !m.bit())
    }

    pub fn iter(self) -> impl Iterator<Item = Modality> {
        Modality::ALL.into_iter().filter(move |&m| self.contains(m))
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == FeatureSet::ALL {
            return f.write_str("all");
        }
        let names: Vec<&str> = self.iter().map(Modality::as_str).collect();
        f.write_str(&names.join("+"))
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeatureSet({self})")
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    /// `all`, or modality names separated by `,` or `+`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "all" {
            return Ok(FeatureSet::ALL);
        }
        let mut set = FeatureSet::empty();
        for part in s.split([',', '+']).filter(|p| !p.trim().is_empty()) {
            set = FeatureSet(set.0 | part.parse::<Modality>()?.bit());
        }
        if set.is_empty() {
            return Err("feature set must name at least one of desc, tweets, num, cat".into());
        }
        Ok(set)
    }
}

impl From<FeatureSet> for String {
    fn from(f: FeatureSet) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for FeatureSet {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossReduction {
    /// Literal sum over labeled users.
    Sum,
    /// Sum divided by the number of labeled users.
    Mean,
}

impl FromStr for LossReduction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(LossReduction::Sum),
            "mean" => Ok(LossReduction::Mean),
            other => Err(format!("unknown reduction `{other}` (expected sum or mean)")),
        }
    }
}

/// Architecture and loss settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// User embedding width `D`; each modality block is `D/4` wide.
    pub dim: usize,
    /// Width of the description and tweet embeddings.
    pub text_dim: usize,
    /// Number of message-passing layers.
    pub layers: usize,
    pub variant: GnnVariant,
    pub slope: f64,
    /// Apply leaky-relu between consecutive message-passing layers.
    pub inter_layer_activation: bool,
    /// L2 coefficient over every learnable tensor, biases included.
    pub lambda: f64,
    pub reduction: LossReduction,
    pub features: FeatureSet,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            text_dim: 768,
            layers: 2,
            variant: GnnVariant::Rgcn,
            slope: 0.01,
            inter_layer_activation: false,
            lambda: 5e-3,
            reduction: LossReduction::Mean,
            features: FeatureSet::ALL,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.dim == 0 || !self.dim.is_multiple_of(4) {
            return bad(format!("D must be divisible by 4 (got {})", self.dim));
        }
        if self.text_dim == 0 {
            return bad("text embedding width must be positive".into());
        }
        if self.layers == 0 {
            return bad("at least one message-passing layer is required".into());
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return bad(format!("leaky-relu slope must lie in (0, 1) (got {})", self.slope));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be a finite nonnegative number (got {})", self.lambda));
        }
        if self.features.is_empty() {
            return bad("at least one feature modality must be enabled".into());
        }
        Ok(())
    }

    pub fn block_dim(&self) -> usize {
        self.dim / 4
    }

    /// Input width of a modality's encoder.
    pub fn input_dim(&self, m: Modality) -> usize {
        match m {
            Modality::Description | Modality::Tweets => self.text_dim,
            Modality::Numerical => 6,
            Modality::Categorical => 22,
        }
    }
}
