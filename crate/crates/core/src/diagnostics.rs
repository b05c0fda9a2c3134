//! Finite-difference gradient suite over every layer type and the full loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{gat_layer, gcn_layer, mlp_layer, rgcn_layer, GnnVariant, GraphOperators, RgcnLayerVars};
use crate::model::{forward, loss, FeatureSet, ModelConfig, ModelError, ModelParams};
use crate::synthetic::{separable_fixture, FIXTURE_TEXT_DIM};
use crate::tensor::{grad_check, GradCheck, Matrix, Tape, TensorError, Var};

/// Step of the central differences.
pub const GRAD_EPS: f64 = 1e-6;
/// Largest acceptable relative error.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
pub struct GradCase {
    pub name: String,
    pub result: Result<GradCheck, ModelError>,
}

impl GradCase {
    pub fn passed(&self) -> bool {
        matches!(&self.result, Ok(c) if c.max_rel_error < GRAD_TOLERANCE)
    }
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// `Σ out ⊙ C` for a fixed random `C`, so every output coordinate matters.
fn project(tape: &mut Tape, out: Var, c: &Matrix) -> Result<Var, TensorError> {
    let c = tape.constant(c.clone());
    let prod = tape.mul_elem(out, c)?;
    tape.sum(prod)
}

fn layer_case(variant: GnnVariant, seed: u64) -> GradCase {
    let data = separable_fixture();
    let ops = GraphOperators::for_variant(&data.graph, variant);
    let (n, d) = (data.n_nodes(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![random(&mut rng, n, d)];
    let extra = match variant {
        GnnVariant::Rgcn => vec![(d, d); 3],
        GnnVariant::Gcn => vec![(d, d)],
        GnnVariant::Gat => vec![(d, d), (2 * d, 1)],
        GnnVariant::Mlp => vec![(d, d), (1, d)],
    };
    params.extend(extra.into_iter().map(|(r, c)| random(&mut rng, r, c)));
    let c = random(&mut rng, n, d);
    let result = grad_check::<_, TensorError>(
        |tape, v| {
            let out = match variant {
                GnnVariant::Rgcn => rgcn_layer(
                    tape,
                    v[0],
                    &ops,
                    RgcnLayerVars {
                        theta_self: v[1],
                        theta_following: v[2],
                        theta_follower: v[3],
                    },
                )?,
                GnnVariant::Gcn => gcn_layer(tape, v[0], &ops, v[1])?,
                GnnVariant::Gat => gat_layer(tape, v[0], &ops, v[1], v[2])?,
                GnnVariant::Mlp => mlp_layer(tape, v[0], v[1], v[2])?,
            };
            project(tape, out, &c)
        },
        &params,
        GRAD_EPS,
    )
    .map_err(|source| ModelError::Stage {
        stage: format!("{variant} layer"),
        source,
    });
    GradCase {
        name: format!("layer.{variant}"),
        result,
    }
}

fn loss_case(variant: GnnVariant, lambda: f64, features: FeatureSet, seed: u64) -> GradCase {
    let data = separable_fixture();
    let cfg = ModelConfig {
        dim: 8,
        text_dim: FIXTURE_TEXT_DIM,
        layers: 2,
        variant,
        lambda,
        features,
        inter_layer_activation: true,
        ..ModelConfig::default()
    };
    let ops = GraphOperators::for_variant(&data.graph, variant);
    let model = ModelParams::init(&cfg, seed);
    let params: Vec<Matrix> = model.values().cloned().collect();
    let result = grad_check::<_, ModelError>(
        |tape, vars| {
            let bound = model.bind_vars(vars.to_vec());
            let out = forward(tape, &data.features, &ops, &bound, &cfg)?;
            loss(tape, out.probs, &data.labels, data.masks.train(), &bound, &cfg)
        },
        &params,
        GRAD_EPS,
    );
    let suffix = if features == FeatureSet::ALL {
        String::new()
    } else {
        format!(".{features}")
    };
    GradCase {
        name: format!("loss.{variant}.lambda={lambda}{suffix}"),
        result,
    }
}

/// Every layer on the 6-node fixture, then the full loss for every variant
/// with λ ∈ {0, 0.01}, plus one run with text blocks disabled.
pub fn gradient_suite() -> Vec<GradCase> {
    let mut cases: Vec<GradCase> = GnnVariant::ALL
        .iter()
        .enumerate()
        .map(|(i, &v)| layer_case(v, 100 + i as u64))
        .collect();
    for (i, &v) in GnnVariant::ALL.iter().enumerate() {
        for lambda in [0.0, 0.01] {
            cases.push(loss_case(v, lambda, FeatureSet::ALL, 200 + i as u64));
        }
    }
    let num_cat = "num,cat".parse().expect("valid set");
    cases.push(loss_case(GnnVariant::Rgcn, 0.01, num_cat, 300));
    cases
}
