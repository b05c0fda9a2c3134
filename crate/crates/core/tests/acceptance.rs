//! Acceptance run: one PASS/FAIL/SKIP line per criterion, nonzero exit on any failure.
//!
//! Set `BOTRGCN_TWIBOT20` to a prepared dataset bundle (with real text
//! embeddings) to enable the TwiBot-20 comparison.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use botrgcn::diagnostics::{gradient_suite, GRAD_TOLERANCE};
use botrgcn::graph::{
    gat_layer, gcn_layer, mlp_layer, rgcn_layer, Csr, GnnVariant, GraphOperators, HeteroGraph, Relation,
    RgcnLayerVars,
};
use botrgcn::ingest::{Dataset, Label, Split};
use botrgcn::model::{forward, ModelConfig, ModelParams};
use botrgcn::synthetic::{community_benchmark, separable_fixture, CommunitySpec, FIXTURE_TEXT_DIM};
use botrgcn::tensor::{Matrix, Tape};
use botrgcn::train::{evaluate_split, history_csv, train, Confusion, OptimizerKind, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> HeteroGraph {
    let mut rel = || {
        let lists = (0..n)
            .map(|_| (0..n).filter(|_| rng.gen_bool(p)).collect())
            .collect();
        Csr::from_lists(lists)
    };
    let (a, b) = (rel(), rel());
    HeteroGraph::new(n, a, b).unwrap()
}

/// Evaluates one layer with fresh leaves.
fn run_layer(variant: GnnVariant, g: &HeteroGraph, h: &Matrix, w: &[Matrix]) -> Matrix {
    let ops = GraphOperators::for_variant(g, variant);
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let v: Vec<_> = w.iter().map(|m| tape.param(m.clone())).collect();
    let out = match variant {
        GnnVariant::Rgcn => rgcn_layer(
            &mut tape,
            hv,
            &ops,
            RgcnLayerVars {
                theta_self: v[0],
                theta_following: v[1],
                theta_follower: v[2],
            },
        ),
        GnnVariant::Gcn => gcn_layer(&mut tape, hv, &ops, v[0]),
        GnnVariant::Gat => gat_layer(&mut tape, hv, &ops, v[0], v[1]),
        GnnVariant::Mlp => mlp_layer(&mut tape, hv, v[0], v[1]),
    }
    .unwrap();
    tape.value(out).clone()
}

fn layer_weights(rng: &mut impl Rng, variant: GnnVariant, d: usize) -> Vec<Matrix> {
    match variant {
        GnnVariant::Rgcn => (0..3).map(|_| random(rng, d, d)).collect(),
        GnnVariant::Gcn => vec![random(rng, d, d)],
        GnnVariant::Gat => vec![random(rng, d, d), random(rng, 2 * d, 1)],
        GnnVariant::Mlp => vec![random(rng, d, d), random(rng, 1, d)],
    }
}

fn gradient_suite_check() -> Outcome {
    let start = Instant::now();
    let cases = gradient_suite();
    let elapsed = start.elapsed();
    let worst = cases
        .iter()
        .map(|c| c.result.as_ref().map(|r| r.max_rel_error).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let failed: Vec<&str> = cases.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    check(
        failed.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "{} cases, max rel error {worst:.2e} (< {GRAD_TOLERANCE:.0e}), {:.2}s{}",
            cases.len(),
            elapsed.as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!(", failed: {failed:?}") }
        ),
    )
}

fn eq5_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=12);
        let d = rng.gen_range(1..=5);
        let p = rng.gen_range(0.0..0.6);
        let g = random_graph(&mut rng, n, p);
        let h = random(&mut rng, n, d);
        let w = layer_weights(&mut rng, GnnVariant::Rgcn, d);
        let got = run_layer(GnnVariant::Rgcn, &g, &h, &w);
        for i in 0..n {
            for o in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += h.get(i, k) * w[0].get(o, k);
                }
                for (r, theta) in [(Relation::Following, &w[1]), (Relation::Follower, &w[2])] {
                    let nbrs = g.neighbors(r, i);
                    for &j in nbrs {
                        for k in 0..d {
                            acc += h.get(j, k) * theta.get(o, k) / nbrs.len() as f64;
                        }
                    }
                }
                worst = worst.max((got.get(i, o) - acc).abs());
            }
        }
    }
    check(worst <= 1e-10, format!("50 random graphs, max |diff| {worst:.2e}"))
}

fn small_config(variant: GnnVariant) -> ModelConfig {
    ModelConfig {
        dim: 8,
        text_dim: FIXTURE_TEXT_DIM,
        layers: 2,
        variant,
        ..ModelConfig::default()
    }
}

fn model_logits(data: &Dataset, cfg: &ModelConfig, params: &ModelParams) -> Matrix {
    let ops = GraphOperators::for_variant(&data.graph, cfg.variant);
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = forward(&mut tape, &data.features, &ops, &bound, cfg).unwrap();
    tape.value(out.logits).clone()
}

/// MLP parameters equal to an RGCN model's with `Θ_self` as weight and zero bias.
fn as_mlp(rgcn: &ModelParams, cfg: &ModelConfig) -> ModelParams {
    let named = rgcn
        .iter()
        .filter(|(n, _)| !n.contains("theta_follow"))
        .map(|(n, m)| (n.replace("theta_self", "W").replace("rgcn.", "mlp."), m.clone()))
        .chain((0..cfg.layers).map(|l| (format!("mlp.{l}.b"), Matrix::zeros(1, cfg.dim))))
        .collect();
    let mlp_cfg = ModelConfig {
        variant: GnnVariant::Mlp,
        ..cfg.clone()
    };
    ModelParams::from_named(&mlp_cfg, named).unwrap()
}

fn structural_reductions() -> Outcome {
    let data = separable_fixture();
    let cfg = small_config(GnnVariant::Rgcn);
    let mlp_cfg = small_config(GnnVariant::Mlp);
    let params = ModelParams::init(&cfg, 11);

    let edgeless = data.without_edges();
    let a = model_logits(&edgeless, &cfg, &params);
    let b = model_logits(&edgeless, &mlp_cfg, &as_mlp(&params, &cfg));
    let edgeless_diff = a.max_abs_diff(&b);

    let mut zeroed = params.clone();
    for l in 0..cfg.layers {
        for r in ["following", "follower"] {
            let m = zeroed.get_mut(&format!("rgcn.{l}.theta_{r}")).unwrap();
            *m = Matrix::zeros(m.rows(), m.cols());
        }
    }
    let a = model_logits(&data, &cfg, &zeroed);
    let b = model_logits(&data, &mlp_cfg, &as_mlp(&zeroed, &cfg));
    let theta_diff = a.max_abs_diff(&b);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut gat_diff = 0.0f64;
    for _ in 0..10 {
        let n = rng.gen_range(1..=12);
        let d = 4;
        let g = random_graph(&mut rng, n, 0.3);
        let h = random(&mut rng, n, d);
        let w = random(&mut rng, d, d);
        let got = run_layer(GnnVariant::Gat, &g, &h, &[w.clone(), Matrix::zeros(2 * d, 1)]);
        let homog = g.homogenized();
        for i in 0..n {
            let nbrs = homog.neighbors(i);
            for o in 0..d {
                let mut acc = 0.0;
                for &j in nbrs {
                    for k in 0..d {
                        acc += h.get(j, k) * w.get(o, k);
                    }
                }
                gat_diff = gat_diff.max((got.get(i, o) - acc / nbrs.len() as f64).abs());
            }
        }
    }

    check(
        edgeless_diff < 1e-12 && theta_diff < 1e-12 && gat_diff <= 1e-10,
        format!(
            "edgeless RGCN vs MLP {edgeless_diff:.1e}, zero relation weights vs MLP {theta_diff:.1e}, \
             zero-attention GAT vs mean {gat_diff:.1e}"
        ),
    )
}

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    let mut inv = vec![0; perm.len()];
    for (old, &new) in perm.iter().enumerate() {
        inv[new] = old;
    }
    m.gather_rows(&inv)
}

fn permutation_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let n = 10;
    let d = 4;
    let g = random_graph(&mut rng, n, 0.3);
    let h = random(&mut rng, n, d);
    let mut mismatches = Vec::new();
    for t in 0..20 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let gp = g.permute(&perm);
        let hp = permute_rows(&h, &perm);
        for variant in GnnVariant::ALL {
            let w = layer_weights(&mut rng, variant, d);
            let base = run_layer(variant, &g, &h, &w);
            let moved = run_layer(variant, &gp, &hp, &w);
            if permute_rows(&base, &perm) != moved {
                mismatches.push(format!("perm {t} {variant}"));
            }
        }
    }
    check(
        mismatches.is_empty(),
        format!("20 permutations x 4 layer types on 10 nodes, bitwise equal; mismatches: {mismatches:?}"),
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut bad = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..200);
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let probs = Matrix::from_rows(
            &pred.iter().map(|&b| if b { vec![0.3, 0.7] } else { vec![0.7, 0.3] }).collect::<Vec<_>>(),
        );
        let labels: Vec<Option<Label>> = truth.iter().map(|&b| Some(if b { Label::Bot } else { Label::Human })).collect();
        let m = botrgcn::train::evaluate(&probs, &labels, &vec![true; n]).unwrap();

        let (mut tp, mut tn, mut fp, mut fn_) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &p) in truth.iter().zip(&pred) {
            match (t, p) {
                (true, true) => tp += 1.0,
                (false, false) => tn += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
            }
        }
        let acc = (tp + tn) / n as f64;
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        let mcc = if denom > 0.0 { ((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0) } else { 0.0 };
        if (m.accuracy, m.f1, m.mcc) != (acc, f1, mcc) {
            bad += 1;
        }
    }
    let worked = Confusion {
        tp: 40,
        tn: 30,
        fp: 10,
        fn_: 20,
    }
    .metrics();
    let worked_ok = (worked.f1 - 0.727273).abs() <= 1e-6 && (worked.mcc - 0.408248).abs() <= 1e-6;
    check(
        bad == 0 && worked_ok,
        format!(
            "1000 random vectors, {bad} mismatches; worked case F1 {:.6} MCC {:.6}",
            worked.f1, worked.mcc
        ),
    )
}

fn benchmark_config(variant: GnnVariant) -> TrainConfig {
    TrainConfig {
        epochs: 300,
        lr: 1e-2,
        optimizer: OptimizerKind::ADAM,
        seed: 1,
        patience: 0,
        model: ModelConfig {
            dim: 32,
            text_dim: CommunitySpec::default().text_dim,
            layers: 2,
            variant,
            ..ModelConfig::default()
        },
    }
}

fn synthetic_benchmark() -> Outcome {
    let start = Instant::now();
    let data = community_benchmark(&CommunitySpec::default());
    let mut acc = Vec::new();
    for variant in [GnnVariant::Rgcn, GnnVariant::Mlp] {
        let out = train(&data, &benchmark_config(variant)).unwrap();
        let ops = GraphOperators::for_variant(&data.graph, variant);
        acc.push(evaluate_split(&out.model, &data, &ops, Split::Test).unwrap().accuracy);
    }
    let elapsed = start.elapsed();
    check(
        acc[0] >= 0.95 && acc[1] <= 0.65 && elapsed < Duration::from_secs(60),
        format!(
            "RGCN test acc {:.4} (>= 0.95), MLP test acc {:.4} (<= 0.65), {:.1}s",
            acc[0],
            acc[1],
            elapsed.as_secs_f64()
        ),
    )
}

fn separable_end_to_end() -> Outcome {
    let data = separable_fixture();
    let cfg = TrainConfig {
        epochs: 200,
        lr: 1e-2,
        model: small_config(GnnVariant::Rgcn),
        ..TrainConfig::default()
    };
    let out = train(&data, &cfg).unwrap();
    let losses: Vec<f64> = out.history.iter().take(20).map(|r| r.loss).collect();
    let decreasing = losses.windows(2).all(|w| w[1] < w[0]);
    let ops = GraphOperators::for_variant(&data.graph, GnnVariant::Rgcn);
    let train_acc = evaluate_split(&out.model, &data, &ops, Split::Train).unwrap().accuracy;
    check(
        decreasing && train_acc == 1.0,
        format!(
            "train acc {train_acc}, loss {:.4} -> {:.4} over 20 epochs, strictly decreasing: {decreasing}",
            losses[0], losses[19]
        ),
    )
}

fn determinism() -> Outcome {
    let data = community_benchmark(&CommunitySpec::default());
    let cfg = TrainConfig {
        epochs: 40,
        ..benchmark_config(GnnVariant::Rgcn)
    };
    let run = || history_csv(&train(&data, &cfg).unwrap().history);
    let a = run();
    let b = run();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    check(
        a == b && a == single,
        format!(
            "{} history bytes; repeat identical: {}, single-thread identical: {}",
            a.len(),
            a == b,
            a == single
        ),
    )
}

fn twibot20() -> Outcome {
    let Some(path) = std::env::var_os("BOTRGCN_TWIBOT20").map(PathBuf::from) else {
        return Outcome::Skip("BOTRGCN_TWIBOT20 not set".into());
    };
    if !path.is_file() {
        return Outcome::Skip(format!("{} not found", path.display()));
    }
    let data = match Dataset::load(&path) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("cannot load bundle: {e}")),
    };
    let cfg = TrainConfig {
        model: ModelConfig {
            text_dim: data.features.text_dim(),
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let out = match train(&data, &cfg) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(format!("training failed: {e}")),
    };
    let ops = GraphOperators::for_variant(&data.graph, cfg.model.variant);
    let m = evaluate_split(&out.model, &data, &ops, Split::Test).unwrap();
    check(
        (m.accuracy - 0.8462).abs() <= 0.02 && (m.mcc - 0.7021).abs() <= 0.03,
        format!("test acc {:.4} (0.8462 +/- 0.02), MCC {:.4} (0.7021 +/- 0.03)", m.accuracy, m.mcc),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 9] = [
        ("gradient suite", gradient_suite_check),
        ("relational layer oracle", eq5_oracle),
        ("structural reductions", structural_reductions),
        ("permutation equivariance", permutation_equivariance),
        ("metrics oracle", metrics_oracle),
        ("synthetic community benchmark", synthetic_benchmark),
        ("separable fixture end-to-end", separable_end_to_end),
        ("determinism", determinism),
        ("TwiBot-20 comparison (data-gated)", twibot20),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        match f() {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}
