use botrgcn::graph::{attention_coefficients, GnnVariant, GraphOperators, HeteroGraph, GAT_SLOPE};
use botrgcn::model::{encode_features, FeatureSet, Modality, Model, ModelConfig, ModelParams};
use botrgcn::synthetic::{separable_fixture, FIXTURE_TEXT_DIM};
use botrgcn::tensor::{Matrix, Tape};
use botrgcn::train::{ablate, AblationAxis, Confusion, TrainConfig};
use proptest::prelude::*;

fn cfg(variant: GnnVariant, features: FeatureSet) -> ModelConfig {
    ModelConfig {
        dim: 8,
        text_dim: FIXTURE_TEXT_DIM,
        layers: 2,
        variant,
        features,
        ..ModelConfig::default()
    }
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mcc_is_bounded_and_flips_sign(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
        let m = Confusion { tp, tn, fp, fn_ }.metrics();
        prop_assert!((-1.0..=1.0).contains(&m.mcc));
        prop_assert!((0.0..=1.0).contains(&m.f1));
        if tp + tn + fp + fn_ > 0 {
            prop_assert_eq!(m.accuracy, (tp + tn) as f64 / (tp + tn + fp + fn_) as f64);
        }
        // Flipping every prediction swaps tp<->fn and tn<->fp.
        let flipped = Confusion { tp: fn_, tn: fp, fp: tn, fn_: tp }.metrics();
        let margins = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        if margins.iter().all(|&x| x > 0) {
            prop_assert!((flipped.mcc + m.mcc).abs() < 1e-12);
        }
    }

    #[test]
    fn disabled_modality_ignores_its_input(noise in matrix(6, FIXTURE_TEXT_DIM), num in matrix(6, 6), seed in 0u64..1000) {
        let data = separable_fixture();
        for (disabled, swap) in [(Modality::Tweets, 0), (Modality::Numerical, 1)] {
            let c = cfg(GnnVariant::Rgcn, FeatureSet::ALL.without(disabled));
            let model = Model::new(c, seed).unwrap();
            let ops = GraphOperators::for_variant(&data.graph, GnnVariant::Rgcn);
            let base = model.predict(&data.features, &ops).unwrap();
            let mut changed = data.features.clone();
            if swap == 0 {
                changed.tweets = noise.clone();
            } else {
                changed.numerical = num.clone();
            }
            let moved = model.predict(&changed, &ops).unwrap();
            prop_assert_eq!(base, moved);
        }
    }

    #[test]
    fn attention_rows_sum_to_one(z in matrix(7, 3), a in matrix(6, 1), edges in prop::collection::vec((0usize..7, 0usize..7), 0..20)) {
        let g = HeteroGraph::from_follow_edges(7, &edges).unwrap();
        let homog = g.homogenized();
        let alpha = attention_coefficients(&z, &a, &homog, GAT_SLOPE);
        for i in 0..7 {
            let (lo, hi) = (homog.offsets()[i], homog.offsets()[i + 1]);
            let s: f64 = alpha[lo..hi].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mlp_ignores_edges(edges in prop::collection::vec((0usize..6, 0usize..6), 0..15), seed in 0u64..100) {
        let data = separable_fixture();
        let model = Model::new(cfg(GnnVariant::Mlp, FeatureSet::ALL), seed).unwrap();
        let g = HeteroGraph::from_follow_edges(6, &edges).unwrap();
        let a = model.predict(&data.features, &GraphOperators::for_variant(&data.graph, GnnVariant::Mlp)).unwrap();
        let b = model.predict(&data.features, &GraphOperators::for_variant(&g, GnnVariant::Mlp)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn disabling_tweets_zeroes_their_block() {
    let data = separable_fixture();
    let all = cfg(GnnVariant::Rgcn, FeatureSet::ALL);
    let params = ModelParams::init(&all, 4);
    let encode = |c: &ModelConfig| {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let r = encode_features(&mut tape, &data.features, &bound, c).unwrap();
        tape.value(r).clone()
    };
    let full = encode(&all);
    let partial = encode(&cfg(GnnVariant::Rgcn, FeatureSet::ALL.without(Modality::Tweets)));
    let q = all.dim / 4;
    for i in 0..data.n_nodes() {
        for c in 0..all.dim {
            if (q..2 * q).contains(&c) {
                assert_eq!(partial.get(i, c), 0.0);
            } else {
                assert_eq!(partial.get(i, c), full.get(i, c));
            }
        }
    }
}

#[test]
fn untrained_mlp_and_rgcn_agree_on_edgeless_graph() {
    let data = separable_fixture().without_edges();
    let base = TrainConfig {
        lr: 0.0,
        epochs: 2,
        model: cfg(GnnVariant::Rgcn, FeatureSet::ALL),
        ..TrainConfig::default()
    };
    let rows = ablate(&data, &base, &AblationAxis::Gnn(vec![GnnVariant::Mlp, GnnVariant::Rgcn])).unwrap();
    assert_eq!(rows[0].metrics, rows[1].metrics);
}

#[test]
fn feature_ablation_on_structural_data_matches_all() {
    use botrgcn::synthetic::{community_benchmark, CommunitySpec};
    let spec = CommunitySpec::default();
    let data = community_benchmark(&spec);
    let base = TrainConfig {
        epochs: 150,
        lr: 1e-2,
        seed: 1,
        model: ModelConfig {
            dim: 16,
            text_dim: spec.text_dim,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let sets = ["all", "num,cat", "desc,tweets", "num"].map(|s| s.parse::<FeatureSet>().unwrap());
    let rows = ablate(&data, &base, &AblationAxis::Features(sets.to_vec())).unwrap();
    for r in &rows {
        assert!((r.metrics.accuracy - rows[0].metrics.accuracy).abs() <= 0.05, "{r:?} vs {:?}", rows[0]);
    }
}
