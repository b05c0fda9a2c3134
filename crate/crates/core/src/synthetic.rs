//! Seeded datasets for tests, benchmarks and the acceptance run.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::HeteroGraph;
use crate::ingest::{Dataset, FeatureBundle, Label, Split, SplitMasks};
use crate::tensor::Matrix;

/// Text width of the generated description/tweet blocks.
pub const FIXTURE_TEXT_DIM: usize = 4;

/// Six users, humans 0–2 and bots 3–5, whose features are linearly separable.
///
/// Splits: train {0, 3}, val {1, 4}, test {2, 5}. Follow edges stay inside
/// each class.
pub fn separable_fixture() -> Dataset {
    let n = 6;
    let labels: Vec<Label> = (0..n).map(|i| if i < 3 { Label::Human } else { Label::Bot }).collect();
    let sign = |i: usize| if labels[i] == Label::Bot { 1.0 } else { -1.0 };
    let t = |i: usize| 0.1 * i as f64;

    let desc = (0..n).map(|i| vec![sign(i), 0.5 * sign(i), t(i), -t(i)]).collect::<Vec<_>>();
    let tweets = (0..n).map(|i| vec![-sign(i), 0.3, 0.5 * t(i), 0.5 * sign(i)]).collect::<Vec<_>>();
    let num = (0..n)
        .map(|i| vec![1.2 * sign(i), -0.8 * sign(i), t(i), sign(i), 0.0, -2.0 * t(i)])
        .collect::<Vec<_>>();
    let cat = (0..n)
        .map(|i| {
            (0..11)
                .flat_map(|k| {
                    let on = (labels[i] == Label::Bot) ^ (k % 2 == 1);
                    if on {
                        [1.0, 0.0]
                    } else {
                        [0.0, 1.0]
                    }
                })
                .collect()
        })
        .collect::<Vec<Vec<f64>>>();

    let features = FeatureBundle {
        description: Matrix::from_rows(&desc),
        tweets: Matrix::from_rows(&tweets),
        numerical: Matrix::from_rows(&num),
        categorical: Matrix::from_rows(&cat),
    };
    let edges = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 2)];
    let graph = HeteroGraph::from_follow_edges(n, &edges).unwrap();
    let splits = [Split::Train, Split::Val, Split::Test, Split::Train, Split::Val, Split::Test];
    Dataset::new(
        (0..n).map(|i| format!("u{i}")).collect(),
        labels.into_iter().map(Some).collect(),
        SplitMasks::from_splits(splits).unwrap(),
        features,
        graph,
    )
    .unwrap()
}

/// Parameters of [`community_benchmark`].
#[derive(Clone, Debug, PartialEq)]
pub struct CommunitySpec {
    pub humans: usize,
    pub bots: usize,
    /// Accounts each bot follows.
    pub follows_per_bot: usize,
    /// Chance that a bot's follow lands on another bot.
    pub bot_affinity: f64,
    pub text_dim: usize,
    /// Fractions of users in train and val; the rest is test.
    pub train_frac: f64,
    pub val_frac: f64,
    pub seed: u64,
}

impl Default for CommunitySpec {
    fn default() -> Self {
        Self {
            humans: 100,
            bots: 100,
            follows_per_bot: 5,
            bot_affinity: 0.9,
            text_dim: 8,
            train_frac: 0.4,
            val_frac: 0.2,
            seed: 7,
        }
    }
}

/// Two planted communities where only structure carries the label.
///
/// Bots follow `follows_per_bot` distinct accounts, each a bot with
/// probability `bot_affinity`; humans follow nobody. A user is therefore a
/// bot exactly when its following set is nonempty, while every feature is
/// uniform noise drawn independently of the label.
pub fn community_benchmark(spec: &CommunitySpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.humans + spec.bots;

    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Human, spec.humans)
        .chain(std::iter::repeat_n(Label::Bot, spec.bots))
        .collect();
    labels.shuffle(&mut rng);
    let humans: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Human).collect();
    let bots: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Bot).collect();

    let mut edges = Vec::new();
    for &b in &bots {
        let mut chosen: Vec<usize> = Vec::with_capacity(spec.follows_per_bot);
        let mut guard = 0;
        while chosen.len() < spec.follows_per_bot && guard < 100 * spec.follows_per_bot {
            guard += 1;
            let pool = if rng.gen_bool(spec.bot_affinity) || humans.is_empty() {
                &bots
            } else {
                &humans
            };
            let t = pool[rng.gen_range(0..pool.len())];
            if t != b && !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        edges.extend(chosen.into_iter().map(|t| (b, t)));
    }

    let mut noise = |cols: usize| {
        let data = (0..n * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_vec(n, cols, data).unwrap()
    };
    let description = noise(spec.text_dim);
    let tweets = noise(spec.text_dim);
    let numerical = noise(6);
    let mut categorical = Matrix::zeros(n, 22);
    for i in 0..n {
        for k in 0..11 {
            let bit = rng.gen_bool(0.5);
            categorical.set(i, 2 * k + usize::from(!bit), 1.0);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = (spec.train_frac * n as f64).round() as usize;
    let n_val = (spec.val_frac * n as f64).round() as usize;
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            splits[i] = Split::Train;
        } else if rank < n_train + n_val {
            splits[i] = Split::Val;
        }
    }

    Dataset::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        labels.into_iter().map(Some).collect(),
        SplitMasks::from_splits(splits).unwrap(),
        FeatureBundle {
            description,
            tweets,
            numerical,
            categorical,
        },
        HeteroGraph::from_follow_edges(n, &edges).unwrap(),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Relation;

    #[test]
    fn community_label_is_following_nonempty() {
        let spec = CommunitySpec::default();
        let data = community_benchmark(&spec);
        assert_eq!(data.n_nodes(), 200);
        for i in 0..data.n_nodes() {
            let follows = data.graph.neighbors(Relation::Following, i).len();
            let bot = data.labels[i] == Some(Label::Bot);
            assert_eq!(follows > 0, bot, "node {i}");
            if bot {
                assert_eq!(follows, spec.follows_per_bot);
            }
        }
        assert_eq!(data, community_benchmark(&spec));
        assert_eq!(data.masks.train_count(), 80);
    }

    #[test]
    fn bot_affinity_is_respected() {
        let data = community_benchmark(&CommunitySpec::default());
        let (mut to_bot, mut total) = (0, 0);
        for i in 0..data.n_nodes() {
            for &j in data.graph.neighbors(Relation::Following, i) {
                total += 1;
                to_bot += usize::from(data.labels[j] == Some(Label::Bot));
            }
        }
        let frac = to_bot as f64 / total as f64;
        assert!((frac - 0.9).abs() < 0.05, "{frac}");
    }

    #[test]
    fn fixture_shapes() {
        let d = separable_fixture();
        assert_eq!(d.features.text_dim(), FIXTURE_TEXT_DIM);
        assert_eq!(d.masks.train_count(), 2);
    }
}
