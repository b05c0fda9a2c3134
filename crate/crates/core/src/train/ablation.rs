use std::fmt::Write as _;

use super::{evaluate_split, train, Metrics, TrainConfig, TrainError};
use crate::graph::{GnnVariant, GraphOperators};
use crate::ingest::{Dataset, Split};
use crate::kernels::map_ordered;
use crate::model::FeatureSet;

/// The three sweeps: feature subsets, GNN variants, layer counts.
#[derive(Clone, Debug, PartialEq)]
pub enum AblationAxis {
    Features(Vec<FeatureSet>),
    Gnn(Vec<GnnVariant>),
    Layers(Vec<usize>),
}

impl AblationAxis {
    pub fn name(&self) -> &'static str {
        match self {
            AblationAxis::Features(_) => "features",
            AblationAxis::Gnn(_) => "gnn",
            AblationAxis::Layers(_) => "layers",
        }
    }

    /// Parses `values` (comma separated; feature subsets separated by `;`
    /// or `|` since each subset may itself contain commas).
    pub fn parse(axis: &str, values: &str) -> Result<Self, String> {
        match axis {
            "features" => values
                .split([';', '|'])
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map(AblationAxis::Features),
            "gnn" => values
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map(AblationAxis::Gnn),
            "layers" => values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("layer count `{v}` is not a positive integer"))
                })
                .collect::<Result<_, _>>()
                .map(AblationAxis::Layers),
            other => Err(format!("unknown axis `{other}` (expected features, gnn or layers)")),
        }
    }

    fn configs(&self, base: &TrainConfig) -> Vec<(String, TrainConfig)> {
        let with = |f: &dyn Fn(&mut TrainConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        match self {
            AblationAxis::Features(sets) => sets
                .iter()
                .map(|&s| (s.to_string(), with(&|c| c.model.features = s)))
                .collect(),
            AblationAxis::Gnn(vs) => vs
                .iter()
                .map(|&v| (v.to_string(), with(&|c| c.model.variant = v)))
                .collect(),
            AblationAxis::Layers(ls) => ls
                .iter()
                .map(|&l| (l.to_string(), with(&|c| c.model.layers = l)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub config: String,
    pub metrics: Metrics,
}

/// Retrains from `base.seed` once per value on the axis and scores each best
/// model on the test split. Runs are independent and may execute concurrently.
pub fn ablate(dataset: &Dataset, base: &TrainConfig, axis: &AblationAxis) -> Result<Vec<AblationRow>, TrainError> {
    let configs = axis.configs(base);
    if configs.is_empty() {
        return Err(TrainError::Config(format!("no values given for the {} axis", axis.name())));
    }
    for (_, cfg) in &configs {
        cfg.validate()?;
    }
    if !dataset.masks.test().contains(&true) {
        return Err(TrainError::EmptyMask("test"));
    }
    map_ordered(&configs, |(label, cfg)| {
        let outcome = train(dataset, cfg)?;
        let ops = GraphOperators::for_variant(&dataset.graph, cfg.model.variant);
        let metrics = evaluate_split(&outcome.model, dataset, &ops, Split::Test)?;
        Ok(AblationRow {
            config: label.clone(),
            metrics,
        })
    })
    .into_iter()
    .collect()
}

/// `config,acc,f1,mcc`.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("config,acc,f1,mcc\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.config, r.metrics.accuracy, r.metrics.f1, r.metrics.mcc
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::synthetic::separable_fixture;

    fn base() -> TrainConfig {
        TrainConfig {
            epochs: 10,
            lr: 1e-2,
            model: ModelConfig {
                dim: 8,
                text_dim: 4,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn parse_axes() {
        assert_eq!(
            AblationAxis::parse("layers", "1,2,3,4").unwrap(),
            AblationAxis::Layers(vec![1, 2, 3, 4])
        );
        let AblationAxis::Features(f) = AblationAxis::parse("features", "all;num,cat").unwrap() else {
            panic!()
        };
        assert_eq!(f.len(), 2);
        assert!(AblationAxis::parse("gnn", "rgcn,transformer").is_err());
        assert!(AblationAxis::parse("depth", "1").is_err());
    }

    #[test]
    fn one_row_per_value_and_duplicates_agree() {
        let data = separable_fixture();
        let rows = ablate(&data, &base(), &AblationAxis::Layers(vec![1, 2, 1])).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].metrics, rows[2].metrics);
        let csv = ablation_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("config,acc,f1,mcc\n1,"));
    }

    #[test]
    fn single_all_row_matches_plain_training() {
        let data = separable_fixture();
        let rows = ablate(&data, &base(), &AblationAxis::Features(vec![FeatureSet::ALL])).unwrap();
        let out = train(&data, &base()).unwrap();
        let ops = GraphOperators::for_variant(&data.graph, GnnVariant::Rgcn);
        let m = evaluate_split(&out.model, &data, &ops, Split::Test).unwrap();
        assert_eq!(rows, vec![AblationRow { config: "all".into(), metrics: m }]);
    }
}
