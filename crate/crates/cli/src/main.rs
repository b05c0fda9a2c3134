//! `botrgcn`: prepare datasets, train, evaluate, run ablations and check gradients.

mod error;
mod manifest;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use botrgcn::diagnostics::{gradient_suite, GRAD_TOLERANCE};
use botrgcn::graph::{GnnVariant, GraphOperators};
use botrgcn::ingest::{prepare_dataset, Dataset, Split, TextSource};
use botrgcn::model::{infer_config, FeatureSet, LossReduction, Model, ModelConfig, ModelParams};
use botrgcn::tensor::checkpoint::{read_checkpoint, write_checkpoint};
use botrgcn::train::{
    ablate, ablation_csv, evaluate_split, history_csv, train, AblationAxis, Metrics, OptimizerKind,
    TrainConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{io_error, CliError};
use manifest::{sibling, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "botrgcn", version, about = "Twitter bot detection with relational graph convolutions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse users, edges and text embeddings into a dataset bundle.
    Prepare(PrepareArgs),
    /// Train a model and write checkpoint, history CSV and manifest.
    Train(TrainCmd),
    /// Print accuracy,f1,mcc of a checkpoint on one split.
    Eval(EvalArgs),
    /// Retrain across feature sets, GNN variants or layer counts.
    Ablate(AblateArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck,
}

#[derive(Args, Debug)]
struct PrepareArgs {
    /// users.jsonl: one user object per line.
    #[arg(long)]
    users: PathBuf,
    /// edges.csv with header `source,target[,relation]`.
    #[arg(long)]
    edges: PathBuf,
    /// Description embeddings (.bre), rows in users.jsonl order.
    #[arg(long, requires = "emb_tweets", conflicts_with = "hash_embed_dim")]
    emb_desc: Option<PathBuf>,
    /// Tweet embeddings (.bre), rows in users.jsonl order.
    #[arg(long, requires = "emb_desc", conflicts_with = "hash_embed_dim")]
    emb_tweets: Option<PathBuf>,
    /// Width of offline hash embeddings used instead of .bre files.
    #[arg(long, requires = "tweets_jsonl", required_unless_present = "emb_desc")]
    hash_embed_dim: Option<usize>,
    /// texts.jsonl with `id`, `description` and `tweets` per user (for --hash-embed-dim).
    #[arg(long, requires = "hash_embed_dim")]
    tweets_jsonl: Option<PathBuf>,
    /// Seed of the hash embedding.
    #[arg(long, default_value_t = 0)]
    hash_seed: u64,
    /// Output bundle path; the manifest goes beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReductionArg {
    Sum,
    Mean,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    /// User embedding width D (divisible by 4).
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Message-passing layers.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// rgcn, gcn, gat or mlp.
    #[arg(long, default_value = "rgcn")]
    gnn: GnnVariant,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// L2 coefficient over all parameters.
    #[arg(long, default_value_t = 5e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `all` or a subset of desc,tweets,num,cat.
    #[arg(long, default_value = "all")]
    features: FeatureSet,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    /// Epochs without a better val F1 before stopping; 0 disables early stopping.
    #[arg(long, default_value_t = 0)]
    patience: usize,
    /// Data-loss reduction over labeled train users.
    #[arg(long, value_enum, default_value = "mean")]
    reduction: ReductionArg,
    /// Leaky-relu negative slope.
    #[arg(long, default_value_t = 0.01)]
    slope: f64,
    /// Apply leaky-relu between message-passing layers.
    #[arg(long)]
    inter_layer_activation: bool,
}

impl TrainArgs {
    fn config(&self, text_dim: usize) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            optimizer: match self.optimizer {
                OptimizerArg::Sgd => OptimizerKind::Sgd,
                OptimizerArg::Adam => OptimizerKind::ADAM,
            },
            seed: self.seed,
            patience: self.patience,
            model: ModelConfig {
                dim: self.dim,
                text_dim,
                layers: self.layers,
                variant: self.gnn,
                slope: self.slope,
                inter_layer_activation: self.inter_layer_activation,
                lambda: self.lambda,
                reduction: match self.reduction {
                    ReductionArg::Sum => LossReduction::Sum,
                    ReductionArg::Mean => LossReduction::Mean,
                },
                features: self.features,
            },
        }
    }
}

#[derive(Args, Debug)]
struct TrainCmd {
    /// Dataset bundle from `prepare`.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path; history CSV and manifest are written beside it.
    #[arg(long)]
    out_ckpt: PathBuf,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Enabled features, when the checkpoint has no manifest beside it.
    #[arg(long)]
    features: Option<FeatureSet>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Features,
    Gnn,
    Layers,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated values; feature subsets are separated by `;`.
    #[arg(long)]
    values: String,
    /// CSV output path; the manifest goes beside it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    train: TrainArgs,
}

fn load_bundle(path: &Path) -> Result<Dataset, CliError> {
    Ok(Dataset::load(path)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn cmd_prepare(a: PrepareArgs) -> Result<(), CliError> {
    let text = match (&a.emb_desc, &a.emb_tweets, a.hash_embed_dim, &a.tweets_jsonl) {
        (Some(d), Some(t), None, None) => TextSource::Files {
            description: d.clone(),
            tweets: t.clone(),
        },
        (None, None, Some(dim), Some(texts)) => TextSource::Hashed {
            texts: texts.clone(),
            dim,
            seed: a.hash_seed,
        },
        _ => {
            return Err(CliError::Usage(
                "give either --emb-desc and --emb-tweets, or --hash-embed-dim with --tweets-jsonl".into(),
            ))
        }
    };
    if a.hash_embed_dim == Some(0) {
        return Err(CliError::Usage("--hash-embed-dim must be positive".into()));
    }
    let config = serde_json::json!({
        "users": a.users,
        "edges": a.edges,
        "emb_desc": a.emb_desc,
        "emb_tweets": a.emb_tweets,
        "hash_embed_dim": a.hash_embed_dim,
        "tweets_jsonl": a.tweets_jsonl,
        "hash_seed": a.hash_seed,
    });
    let mut m = RunManifest::new("prepare", config, a.hash_embed_dim.map(|_| a.hash_seed));
    m.input("users", &a.users)?;
    m.input("edges", &a.edges)?;
    match &text {
        TextSource::Files { description, tweets } => {
            m.input("emb_desc", description)?;
            m.input("emb_tweets", tweets)?;
        }
        TextSource::Hashed { texts, .. } => m.input("texts", texts)?,
    }
    let ds = m.time("prepare", || prepare_dataset(&a.users, &a.edges, &text))?;
    m.time("write", || ds.save(&a.out))?;
    m.output("bundle", &a.out)?;
    m.write(&sibling(&a.out, "manifest.json"))?;
    println!(
        "prepared {} users ({} train, {} edges, text width {}) -> {}",
        ds.n_nodes(),
        ds.masks.train_count(),
        ds.graph.edge_count(),
        ds.features.text_dim(),
        a.out.display()
    );
    Ok(())
}

fn metrics_json(m: &Metrics) -> serde_json::Value {
    serde_json::to_value(m).expect("metrics serialize")
}

fn cmd_train(a: TrainCmd) -> Result<(), CliError> {
    let ds = load_bundle(&a.data)?;
    let cfg = a.train.config(ds.features.text_dim());
    cfg.validate()?;
    let mut m = RunManifest::new("train", serde_json::to_value(&cfg).expect("config serializes"), Some(cfg.seed));
    m.input("data", &a.data)?;

    let outcome = m.time("train", || train(&ds, &cfg))?;

    let history = sibling(&a.out_ckpt, "history.csv");
    let file = File::create(&a.out_ckpt).map_err(|e| io_error(&a.out_ckpt, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, &outcome.model.params.to_named())?;
    w.flush().map_err(|e| io_error(&a.out_ckpt, e))?;
    write_text(&history, &history_csv(&outcome.history))?;
    m.output("checkpoint", &a.out_ckpt)?;
    m.output("history", &history)?;

    let best = outcome.best_val();
    m.metrics = Some(serde_json::json!({
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.history.len(),
        "stopped_early": outcome.stopped_early,
        "final_train_loss": outcome.history.last().map(|r| r.loss),
        "val": best.as_ref().map(metrics_json),
    }));
    m.write(&sibling(&a.out_ckpt, "manifest.json"))?;

    match best {
        Some(v) => println!(
            "best epoch {} of {}: val accuracy {:.4}, f1 {:.4}, mcc {:.4}",
            outcome.best_epoch,
            outcome.history.len(),
            v.accuracy,
            v.f1,
            v.mcc
        ),
        None => println!("trained {} epochs (no validation split)", outcome.history.len()),
    }
    Ok(())
}

/// The model config a checkpoint was trained with: from its manifest when
/// present, otherwise inferred from tensor names and shapes.
fn checkpoint_config(
    ckpt: &Path,
    named: &[(String, botrgcn::tensor::Matrix)],
    features: Option<FeatureSet>,
) -> Result<ModelConfig, CliError> {
    let manifest = sibling(ckpt, "manifest.json");
    let mut cfg = if manifest.is_file() {
        let m = RunManifest::read(&manifest)?;
        let tc: TrainConfig = serde_json::from_value(m.config)
            .map_err(|e| CliError::Data(format!("{}: config: {e}", manifest.display())))?;
        tc.model
    } else {
        infer_config(named, &ModelConfig::default())?
    };
    if let Some(f) = features {
        cfg.features = f;
    }
    Ok(cfg)
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let ds = load_bundle(&a.data)?;
    let file = File::open(&a.ckpt).map_err(|e| io_error(&a.ckpt, e))?;
    let named = read_checkpoint(BufReader::new(file))?;
    let cfg = checkpoint_config(&a.ckpt, &named, a.features)?;
    if cfg.text_dim != ds.features.text_dim() {
        return Err(CliError::Data(format!(
            "checkpoint expects text width {}, bundle has {}",
            cfg.text_dim,
            ds.features.text_dim()
        )));
    }
    let params = ModelParams::from_named(&cfg, named).map_err(|e| CliError::Data(e.to_string()))?;
    let model = Model::from_params(cfg, params)?;
    let ops = GraphOperators::for_variant(&ds.graph, model.config.variant);
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    };
    let metrics = evaluate_split(&model, &ds, &ops, split)?;
    println!("accuracy,f1,mcc");
    println!("{},{},{}", metrics.accuracy, metrics.f1, metrics.mcc);
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> Result<(), CliError> {
    let ds = load_bundle(&a.data)?;
    let base = a.train.config(ds.features.text_dim());
    let axis_name = match a.axis {
        AxisArg::Features => "features",
        AxisArg::Gnn => "gnn",
        AxisArg::Layers => "layers",
    };
    let axis = AblationAxis::parse(axis_name, &a.values).map_err(CliError::Usage)?;
    let config = serde_json::json!({
        "base": base,
        "axis": axis_name,
        "values": a.values,
    });
    let mut m = RunManifest::new("ablate", config, Some(base.seed));
    m.input("data", &a.data)?;
    let rows = m.time("ablate", || ablate(&ds, &base, &axis))?;
    let csv = ablation_csv(&rows);
    write_text(&a.out, &csv)?;
    m.output("table", &a.out)?;
    m.metrics = Some(serde_json::Value::Array(
        rows.iter()
            .map(|r| serde_json::json!({ "config": r.config, "test": metrics_json(&r.metrics) }))
            .collect(),
    ));
    m.write(&sibling(&a.out, "manifest.json"))?;
    print!("{csv}");
    Ok(())
}

fn cmd_gradcheck() -> Result<(), CliError> {
    let cases = gradient_suite();
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for c in &cases {
        match &c.result {
            Ok(r) => {
                worst = worst.max(r.max_rel_error);
                println!("{:<40} {:.3e} ({} coordinates)", c.name, r.max_rel_error, r.coordinates);
            }
            Err(e) => println!("{:<40} error: {e}", c.name),
        }
        if !c.passed() {
            failed.push(c.name.clone());
        }
    }
    println!("max relative error {worst:.3e} (tolerance {GRAD_TOLERANCE:.0e})");
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("gradient check failed: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Gradcheck => cmd_gradcheck(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("botrgcn: {e}");
            e.exit_code()
        }
    }
}
