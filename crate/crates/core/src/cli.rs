//! Command-line entry points.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use crate::checkpoint::{self, Checkpoint};
use crate::config::{
    RunConfig, GRID_FILE, HISTORY_FILE, METRICS_FILE, PER_USER_FILE,
};
use crate::coview::{build_graph_dir, BuiltLayers};
use crate::error::Error;
use crate::eval::{evaluate, explain, leave_one_out_split, EvalReport, Explanation, Partition};
use crate::graph::{validate, Dataset, ValidationReport};
use crate::model::SceneRec;
use crate::synth::{describe, generate, Manifest, Summary};
use crate::train::{grid_search, train, training_graphs, write_history, LAMBDA_GRID, LR_GRID};
use crate::tsv::write_lines;

#[derive(Debug, Parser)]
#[command(name = "scenerec", version, about = "Scene-based graph recommender")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into --out.
    Gen(Flags),
    /// Rebuild item-item and category-category layers from sessions.tsv.
    BuildGraph(Flags),
    /// Print entity and relation counts of --data.
    Describe(Flags),
    /// Check the structural invariants of --data.
    Validate(Flags),
    /// Train a model on --data and write a checkpoint and history to --out.
    Train {
        #[command(flatten)]
        flags: Flags,
        /// Search the learning-rate and lambda grids, keeping the best by
        /// validation NDCG@10.
        #[arg(long)]
        grid: bool,
    },
    /// Evaluate a checkpoint on the held-out test items.
    Eval(Flags),
    /// Scene-based attention between a candidate item and a user's history.
    Explain {
        #[command(flatten)]
        flags: Flags,
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
    },
}

/// Options shared by every command. Any of them may also come from --config.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key=value configuration file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Checkpoint path (default: OUT/checkpoint.bin).
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// full, noitem, nosce or noatt.
    #[arg(long)]
    pub variant: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_neg: Option<usize>,
    #[arg(long)]
    pub item_topk: Option<usize>,
    #[arg(long)]
    pub cat_topk: Option<usize>,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub n_items: Option<usize>,
    #[arg(long)]
    pub n_categories: Option<usize>,
    #[arg(long)]
    pub n_scenes: Option<usize>,
    #[arg(long)]
    pub cats_per_scene: Option<usize>,
    #[arg(long)]
    pub interactions_per_user: Option<usize>,
    #[arg(long)]
    pub noise_rate: Option<f64>,
}

impl Flags {
    /// Flags that were given, as `(key, value)` pairs.
    pub fn pairs(&self) -> Vec<(String, String)> {
        fn push<T: ToString>(out: &mut Vec<(String, String)>, key: &str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key.to_string(), v.to_string()));
            }
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = Vec::new();
        push(&mut out, "data", &path(&self.data));
        push(&mut out, "out", &path(&self.out));
        push(&mut out, "checkpoint", &path(&self.checkpoint));
        push(&mut out, "seed", &self.seed);
        push(&mut out, "variant", &self.variant);
        push(&mut out, "d", &self.d);
        push(&mut out, "lr", &self.lr);
        push(&mut out, "lambda", &self.lambda);
        push(&mut out, "epochs", &self.epochs);
        push(&mut out, "patience", &self.patience);
        push(&mut out, "batch_size", &self.batch_size);
        push(&mut out, "k", &self.k);
        push(&mut out, "n_neg", &self.n_neg);
        push(&mut out, "item_topk", &self.item_topk);
        push(&mut out, "cat_topk", &self.cat_topk);
        push(&mut out, "n_users", &self.n_users);
        push(&mut out, "n_items", &self.n_items);
        push(&mut out, "n_categories", &self.n_categories);
        push(&mut out, "n_scenes", &self.n_scenes);
        push(&mut out, "cats_per_scene", &self.cats_per_scene);
        push(&mut out, "interactions_per_user", &self.interactions_per_user);
        push(&mut out, "noise_rate", &self.noise_rate);
        out
    }

    pub fn resolve(&self) -> crate::Result<RunConfig> {
        RunConfig::resolve(self.config.as_deref(), &self.pairs())
    }
}

pub fn cmd_gen(cfg: &RunConfig) -> crate::Result<Manifest> {
    generate(&cfg.synth, cfg.out_dir()?)
}

/// Writes the layer files into `out`, or back into `data` when no `out` is set.
pub fn cmd_build_graph(cfg: &RunConfig) -> crate::Result<BuiltLayers> {
    let data = cfg.data_dir()?;
    let out = cfg.out.as_deref().unwrap_or(data);
    build_graph_dir(data, out, cfg.synth.item_topk, cfg.synth.cat_topk)
}

pub fn cmd_describe(cfg: &RunConfig) -> crate::Result<Summary> {
    describe(cfg.data_dir()?)
}

pub fn cmd_validate(cfg: &RunConfig) -> crate::Result<ValidationReport> {
    let ds = Dataset::load(cfg.data_dir()?)?;
    Ok(validate(&ds.bipartite, &ds.scene))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub best_val_ndcg: f64,
    pub lr: f64,
    pub lambda: f64,
}

pub fn cmd_train(cfg: &RunConfig, grid: bool) -> crate::Result<TrainSummary> {
    let ds = Dataset::load(cfg.data_dir()?)?;
    let out = cfg.out_dir()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let split = leave_one_out_split(&ds.bipartite, cfg.n_neg, cfg.seed)?;
    let graphs = training_graphs(&ds, &split)?;
    let (outcome, lr, lambda) = if grid {
        let result = grid_search(&graphs, &ds.bipartite, &split, &cfg.train, &LR_GRID, &LAMBDA_GRID)?;
        write_lines(
            &out.join(GRID_FILE),
            result
                .points
                .iter()
                .map(|p| format!("{}\t{}\t{}", p.lr, p.lambda, p.best_val_ndcg)),
        )?;
        let best = result.points[result.best];
        (result.outcome, best.lr, best.lambda)
    } else {
        (train(&graphs, &ds.bipartite, &split, &cfg.train)?, cfg.train.lr, cfg.train.lambda)
    };
    write_history(&out.join(HISTORY_FILE), &outcome.history)?;
    checkpoint::save(
        &cfg.checkpoint_path()?,
        &Checkpoint {
            variant: cfg.train.variant,
            params: outcome.params,
        },
    )?;
    Ok(TrainSummary {
        best_epoch: outcome.best_epoch,
        best_val_ndcg: outcome.best_val_ndcg,
        lr,
        lambda,
    })
}

fn load_model_inputs(cfg: &RunConfig) -> crate::Result<(Dataset, Checkpoint, crate::Graphs)> {
    let ds = Dataset::load(cfg.data_dir()?)?;
    let ckpt = checkpoint::load(&cfg.checkpoint_path()?)?;
    ckpt.check_counts(ds.maps.counts())?;
    if ckpt.params.dim != cfg.train.dim {
        info!("using checkpoint dimension {}", ckpt.params.dim);
    }
    let split = leave_one_out_split(&ds.bipartite, cfg.n_neg, cfg.seed)?;
    let graphs = training_graphs(&ds, &split)?;
    Ok((ds, ckpt, graphs))
}

/// Evaluates on the test partition and writes the metric files to `out`.
pub fn cmd_eval(cfg: &RunConfig) -> crate::Result<EvalReport> {
    let (ds, ckpt, graphs) = load_model_inputs(cfg)?;
    if ckpt.variant != cfg.train.variant {
        info!("checkpoint was trained as {}; evaluating it as such", ckpt.variant);
    }
    let split = leave_one_out_split(&ds.bipartite, cfg.n_neg, cfg.seed)?;
    let model = SceneRec::new(&ckpt.params, &graphs, ckpt.variant);
    let report = evaluate(&model, &split, cfg.k, Partition::Test)?;
    let out = cfg.out_dir()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    report.write_summary(&out.join(METRICS_FILE))?;
    report.write_per_user(&out.join(PER_USER_FILE), &ds.maps)?;
    Ok(report)
}

pub fn cmd_explain(cfg: &RunConfig, user: &str, item: &str) -> crate::Result<(Explanation, Vec<String>)> {
    let (ds, ckpt, graphs) = load_model_inputs(cfg)?;
    let u = ds
        .maps
        .users
        .get(user)
        .ok_or_else(|| Error::Config(format!("unknown user id {:?}", user)))?;
    let i = ds
        .maps
        .items
        .get(item)
        .ok_or_else(|| Error::Config(format!("unknown item id {:?}", item)))?;
    let model = SceneRec::new(&ckpt.params, &graphs, ckpt.variant);
    let e = explain(&model, u, i)?;
    let lines = e.lines(&ds.maps);
    Ok((e, lines))
}

/// Runs a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(flags) => {
            let cfg = flags.resolve()?;
            let m = cmd_gen(&cfg).context("gen failed")?;
            println!("seed\t{}", m.seed);
            for (file, n) in &m.rows {
                println!("{}\t{}", file, n);
            }
        }
        Command::BuildGraph(flags) => {
            let cfg = flags.resolve()?;
            let layers = cmd_build_graph(&cfg).context("build-graph failed")?;
            println!("item-item\t{}", layers.item_edges.len());
            println!("category-category\t{}", layers.category_edges.len());
        }
        Command::Describe(flags) => {
            let s = cmd_describe(&flags.resolve()?).context("describe failed")?;
            for line in s.lines() {
                println!("{}", line);
            }
        }
        Command::Validate(flags) => {
            let report = cmd_validate(&flags.resolve()?).context("validate failed")?;
            if !report.is_empty() {
                for v in &report.violations {
                    eprintln!("{}", v);
                }
                bail!("{} invariant violations", report.violations.len());
            }
            println!("ok");
        }
        Command::Train { flags, grid } => {
            let cfg = flags.resolve()?;
            let s = cmd_train(&cfg, grid).context("train failed")?;
            println!("best_epoch\t{}", s.best_epoch);
            println!("best_val_ndcg@10\t{:.6}", s.best_val_ndcg);
            println!("lr\t{}", s.lr);
            println!("lambda\t{}", s.lambda);
        }
        Command::Eval(flags) => {
            let report = cmd_eval(&flags.resolve()?).context("eval failed")?;
            for line in report.summary_lines() {
                println!("{}", line);
            }
        }
        Command::Explain { flags, user, item } => {
            let (_, lines) = cmd_explain(&flags.resolve()?, &user, &item).context("explain failed")?;
            for line in lines {
                println!("{}", line);
            }
        }
    }
    Ok(())
}
