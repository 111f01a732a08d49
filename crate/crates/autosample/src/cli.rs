//! The `autosample` command line: flat key=value configuration, subcommands
//! for every pipeline stage, and JSON/CSV artifact emission.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::checkpoint;
use crate::data::{
    generate_synthetic, load_interactions, read_split, split_dataset, write_split, DataSplit,
    SplitManifest,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricKind, MetricsReport};
use crate::model::{init_params, ModelKind, ModelParams};
use crate::rng::Seeds;
use crate::samplers::SamplerSpec;
use crate::search::{run_search, SearchOutcome};
use crate::trainer::{grid_search, retrain, train_fixed, TrainingConfig};

/// Fully resolved run configuration: defaults, then config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Interaction TSV, or a directory produced by `split`.
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub model: ModelKind,
    pub samplers: Vec<SamplerSpec>,
    pub min_count: usize,
    pub train: TrainingConfig,
    // Synthetic-generation shape.
    pub users: usize,
    pub items: usize,
    pub blocks: usize,
    pub density: f64,
    pub noise: f64,
    // Consumed artifacts.
    pub checkpoint: Option<PathBuf>,
    pub search_dir: Option<PathBuf>,
    /// Which split `eval` scores.
    pub eval_split: EvalSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSplit {
    Valid,
    Test,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            out: PathBuf::from("out"),
            seed: 42,
            jobs: 1,
            model: ModelKind::Mf,
            samplers: vec![
                SamplerSpec::Rns,
                SamplerSpec::Pns { beta: 0.75 },
                SamplerSpec::Dns {
                    candidates: 10,
                    lambda: None,
                },
            ],
            min_count: 1,
            train: TrainingConfig::default(),
            users: 60,
            items: 120,
            blocks: 3,
            density: 0.3,
            noise: 0.05,
            checkpoint: None,
            search_dir: None,
            eval_split: EvalSplit::Test,
        }
    }
}

/// Every recognized configuration key, in the order `run.json` reports them.
pub const KEYS: &[&str] = &[
    "data",
    "out",
    "seed",
    "jobs",
    "model",
    "samplers",
    "min_count",
    "epochs",
    "batch_size",
    "lr_w",
    "lr_theta",
    "l2",
    "k",
    "dim",
    "eval_every",
    "metric",
    "patience",
    "dense_adam",
    "stale_propagation",
    "tau0",
    "tau_min",
    "tau_decay",
    "gumbel_per_epoch",
    "hard_selection",
    "users",
    "items",
    "blocks",
    "density",
    "noise",
    "checkpoint",
    "search_dir",
    "eval_split",
];

// Common misspellings mapped to their canonical key.
const ALIASES: &[(&str, &str)] = &[
    ("learningrate", "lr_w"),
    ("learning_rate", "lr_w"),
    ("lr", "lr_w"),
    ("weight_decay", "l2"),
    ("reg", "l2"),
    ("negatives", "k"),
    ("batch", "batch_size"),
    ("embedding_dim", "dim"),
    ("temperature", "tau0"),
];

impl RunConfig {
    /// Apply one `key = value` assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |what: &str, v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::config(format!("{what} expects a non-negative integer, got {v:?}")))
        };
        let parse_f64 = |what: &str, v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::config(format!("{what} expects a number, got {v:?}")))
        };
        let parse_bool = |what: &str, v: &str| -> Result<bool> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::config(format!(
                    "{what} expects true or false, got {v:?}"
                ))),
            }
        };
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse_usize("seed", value)? as u64,
            "jobs" => {
                self.jobs = parse_usize("jobs", value)?;
                if self.jobs == 0 {
                    return Err(Error::config("jobs must be >= 1"));
                }
            }
            "model" => self.model = value.parse()?,
            "samplers" => self.samplers = SamplerSpec::parse_list(value)?,
            "min_count" => self.min_count = parse_usize("min_count", value)?,
            "epochs" => self.train.epochs = parse_usize("epochs", value)?,
            "batch_size" => self.train.batch_size = parse_usize("batch_size", value)?,
            "lr_w" => self.train.lr_w = parse_f64("lr_w", value)?,
            "lr_theta" => self.train.lr_theta = parse_f64("lr_theta", value)?,
            "l2" => self.train.l2 = parse_f64("l2", value)?,
            "k" => self.train.negatives = parse_usize("k", value)?,
            "dim" => self.train.dim = parse_usize("dim", value)?,
            "eval_every" => self.train.eval_every = parse_usize("eval_every", value)?,
            "metric" => {
                let (kind, k) = MetricKind::parse_with_k(value)?;
                self.train.metric = kind;
                self.train.eval_k = k;
            }
            "patience" => self.train.patience = parse_usize("patience", value)?,
            "dense_adam" => self.train.dense_adam = parse_bool("dense_adam", value)?,
            "stale_propagation" => {
                self.train.stale_propagation = parse_bool("stale_propagation", value)?
            }
            "tau0" => self.train.search.tau0 = parse_f64("tau0", value)?,
            "tau_min" => self.train.search.tau_min = parse_f64("tau_min", value)?,
            "tau_decay" => self.train.search.tau_decay = parse_f64("tau_decay", value)?,
            "gumbel_per_epoch" => {
                self.train.search.gumbel_per_epoch = parse_bool("gumbel_per_epoch", value)?
            }
            "hard_selection" => {
                self.train.search.hard_selection = parse_bool("hard_selection", value)?
            }
            "users" => self.users = parse_usize("users", value)?,
            "items" => self.items = parse_usize("items", value)?,
            "blocks" => self.blocks = parse_usize("blocks", value)?,
            "density" => self.density = parse_f64("density", value)?,
            "noise" => self.noise = parse_f64("noise", value)?,
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "search_dir" => self.search_dir = Some(PathBuf::from(value)),
            "eval_split" => {
                self.eval_split = match value {
                    "valid" => EvalSplit::Valid,
                    "test" => EvalSplit::Test,
                    _ => {
                        return Err(Error::config(format!(
                            "eval_split expects valid or test, got {value:?}"
                        )))
                    }
                }
            }
            unknown => return Err(unknown_key_error(unknown)),
        }
        Ok(())
    }

    /// The resolved configuration as canonical `key = value` pairs.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        if let Some(data) = &self.data {
            put("data", data.display().to_string());
        }
        put("out", self.out.display().to_string());
        put("seed", self.seed.to_string());
        put("jobs", self.jobs.to_string());
        put("model", self.model.to_string());
        put(
            "samplers",
            self.samplers
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("min_count", self.min_count.to_string());
        put("epochs", self.train.epochs.to_string());
        put("batch_size", self.train.batch_size.to_string());
        put("lr_w", self.train.lr_w.to_string());
        put("lr_theta", self.train.lr_theta.to_string());
        put("l2", self.train.l2.to_string());
        put("k", self.train.negatives.to_string());
        put("dim", self.train.dim.to_string());
        put("eval_every", self.train.eval_every.to_string());
        put(
            "metric",
            format!("{}@{}", self.train.metric, self.train.eval_k),
        );
        put("patience", self.train.patience.to_string());
        put("dense_adam", self.train.dense_adam.to_string());
        put("stale_propagation", self.train.stale_propagation.to_string());
        put("tau0", self.train.search.tau0.to_string());
        put("tau_min", self.train.search.tau_min.to_string());
        put("tau_decay", self.train.search.tau_decay.to_string());
        put(
            "gumbel_per_epoch",
            self.train.search.gumbel_per_epoch.to_string(),
        );
        put(
            "hard_selection",
            self.train.search.hard_selection.to_string(),
        );
        put("users", self.users.to_string());
        put("items", self.items.to_string());
        put("blocks", self.blocks.to_string());
        put("density", self.density.to_string());
        put("noise", self.noise.to_string());
        if let Some(p) = &self.checkpoint {
            put("checkpoint", p.display().to_string());
        }
        if let Some(p) = &self.search_dir {
            put("search_dir", p.display().to_string());
        }
        put(
            "eval_split",
            match self.eval_split {
                EvalSplit::Valid => "valid".to_string(),
                EvalSplit::Test => "test".to_string(),
            },
        );
        map
    }
}

fn unknown_key_error(key: &str) -> Error {
    if let Some((_, canonical)) = ALIASES.iter().find(|(a, _)| *a == key) {
        return Error::config(format!("unknown key {key:?}; did you mean {canonical:?}?"));
    }
    let best = KEYS
        .iter()
        .min_by_key(|k| strsim::levenshtein(key, k))
        .filter(|k| strsim::levenshtein(key, k) <= 3);
    match best {
        Some(k) => Error::config(format!("unknown key {key:?}; did you mean {k:?}?")),
        None => Error::config(format!("unknown key {key:?}")),
    }
}

/// Parse a flat `key = value` file and apply command-line overrides on top of
/// the defaults. Later assignments win; unknown keys are rejected.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = fs::read_to_string(path)?;
        for (line_no, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::config(format!(
                    "{}:{}: expected key = value, got {trimmed:?}",
                    path.display(),
                    line_no + 1
                )));
            };
            cfg.apply(key.trim(), value.trim())?;
        }
    }
    for (key, value) in overrides {
        cfg.apply(key, value)?;
    }
    Ok(cfg)
}

/// Key-mirroring command-line flags. Every flag overrides the config-file key
/// of the same name.
#[derive(Debug, Args, Default, Clone)]
pub struct KeyOverrides {
    #[arg(long = "data", help = "Interaction TSV file or split directory")]
    data: Option<String>,
    #[arg(long = "out", help = "Output directory")]
    out: Option<String>,
    #[arg(long = "seed", help = "Master seed; all randomness derives from it")]
    seed: Option<String>,
    #[arg(long = "jobs", help = "Worker threads for grid cells")]
    jobs: Option<String>,
    #[arg(long = "model", help = "mf, lightgcn or lightgcn:<layers>")]
    model: Option<String>,
    #[arg(
        long = "samplers",
        help = "Comma list: rns, pns:beta=0.75, dns:c=10, aobpr:lambda=64"
    )]
    samplers: Option<String>,
    #[arg(long = "min_count", help = "Iteratively drop nodes below this degree")]
    min_count: Option<String>,
    #[arg(long = "epochs")]
    epochs: Option<String>,
    #[arg(long = "batch_size")]
    batch_size: Option<String>,
    #[arg(long = "lr_w", help = "Embedding learning rate")]
    lr_w: Option<String>,
    #[arg(long = "lr_theta", help = "Selection-logit learning rate")]
    lr_theta: Option<String>,
    #[arg(long = "l2")]
    l2: Option<String>,
    #[arg(long = "k", help = "Negatives per positive")]
    k: Option<String>,
    #[arg(long = "dim")]
    dim: Option<String>,
    #[arg(long = "eval_every")]
    eval_every: Option<String>,
    #[arg(long = "metric", help = "Model-selection metric, e.g. recall@20")]
    metric: Option<String>,
    #[arg(long = "patience")]
    patience: Option<String>,
    #[arg(long = "dense_adam")]
    dense_adam: Option<String>,
    #[arg(long = "stale_propagation")]
    stale_propagation: Option<String>,
    #[arg(long = "tau0")]
    tau0: Option<String>,
    #[arg(long = "tau_min")]
    tau_min: Option<String>,
    #[arg(long = "tau_decay")]
    tau_decay: Option<String>,
    #[arg(long = "gumbel_per_epoch")]
    gumbel_per_epoch: Option<String>,
    #[arg(long = "hard_selection")]
    hard_selection: Option<String>,
    #[arg(long = "users")]
    users: Option<String>,
    #[arg(long = "items")]
    items: Option<String>,
    #[arg(long = "blocks")]
    blocks: Option<String>,
    #[arg(long = "density")]
    density: Option<String>,
    #[arg(long = "noise")]
    noise: Option<String>,
    #[arg(long = "checkpoint", help = "Model checkpoint to evaluate")]
    checkpoint: Option<String>,
    #[arg(long = "search_dir", help = "Directory with a search stage's outputs")]
    search_dir: Option<String>,
    #[arg(long = "eval_split", help = "valid or test")]
    eval_split: Option<String>,
}

impl KeyOverrides {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |key: &str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((key.to_string(), v.clone()));
            }
        };
        push("data", &self.data);
        push("out", &self.out);
        push("seed", &self.seed);
        push("jobs", &self.jobs);
        push("model", &self.model);
        push("samplers", &self.samplers);
        push("min_count", &self.min_count);
        push("epochs", &self.epochs);
        push("batch_size", &self.batch_size);
        push("lr_w", &self.lr_w);
        push("lr_theta", &self.lr_theta);
        push("l2", &self.l2);
        push("k", &self.k);
        push("dim", &self.dim);
        push("eval_every", &self.eval_every);
        push("metric", &self.metric);
        push("patience", &self.patience);
        push("dense_adam", &self.dense_adam);
        push("stale_propagation", &self.stale_propagation);
        push("tau0", &self.tau0);
        push("tau_min", &self.tau_min);
        push("tau_decay", &self.tau_decay);
        push("gumbel_per_epoch", &self.gumbel_per_epoch);
        push("hard_selection", &self.hard_selection);
        push("users", &self.users);
        push("items", &self.items);
        push("blocks", &self.blocks);
        push("density", &self.density);
        push("noise", &self.noise);
        push("checkpoint", &self.checkpoint);
        push("search_dir", &self.search_dir);
        push("eval_split", &self.eval_split);
        out
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "autosample",
    version,
    about = "Implicit-feedback training with automated negative-sampler selection"
)]
struct Cli {
    /// Flat key=value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted block structure.
    Gen(KeyOverrides),
    /// Load a TSV, filter it, and write train/valid/test files.
    Split(KeyOverrides),
    /// Train with a fixed sampler (the first entry of `samplers`).
    Train(KeyOverrides),
    /// Learn mixture weights over the candidate samplers.
    Search(KeyOverrides),
    /// Retrain from a search stage's winner and warm-start tables.
    Retrain(KeyOverrides),
    /// Search, then retrain, in one run.
    Auto(KeyOverrides),
    /// Train every candidate sampler separately and tabulate the results.
    Grid(KeyOverrides),
    /// Evaluate a checkpoint on the validation or test split.
    Eval(KeyOverrides),
}

/// Parse `argv` and execute. Returns the process exit code: 0 on success,
/// 2 for usage or configuration errors, 3 for runtime failures.
pub fn run_from<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let (name, overrides) = match &cli.command {
        Command::Gen(o) => ("gen", o),
        Command::Split(o) => ("split", o),
        Command::Train(o) => ("train", o),
        Command::Search(o) => ("search", o),
        Command::Retrain(o) => ("retrain", o),
        Command::Auto(o) => ("auto", o),
        Command::Grid(o) => ("grid", o),
        Command::Eval(o) => ("eval", o),
    };
    let cfg = match load_config(cli.config.as_deref(), &overrides.pairs()) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err}");
            return 2;
        }
    };
    match dispatch(name, &cfg) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_usage() {
                2
            } else {
                3
            }
        }
    }
}

/// Entry point for the binary.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

fn dispatch(command: &str, cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.out)?;
    match command {
        "gen" => cmd_gen(cfg)?,
        "split" => cmd_split(cfg)?,
        "train" => cmd_train(cfg)?,
        "search" => {
            cmd_search(cfg)?;
        }
        "retrain" => cmd_retrain(cfg)?,
        "auto" => cmd_auto(cfg)?,
        "grid" => cmd_grid(cfg)?,
        "eval" => cmd_eval(cfg)?,
        other => return Err(Error::config(format!("unknown command {other:?}"))),
    }
    write_run_record(cfg, command, start.elapsed().as_millis() as u64)?;
    Ok(())
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: String,
    seed: u64,
    config: BTreeMap<String, String>,
    elapsed_ms: u64,
}

fn write_run_record(cfg: &RunConfig, command: &str, elapsed_ms: u64) -> Result<()> {
    let record = RunRecord {
        command,
        version: format!("autosample {}", env!("CARGO_PKG_VERSION")),
        seed: cfg.seed,
        config: cfg.to_map(),
        elapsed_ms,
    };
    write_json(&cfg.out.join("run.json"), &record)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

fn seeds_for(cfg: &RunConfig) -> Seeds {
    Seeds::new(cfg.seed)
}

fn require_data(cfg: &RunConfig) -> Result<&Path> {
    cfg.data
        .as_deref()
        .ok_or_else(|| Error::config("data path is required (key `data` or flag --data)"))
}

/// Load the data path as a split: either a directory written by `split`, or
/// a raw TSV that gets filtered and partitioned 3:1:1 here.
fn load_split(cfg: &RunConfig) -> Result<DataSplit> {
    let path = require_data(cfg)?;
    if path.is_dir() {
        return read_split(path);
    }
    let loaded = load_interactions(path, cfg.min_count)?;
    split_dataset(&loaded.data, (3, 1, 1), seeds_for(cfg).scoped("data").seed("split"))
}

fn init_model(cfg: &RunConfig, split: &DataSplit) -> Result<ModelParams> {
    init_params(
        split.num_users(),
        split.num_items(),
        cfg.train.dim,
        cfg.model,
        seeds_for(cfg).scoped("model").seed("init"),
    )
}

fn cmd_gen(cfg: &RunConfig) -> Result<()> {
    let ds = generate_synthetic(
        cfg.users,
        cfg.items,
        cfg.blocks,
        cfg.density,
        cfg.noise,
        seeds_for(cfg).scoped("gen").seed("synthetic"),
    )?;
    let path = cfg.out.join("dataset.tsv");
    ds.write_tsv(&path)?;
    println!(
        "gen: users={} items={} positives={} -> {}",
        ds.num_users(),
        ds.num_items(),
        ds.len(),
        path.display()
    );
    Ok(())
}

fn cmd_split(cfg: &RunConfig) -> Result<()> {
    let path = require_data(cfg)?;
    let loaded = load_interactions(path, cfg.min_count)?;
    let seed = seeds_for(cfg).scoped("data").seed("split");
    let split = split_dataset(&loaded.data, (3, 1, 1), seed)?;
    let manifest = SplitManifest {
        seed,
        ratios: (3, 1, 1),
        num_users: loaded.data.num_users(),
        num_items: loaded.data.num_items(),
        counts: (split.train.len(), split.valid.len(), split.test.len()),
        user_ids: loaded.user_ids,
        item_ids: loaded.item_ids,
    };
    write_split(&cfg.out, &split, &manifest)?;
    println!(
        "split: {} pairs -> train={} valid={} test={} in {}",
        loaded.data.len(),
        split.train.len(),
        split.valid.len(),
        split.test.len(),
        cfg.out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let split = load_split(cfg)?;
    let spec = cfg
        .samplers
        .first()
        .ok_or_else(|| Error::config("train needs at least one sampler"))?;
    let params = init_model(cfg, &split)?;
    let seeds = seeds_for(cfg).scoped("train");
    let result = train_fixed(&split, spec, &params, &cfg.train, &seeds)?;
    checkpoint::save(&result.params, &cfg.out.join("model.ckpt"))?;
    write_json(&cfg.out.join("metrics.json"), &result.test)?;
    println!(
        "train[{spec}]: test recall@{}={:.4} ndcg@{0}={:.4} (best epoch {}, {} ms)",
        result.test.k, result.test.recall, result.test.ndcg, result.best_epoch, result.elapsed_ms
    );
    Ok(())
}

#[derive(Serialize)]
struct AlphaRecord {
    alpha: Vec<f64>,
    alpha_at_best: Vec<f64>,
    theta: Vec<f64>,
    specs: Vec<String>,
    selected: String,
    selected_index: usize,
    best_epoch: usize,
}

fn write_search_artifacts(cfg: &RunConfig, outcome: &SearchOutcome) -> Result<()> {
    let mut history = fs::File::create(cfg.out.join("history.jsonl"))?;
    for record in &outcome.history {
        serde_json::to_writer(&mut history, record)?;
        history.write_all(b"\n")?;
    }
    let selected = crate::trainer::select_sampler(&outcome.alpha_star);
    let alpha = AlphaRecord {
        alpha: outcome.alpha_star.clone(),
        alpha_at_best: outcome.alpha_at_best.clone(),
        theta: outcome.theta.clone(),
        specs: cfg.samplers.iter().map(|s| s.to_string()).collect(),
        selected: cfg.samplers[selected].to_string(),
        selected_index: selected,
        best_epoch: outcome.best_epoch,
    };
    write_json(&cfg.out.join("alpha.json"), &alpha)?;
    checkpoint::save(&outcome.best_params, &cfg.out.join("model.ckpt"))?;
    Ok(())
}

fn cmd_search(cfg: &RunConfig) -> Result<SearchOutcome> {
    let split = load_split(cfg)?;
    let params = init_model(cfg, &split)?;
    let seeds = seeds_for(cfg).scoped("search");
    let outcome = run_search(&split, &cfg.samplers, &params, &cfg.train, &seeds)?;
    write_search_artifacts(cfg, &outcome)?;
    let alpha: Vec<String> = outcome.alpha_star.iter().map(|a| format!("{a:.4}")).collect();
    println!(
        "search: alpha=[{}] selected={} best_epoch={} ({} ms)",
        alpha.join(", "),
        cfg.samplers[crate::trainer::select_sampler(&outcome.alpha_star)],
        outcome.best_epoch,
        outcome.elapsed_ms
    );
    Ok(outcome)
}

fn cmd_retrain(cfg: &RunConfig) -> Result<()> {
    let dir = cfg
        .search_dir
        .as_deref()
        .ok_or_else(|| Error::config("retrain needs search_dir pointing at a search output"))?;
    let alpha_text = fs::read_to_string(dir.join("alpha.json"))?;
    let alpha: serde_json::Value = serde_json::from_str(&alpha_text)?;
    let alpha_star: Vec<f64> = alpha["alpha"]
        .as_array()
        .ok_or_else(|| Error::config("alpha.json has no `alpha` array"))?
        .iter()
        .filter_map(|v| v.as_f64())
        .collect();
    let spec_names: Vec<String> = alpha["specs"]
        .as_array()
        .ok_or_else(|| Error::config("alpha.json has no `specs` array"))?
        .iter()
        .filter_map(|v| v.as_str().map(String::from))
        .collect();
    let specs: Vec<SamplerSpec> = spec_names
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let w_prime = checkpoint::load(&dir.join("model.ckpt"))?;

    let split = load_split(cfg)?;
    let seeds = seeds_for(cfg).scoped("retrain");
    let (result, idx) = retrain(&split, &alpha_star, &specs, &w_prime, &cfg.train, &seeds)?;
    checkpoint::save(&result.params, &cfg.out.join("model.ckpt"))?;
    write_json(&cfg.out.join("metrics.json"), &result.test)?;
    println!(
        "retrain[{}]: test recall@{}={:.4} ndcg@{1}={:.4} ({} ms)",
        specs[idx], result.test.k, result.test.recall, result.test.ndcg, result.elapsed_ms
    );
    Ok(())
}

fn cmd_auto(cfg: &RunConfig) -> Result<()> {
    let split = load_split(cfg)?;
    let params = init_model(cfg, &split)?;
    let search_seeds = seeds_for(cfg).scoped("search");
    let outcome = run_search(&split, &cfg.samplers, &params, &cfg.train, &search_seeds)?;
    write_search_artifacts(cfg, &outcome)?;

    let retrain_seeds = seeds_for(cfg).scoped("retrain");
    let (result, idx) = retrain(
        &split,
        &outcome.alpha_star,
        &cfg.samplers,
        &outcome.best_params,
        &cfg.train,
        &retrain_seeds,
    )?;
    checkpoint::save(&result.params, &cfg.out.join("model.ckpt"))?;
    write_json(&cfg.out.join("metrics.json"), &result.test)?;
    println!(
        "auto[{}]: test recall@{}={:.4} ndcg@{1}={:.4} (search {} ms + retrain {} ms)",
        cfg.samplers[idx],
        result.test.k,
        result.test.recall,
        result.test.ndcg,
        outcome.elapsed_ms,
        result.elapsed_ms
    );
    Ok(())
}

fn cmd_grid(cfg: &RunConfig) -> Result<()> {
    let split = load_split(cfg)?;
    let params = init_model(cfg, &split)?;
    let seeds = seeds_for(cfg).scoped("grid");
    let outcome = grid_search(&split, &cfg.samplers, &params, &cfg.train, &seeds, cfg.jobs)?;

    let k = cfg.train.eval_k;
    let mut csv = String::new();
    csv.push_str(&format!(
        "sampler,recall@{k},ndcg@{k},precision@{k},hr@{k},elapsed_ms\n"
    ));
    for cell in &outcome.cells {
        let t = &cell.result.test;
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{}\n",
            cell.spec, t.recall, t.ndcg, t.precision, t.hit_ratio, cell.result.elapsed_ms
        ));
    }
    csv.push_str(&format!("total,,,,,{}\n", outcome.total_elapsed_ms));
    fs::write(cfg.out.join("results.csv"), csv)?;

    let best = outcome
        .cells
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.result
                .best_valid
                .get(cfg.train.metric)
                .partial_cmp(&b.result.best_valid.get(cfg.train.metric))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .expect("at least one cell");
    write_json(&cfg.out.join("metrics.json"), &outcome.cells[best].result.test)?;
    println!(
        "grid: best={} test recall@{}={:.4} (total {} ms over {} cells)",
        outcome.cells[best].spec,
        k,
        outcome.cells[best].result.test.recall,
        outcome.total_elapsed_ms,
        outcome.cells.len()
    );
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let split = load_split(cfg)?;
    let ckpt = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::config("eval needs a checkpoint path"))?;
    let params = checkpoint::load(ckpt)?;
    let report: MetricsReport = match cfg.eval_split {
        EvalSplit::Valid => evaluate(&params, &split.train, &split.valid, None, cfg.train.eval_k)?,
        EvalSplit::Test => evaluate(
            &params,
            &split.train,
            &split.test,
            Some(&split.valid),
            cfg.train.eval_k,
        )?,
    };
    write_json(&cfg.out.join("metrics.json"), &report)?;
    println!(
        "eval[{}]: recall@{}={:.4} ndcg@{1}={:.4} precision@{1}={:.4} hr@{1}={:.4} users={}",
        match cfg.eval_split {
            EvalSplit::Valid => "valid",
            EvalSplit::Test => "test",
        },
        report.k,
        report.recall,
        report.ndcg,
        report.precision,
        report.hit_ratio,
        report.users_evaluated
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_apply() {
        let cfg = RunConfig::default();
        let mut rebuilt = RunConfig::default();
        for (key, value) in cfg.to_map() {
            rebuilt.apply(&key, &value).unwrap_or_else(|e| {
                panic!("key {key} = {value} failed: {e}");
            });
        }
        assert_eq!(cfg, rebuilt);
    }

    #[test]
    fn flag_overrides_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "lr_w = 1e-3\nepochs = 7\n").unwrap();
        let overrides = vec![("lr_w".to_string(), "3e-4".to_string())];
        let cfg = load_config(Some(&path), &overrides).unwrap();
        assert_eq!(cfg.train.lr_w, 3e-4);
        assert_eq!(cfg.train.epochs, 7);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.conf");
        fs::write(&path, "").unwrap();
        let cfg = load_config(Some(&path), &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_suggestions() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply("learningrate", "0.1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lr_w"), "{msg}");
        let err = cfg.apply("epohcs", "3").unwrap_err();
        assert!(err.to_string().contains("epochs"), "{err}");
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply("epochs", "three").is_err());
        assert!(cfg.apply("dense_adam", "maybe").is_err());
        assert!(cfg.apply("metric", "auc@20").is_err());
        assert!(cfg.apply("samplers", "srns").is_err());
        assert!(cfg.apply("eval_split", "train").is_err());
    }

    #[test]
    fn metric_key_sets_kind_and_cutoff() {
        let mut cfg = RunConfig::default();
        cfg.apply("metric", "ndcg@10").unwrap();
        assert_eq!(cfg.train.metric, MetricKind::Ndcg);
        assert_eq!(cfg.train.eval_k, 10);
    }
}
