//! Command-line front end. Every command reads a [`PipelineConfig`], applies
//! flag overrides, writes its outputs under the output directory and finishes
//! with a `<command>.manifest.json`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::builder::{build_dataset, ClusterLabelMap, SubgraphRecord};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::graph::{build_graph, read_cache, write_cache, BackgroundGraph, NeighborView};
use crate::io::{self, Manifest};
use crate::metrics::{self, ConfusionMatrix};
use crate::model::{load_checkpoint, save_checkpoint, Mode};
use crate::sampler::{
    build_subgraph_minibatch, derive_seed, epoch_batches, seeded_rng, split_dataset, Fanouts, MinibatchDump, Split,
};
use crate::synth;
use crate::train::{predict_scores, train};
use crate::vip::{
    augment_graph, build_cache_policy, build_random_cache_policy, partition_nodes, simulate_comm_volume,
    training_batches, vip_analysis, CachePolicy, CommStats, VipConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "aml-subgraph",
    version,
    about = "Subgraph datasets, sampling, cache analysis and classifiers for transaction graphs"
)]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build labeled subgraphs from a background graph and cluster labels.
    Build,
    /// Summarize a subgraph dataset.
    Stats,
    /// Generate a synthetic dataset with a planted boundary signal.
    Synth(SynthArgs),
    /// Dump training minibatches as JSON lines.
    Sample(SampleArgs),
    /// Vertex-inclusion probabilities and cache communication report.
    Vip(VipArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Score a split with a checkpoint and write metrics.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Background nodes.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Subgraph records.
    #[arg(long)]
    pub records: Option<usize>,
    /// Share of records labeled suspicious.
    #[arg(long)]
    pub suspicious_fraction: Option<f64>,
    /// Probability that a suspicious boundary edge goes to a peel node.
    #[arg(long)]
    pub signal: Option<f64>,
    /// Smallest record size.
    #[arg(long)]
    pub min_size: Option<usize>,
    /// Largest record size.
    #[arg(long)]
    pub max_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Subgraphs per minibatch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated, e.g. `10,10`; `all` keeps every neighbor.
    #[arg(long)]
    pub fanouts: Option<String>,
    /// Number of minibatches to dump.
    #[arg(long, default_value_t = 1)]
    pub batches: usize,
}

#[derive(Debug, Args)]
pub struct VipArgs {
    /// Subgraphs per minibatch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated neighbors per hop.
    #[arg(long)]
    pub fanouts: Option<String>,
    /// Feature-store partitions.
    #[arg(long)]
    pub partitions: Option<usize>,
    /// Cached remote nodes per partition.
    #[arg(long)]
    pub cache_budget: Option<usize>,
    /// Minibatches replayed for the communication report.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `glass`, `gnnseg` or `meanpool`.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Subgraphs per minibatch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Positive-class loss weight; defaults to #negative / #positive.
    #[arg(long)]
    pub pos_weight: Option<f64>,
    /// Comma-separated neighbors per hop.
    #[arg(long)]
    pub fanouts: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate; defaults to `model.sgm` in the output directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Expected model mode; the checkpoint's mode is used when omitted.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Split to score.
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    /// Score threshold for the confusion matrix.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma-separated neighbors per hop. Sets the layer count; sample sizes apply only with sampled inference.
    #[arg(long)]
    pub fanouts: Option<String>,
    /// Also write `sweep.csv`.
    #[arg(long)]
    pub sweep: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out = o.clone();
    }
    if cfg.threads > 0 {
        // A second call in the same process fails; the first setting stands.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match &cli.command {
        Command::Build => cmd_build(&cfg),
        Command::Stats => cmd_stats(&cfg),
        Command::Synth(a) => cmd_synth(&mut cfg, a),
        Command::Sample(a) => cmd_sample(&mut cfg, a),
        Command::Vip(a) => cmd_vip(&mut cfg, a),
        Command::Train(a) => cmd_train(&mut cfg, a),
        Command::Eval(a) => cmd_eval(&mut cfg, a),
    }
}

fn out_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.out.join(name)
}

fn finish(cfg: &PipelineConfig, command: &str, outputs: &[&str]) -> Result<()> {
    let manifest = Manifest::new(command, cfg.seed, cfg, outputs);
    io::write_json(&out_path(cfg, &format!("{command}.manifest.json")), &manifest)
}

/// Loads the background graph, preferring the binary cache when configured
/// and present, and writing it after a CSV load otherwise.
pub fn load_graph(cfg: &PipelineConfig) -> Result<BackgroundGraph> {
    if let Some(cache) = cfg.paths.graph_cache.as_deref().filter(|p| p.exists()) {
        return read_cache(cache);
    }
    let nodes = io::read_nodes(&cfg.paths.nodes, &cfg.graph.columns, cfg.graph.node_features)?;
    let (edges, ts) = io::read_edges(
        &cfg.paths.edges,
        &cfg.graph.columns,
        cfg.graph.edge_features,
        cfg.graph.timestamp.as_deref(),
    )?;
    let g = build_graph(nodes, edges, ts)?;
    if let Some(cache) = &cfg.paths.graph_cache {
        write_cache(&g, cache)?;
    }
    Ok(g)
}

fn load_dataset(cfg: &PipelineConfig) -> Result<(BackgroundGraph, Vec<SubgraphRecord>, Split)> {
    let g = load_graph(cfg)?;
    let records = io::read_subgraphs(&cfg.paths.subgraphs, &cfg.paths.subgraph_labels, &g)?;
    let split = split_dataset(records.len(), &cfg.split)?;
    Ok((g, records, split))
}

fn parse_fanouts(s: &Option<String>, default: &Fanouts) -> Result<Fanouts> {
    s.as_deref().map_or_else(|| Ok(default.clone()), Fanouts::parse)
}

fn cmd_build(cfg: &PipelineConfig) -> Result<()> {
    let g = load_graph(cfg)?;
    let pairs = io::read_cluster_labels(&cfg.paths.labels)?;
    let labels = ClusterLabelMap::from_external(&g, pairs)?;
    let out = build_dataset(&g, &labels, cfg.graph.window()?, &cfg.builder)?;
    io::write_subgraphs(&out_path(cfg, "subgraphs.csv"), &out.graph, &out.records)?;
    io::write_subgraph_labels(&out_path(cfg, "subgraph_labels.csv"), &out.records)?;
    io::write_json(&out_path(cfg, "build_report.json"), &out.report)?;
    finish(
        cfg,
        "build",
        &["subgraphs.csv", "subgraph_labels.csv", "build_report.json"],
    )
}

fn cmd_stats(cfg: &PipelineConfig) -> Result<()> {
    let graph = if cfg.paths.nodes.exists() || cfg.paths.graph_cache.as_deref().is_some_and(Path::exists) {
        Some(load_graph(cfg)?)
    } else {
        None
    };
    let membership = io::read_membership(&cfg.paths.subgraphs)?;
    let labels = io::read_subgraph_labels(&cfg.paths.subgraph_labels)?;
    let stats = io::dataset_stats(graph.as_ref(), &membership, &labels);
    let text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))?;
    io::write_json(&out_path(cfg, "stats.json"), &stats)?;
    finish(cfg, "stats", &["stats.json"])
}

fn cmd_synth(cfg: &mut PipelineConfig, a: &SynthArgs) -> Result<()> {
    let s = &mut cfg.synth;
    s.nodes = a.nodes.unwrap_or(s.nodes);
    s.records = a.records.unwrap_or(s.records);
    s.suspicious_fraction = a.suspicious_fraction.unwrap_or(s.suspicious_fraction);
    s.signal = a.signal.unwrap_or(s.signal);
    s.min_size = a.min_size.unwrap_or(s.min_size);
    s.max_size = a.max_size.unwrap_or(s.max_size);
    let d = synth::generate(&cfg.synth, cfg.seed)?;
    io::write_nodes(&out_path(cfg, "nodes.csv"), &d.graph)?;
    io::write_edges(&out_path(cfg, "edges.csv"), &d.graph)?;
    io::write_subgraphs(&out_path(cfg, "subgraphs.csv"), &d.graph, &d.records)?;
    io::write_subgraph_labels(&out_path(cfg, "subgraph_labels.csv"), &d.records)?;
    finish(
        cfg,
        "synth",
        &["nodes.csv", "edges.csv", "subgraphs.csv", "subgraph_labels.csv"],
    )
}

fn cmd_sample(cfg: &mut PipelineConfig, a: &SampleArgs) -> Result<()> {
    cfg.train.batch_size = a.batch_size.unwrap_or(cfg.train.batch_size);
    cfg.train.fanouts = parse_fanouts(&a.fanouts, &cfg.train.fanouts)?;
    let (g, records, split) = load_dataset(cfg)?;
    let view = NeighborView::new(&g, cfg.train.direction);
    let plan = epoch_batches(&split.train, cfg.train.batch_size, cfg.seed, 0)?;
    let path = out_path(cfg, "minibatches.jsonl");
    let mut lines = Vec::new();
    for (b, idx) in plan.iter().take(a.batches).enumerate() {
        let recs: Vec<&SubgraphRecord> = idx.iter().map(|&i| &records[i]).collect();
        let mut rng = seeded_rng(derive_seed(cfg.seed, 0, b as u64));
        let mb = build_subgraph_minibatch(&g, &view, &recs, &cfg.train.fanouts, &mut rng)?;
        let dump = MinibatchDump::new(b, &g, &recs, &mb);
        lines.push(serde_json::to_string(&dump).expect("dump serializes"));
    }
    std::fs::create_dir_all(&cfg.paths.out).map_err(|e| Error::io(&cfg.paths.out, e))?;
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    finish(cfg, "sample", &["minibatches.jsonl"])
}

#[derive(Debug, Serialize)]
struct CommReport {
    partitions: usize,
    partition_sizes: Vec<usize>,
    cache_budget: usize,
    batch_size: usize,
    fanouts: Vec<usize>,
    vip: CommStats,
    random: CommStats,
    none: CommStats,
}

fn cmd_vip(cfg: &mut PipelineConfig, a: &VipArgs) -> Result<()> {
    let v = &mut cfg.vip;
    v.batch_size = a.batch_size.unwrap_or(v.batch_size);
    v.fanouts = parse_fanouts(&a.fanouts, &v.fanouts)?;
    v.partitions = a.partitions.unwrap_or(v.partitions);
    v.cache_budget = a.cache_budget.unwrap_or(v.cache_budget);
    v.trials = a.trials.unwrap_or(v.trials);
    let v = cfg.vip.clone();

    let (g, records, split) = load_dataset(cfg)?;
    let view = NeighborView::new(&g, cfg.train.direction);
    let aug = augment_graph(&g, &records)?;
    let vcfg = VipConfig {
        batch_size: v.batch_size,
        fanouts: v.fanouts.clone(),
        layer0: v.layer0,
        method: v.method,
    };
    let table = vip_analysis(&aug, &view, &split.train, &vcfg)?;
    io::write_vip_csv(&out_path(cfg, "vip.csv"), &g, &table)?;

    let partition = partition_nodes(&g, &records, v.partitions, cfg.seed, v.partition_mode, v.balance)?;
    let batches = training_batches(
        &g,
        &view,
        &records,
        &split.train,
        v.batch_size,
        &v.fanouts,
        cfg.seed,
        v.trials,
    )?;
    let vip_policy = build_cache_policy(&table, &partition, v.cache_budget);
    let random_policy = build_random_cache_policy(&partition, v.cache_budget, cfg.seed);
    let report = CommReport {
        partitions: v.partitions,
        partition_sizes: partition.sizes(),
        cache_budget: v.cache_budget,
        batch_size: v.batch_size,
        fanouts: v.fanouts.as_slice().to_vec(),
        vip: simulate_comm_volume(&partition, &vip_policy, &batches)?,
        random: simulate_comm_volume(&partition, &random_policy, &batches)?,
        none: simulate_comm_volume(&partition, &CachePolicy::empty(v.partitions), &batches)?,
    };
    io::write_json(&out_path(cfg, "comm_report.json"), &report)?;
    finish(cfg, "vip", &["vip.csv", "comm_report.json"])
}

fn checkpoint_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths
        .checkpoint
        .clone()
        .unwrap_or_else(|| out_path(cfg, "model.sgm"))
}

fn cmd_train(cfg: &mut PipelineConfig, a: &TrainArgs) -> Result<()> {
    let t = &mut cfg.train;
    t.mode = a.mode.unwrap_or(t.mode);
    t.lr = a.lr.unwrap_or(t.lr);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.pos_weight = a.pos_weight.or(t.pos_weight);
    t.fanouts = parse_fanouts(&a.fanouts, &t.fanouts)?;
    let (g, records, split) = load_dataset(cfg)?;
    let out = train(&g, &records, &split, &cfg.train, cfg.seed)?;
    let ckpt = checkpoint_path(cfg);
    if let Some(dir) = ckpt.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_checkpoint(&out.params, cfg.train.mode, &ckpt)?;
    io::write_json(
        &out_path(cfg, "history.json"),
        &serde_json::json!({
            "best_epoch": out.best_epoch,
            "pos_weight": out.pos_weight,
            "epochs": out.history,
        }),
    )?;
    finish(cfg, "train", &["model.sgm", "history.json"])
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    split: SplitName,
    mode: Mode,
    threshold: f64,
    records: usize,
    confusion: ConfusionMatrix,
    f1: f64,
    precision: Option<f64>,
    recall: Option<f64>,
    pr_auc: f64,
    roc_auc: f64,
}

fn cmd_eval(cfg: &mut PipelineConfig, a: &EvalArgs) -> Result<()> {
    let ckpt = a.checkpoint.clone().unwrap_or_else(|| checkpoint_path(cfg));
    let (params, mode) = load_checkpoint(&ckpt)?;
    if let Some(m) = a.mode.filter(|&m| m != mode) {
        return Err(Error::Config(format!(
            "checkpoint {} holds a {mode} model, not {m}",
            ckpt.display()
        )));
    }
    cfg.train.mode = mode;
    cfg.train.fanouts = parse_fanouts(&a.fanouts, &cfg.train.fanouts)?;
    let threshold = a.threshold.unwrap_or(cfg.threshold);
    let (g, records, split) = load_dataset(cfg)?;
    let idx = match a.split {
        SplitName::Train => &split.train,
        SplitName::Val => &split.val,
        SplitName::Test => &split.test,
    };
    let labels: Vec<bool> = idx
        .iter()
        .map(|&i| {
            records[i]
                .label
                .target()
                .map(|y| y == 1.0)
                .ok_or_else(|| Error::Integrity(format!("subgraph {} has no class label", records[i].id)))
        })
        .collect::<Result<_>>()?;
    let scores = predict_scores(&params, &g, &records, idx, &cfg.train, cfg.seed)?;
    let confusion = metrics::confusion(&scores, &labels, threshold)?;
    let report = MetricsReport {
        split: a.split,
        mode,
        threshold,
        records: idx.len(),
        confusion,
        f1: metrics::micro_f1(&confusion)?,
        precision: metrics::precision(&confusion).ok(),
        recall: metrics::recall(&confusion).ok(),
        pr_auc: metrics::pr_auc(&scores, &labels)?,
        roc_auc: metrics::roc_auc(&scores, &labels)?,
    };
    io::write_json(&out_path(cfg, "metrics.json"), &report)?;
    let mut outputs = vec!["metrics.json"];
    if a.sweep {
        io::write_sweep_csv(
            &out_path(cfg, "sweep.csv"),
            &metrics::threshold_sweep(&scores, &labels)?,
        )?;
        outputs.push("sweep.csv");
    }
    finish(cfg, "eval", &outputs)
}
