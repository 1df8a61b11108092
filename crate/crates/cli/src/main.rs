//! `bendgraph`: STEP inspection, feature recognition, graph export, corpus
//! generation, training, evaluation and recognizer validation.
//!
//! JSON goes to stdout, diagnostics to stderr. Exit codes: 0 ok,
//! 1 validation or run failure, 2 usage or input error.

mod config;

use bendgraph::brep::{euler_counts, resolve_solid, BrepError, BrepSolid};
use bendgraph::datagen::{build_dataset, validate_manifest, DatagenError, DatasetOptions, Profile, Split, MANIFEST_NAME};
use bendgraph::enrich::{assemble_graph, write_bgr1, EnrichError, GLOBAL_WIDTH, GRID_CHANNELS, MF_WIDTH};
use bendgraph::featrec::{recognize, FeatrecError};
use bendgraph::nn::{
    baseline, baseline_metrics, evaluate, load_checkpoint, load_graphs, predict_labels, run_experiment, samples_for,
    save_checkpoint, ModelConfig, NnError, Task, TrainConfig, NODE_INPUT,
};
use bendgraph::step::{parse_step, StepError};
use clap::{Parser, Subcommand};
use config::Resolver;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("{0}")]
    Failed(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Failed(_) | CliError::Validation(_) => 1,
        }
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> Self {
        CliError::Input(format!("parse error: {e}"))
    }
}

impl From<BrepError> for CliError {
    fn from(e: BrepError) -> Self {
        CliError::Input(format!("topology error: {e}"))
    }
}

impl From<FeatrecError> for CliError {
    fn from(e: FeatrecError) -> Self {
        CliError::Input(format!("recognition error: {e}"))
    }
}

impl From<EnrichError> for CliError {
    fn from(e: EnrichError) -> Self {
        CliError::Input(format!("graph error: {e}"))
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::Io { .. } | DatagenError::Manifest(_) => CliError::Input(e.to_string()),
            e => CliError::Failed(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFinite { .. } => CliError::Failed(e.to_string()),
            NnError::Config(_) => CliError::Usage(e.to_string()),
            NnError::Datagen(d) => d.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bendgraph", version, about = "Sheet-metal STEP analysis and graph learning")]
struct Cli {
    /// `key = value` config file (falls back to BENDGRAPH_CONFIG)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Topology summary of a STEP file
    Inspect {
        step: PathBuf,
    },
    /// Rule-based feature recognition report
    Recognize {
        step: PathBuf,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<String>,
    },
    /// Enriched face-adjacency graph export (.json or .bgr)
    Graph {
        step: PathBuf,
        /// UV samples per side [default: 10]
        #[arg(long)]
        grid: Option<usize>,
        /// Zero every MF vector
        #[arg(long)]
        no_mf: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Generate a labelled synthetic corpus with manifest
    Gen {
        /// Number of parts [default: 1000]
        #[arg(long)]
        n: Option<usize>,
        /// [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated plain,holes,corners,tapered or all [default: all]
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Train a model on a manifest; writes a checkpoint and history CSV
    Train {
        #[arg(long)]
        manifest: Option<String>,
        /// time or collision [default: time]
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        no_mf: bool,
        /// [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint path
        #[arg(long)]
        out: Option<String>,
        /// History CSV path [default: <out>.history.csv]
        #[arg(long)]
        history: Option<String>,
        /// [default: 10]
        #[arg(long)]
        grid: Option<usize>,
        /// First convolution width [default: 32]
        #[arg(long)]
        conv1: Option<usize>,
        /// [default: 1000]
        #[arg(long)]
        max_epochs: Option<usize>,
        /// [default: 50]
        #[arg(long)]
        patience: Option<usize>,
        /// [default: 0.0001]
        #[arg(long)]
        lr: Option<f64>,
        /// [default: 32]
        #[arg(long)]
        batch_size: Option<usize>,
        /// Also train the MF-zeroed twin with the same seeds and report both
        #[arg(long)]
        paired: bool,
    },
    /// Metrics of a checkpoint on one manifest split, with the train-mean baseline
    Eval {
        #[arg(long)]
        ckpt: Option<String>,
        #[arg(long)]
        manifest: Option<String>,
        /// train, val or test [default: test]
        #[arg(long)]
        split: Option<String>,
        /// Write id,label,prediction CSV here
        #[arg(long)]
        predictions: Option<String>,
    },
    /// Recognizer-vs-ground-truth accuracy over a manifest
    Validate {
        #[arg(long)]
        manifest: Option<String>,
    },
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_solid(path: &Path) -> Result<BrepSolid, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(resolve_solid(&parse_step(&bytes)?)?)
}

fn log_resolved(r: &Resolver, command: &str) {
    log::info!("resolved config: {}", r.resolved(command));
}

fn inspect(r: Resolver, step: &Path) -> Result<(), CliError> {
    log_resolved(&r, "inspect");
    let solid = load_solid(step)?;
    let c = euler_counts(&solid);
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &solid.faces {
        *kinds.entry(f.surface.kind().as_str()).or_default() += 1;
    }
    let manifold = solid.check_manifold().is_ok();
    print(&json!({
        "file": step.display().to_string(),
        "faces": c.faces,
        "edges": c.edges,
        "vertices": c.vertices,
        "inner_loops": c.inner_loops,
        "surface_kinds": kinds,
        "euler": { "chi": c.chi(), "genus": c.genus(), "valid": c.genus().is_some() },
        "manifold": manifold,
    }));
    Ok(())
}

fn recognize_cmd(mut r: Resolver, step: &Path, out: Option<String>) -> Result<(), CliError> {
    let out = r.optional("out", out)?;
    log_resolved(&r, "recognize");
    let solid = load_solid(step)?;
    let report = recognize(&solid)?;
    let v = serde_json::to_value(&report).map_err(|e| CliError::Failed(e.to_string()))?;
    match out {
        Some(path) => {
            write_file(Path::new(&path), serde_json::to_string_pretty(&v).expect("serializable").as_bytes())?;
            print(&json!({ "out": path, "bends": report.bends.len(), "holes": report.holes.len(), "thickness": report.thickness }));
        }
        None => print(&v),
    }
    Ok(())
}

fn graph_cmd(mut r: Resolver, step: &Path, grid: Option<usize>, no_mf: bool, out: Option<String>) -> Result<(), CliError> {
    let grid = r.value("grid", grid, bendgraph::enrich::DEFAULT_GRID)?;
    let no_mf = r.flag("no_mf", no_mf)?;
    let out = r.optional("out", out)?;
    log_resolved(&r, "graph");
    if grid == 0 {
        return Err(CliError::Usage("grid must be at least 1".into()));
    }
    let solid = load_solid(step)?;
    let report = recognize(&solid)?;
    let graph = assemble_graph(&solid, &report, grid, !no_mf)?;
    let meta = json!({
        "nodes": graph.nodes.len(),
        "edges": graph.edges.len(),
        "grid": grid,
        "grid_shape": [GRID_CHANNELS, grid, grid],
        "mf_width": MF_WIDTH,
        "node_width_post_encode": NODE_INPUT,
        "globals_width": GLOBAL_WIDTH,
        "with_mf": !no_mf,
    });
    match out {
        Some(path) => {
            let p = Path::new(&path);
            if p.extension().is_some_and(|e| e == "bgr") {
                let mut bytes = Vec::new();
                write_bgr1(&graph, &mut bytes)?;
                write_file(p, &bytes)?;
            } else {
                write_file(p, &serde_json::to_vec(&graph.to_json()).expect("serializable"))?;
            }
            print(&json!({ "meta": meta, "out": path }));
        }
        None => print(&json!({ "meta": meta, "graph": graph.to_json() })),
    }
    Ok(())
}

fn parse_profiles(s: &str) -> Result<Vec<Profile>, CliError> {
    if s == "all" {
        return Ok(Profile::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse::<Profile>().map_err(CliError::Usage)).collect()
}

fn gen(mut r: Resolver, n: Option<usize>, seed: Option<u64>, profile: Option<String>, out: Option<String>) -> Result<(), CliError> {
    let n = r.value("n", n, 1000)?;
    let seed = r.value("seed", seed, 0)?;
    let profile = r.value("profile", profile, "all".to_string())?;
    let out = r.required::<String>("out", out)?;
    log_resolved(&r, "gen");
    let profiles = parse_profiles(&profile)?;
    let records = build_dataset(&DatasetOptions { n, seed, profiles, out_dir: out.clone().into() })?;
    let count = |s: Split| records.iter().filter(|r| r.split == s).count();
    let ones = records.iter().filter(|r| r.collision == 1).count();
    print(&json!({
        "n": records.len(),
        "out": out,
        "manifest": Path::new(&out).join(MANIFEST_NAME).display().to_string(),
        "splits": { "train": count(Split::Train), "val": count(Split::Val), "test": count(Split::Test) },
        "collision": { "0": records.len() - ones, "1": ones },
    }));
    Ok(())
}

struct TrainArgs {
    manifest: Option<String>,
    task: Option<String>,
    no_mf: bool,
    seed: Option<u64>,
    out: Option<String>,
    history: Option<String>,
    grid: Option<usize>,
    conv1: Option<usize>,
    max_epochs: Option<usize>,
    patience: Option<usize>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    paired: bool,
}

fn train(mut r: Resolver, a: TrainArgs) -> Result<(), CliError> {
    let manifest = r.required::<String>("manifest", a.manifest)?;
    let task: Task = r.value("task", a.task, "time".to_string())?.parse().map_err(CliError::Usage)?;
    let no_mf = r.flag("no_mf", a.no_mf)?;
    let seed = r.value("seed", a.seed, 0u64)?;
    let out = r.required::<String>("out", a.out)?;
    let history = r.value("history", a.history, format!("{out}.history.csv"))?;
    let grid = r.value("grid", a.grid, bendgraph::enrich::DEFAULT_GRID)?;
    let conv1 = r.value("conv1", a.conv1, 32usize)?;
    let mut tc = TrainConfig::new(task, seed);
    tc.max_epochs = r.value("max_epochs", a.max_epochs, tc.max_epochs)?;
    tc.patience = r.value("patience", a.patience, tc.patience)?;
    tc.learning_rate = r.value("lr", a.lr, tc.learning_rate)?;
    tc.batch_size = r.value("batch_size", a.batch_size, tc.batch_size)?;
    let paired = r.flag("paired", a.paired)?;
    log_resolved(&r, "train");
    let mut mc = ModelConfig::new(task, grid, seed);
    mc.conv_channels[0] = conv1;
    mc.use_mf = !no_mf;
    mc.validate()?;
    tc.validate()?;

    let graphs = load_graphs(Path::new(&manifest), grid, true, task)?;
    let (report, outcome) = run_experiment(&graphs, mc.clone(), tc.clone())?;
    save_checkpoint(&outcome.checkpoint, Path::new(&out))?;
    write_file(Path::new(&history), outcome.history.to_csv().as_bytes())?;
    let mut v = json!({
        "checkpoint": out,
        "history": history,
        "resolved": outcome.resolved,
        "stopped_early": outcome.history.stopped_early,
        "report": report,
    });
    if paired {
        let mut twin = mc;
        twin.use_mf = !twin.use_mf;
        let (twin_report, _) = run_experiment(&graphs, twin, tc)?;
        v["paired"] = serde_json::to_value(twin_report).expect("serializable");
    }
    print(&v);
    Ok(())
}

fn eval(mut r: Resolver, ckpt: Option<String>, manifest: Option<String>, split: Option<String>, predictions: Option<String>) -> Result<(), CliError> {
    let ckpt_path = r.required::<String>("ckpt", ckpt)?;
    let manifest = r.required::<String>("manifest", manifest)?;
    let split: Split = r.value("split", split, "test".to_string())?.parse().map_err(CliError::Usage)?;
    let predictions = r.optional("predictions", predictions)?;
    log_resolved(&r, "eval");
    let ckpt = load_checkpoint(Path::new(&ckpt_path))?;
    let cfg = &ckpt.model.config;
    let graphs = load_graphs(Path::new(&manifest), cfg.grid, true, cfg.task)?;
    let samples = samples_for(&ckpt, &graphs, split)?;
    let metrics = evaluate(&ckpt, &samples)?;
    let train_labels: Vec<f64> = graphs.iter().filter(|g| g.split == Split::Train).map(|g| g.label).collect();
    let base = baseline(&train_labels)?;
    let base_metrics = baseline_metrics(&base, cfg.task, &samples)?;
    if let Some(path) = predictions {
        let pred = predict_labels(&ckpt, &samples)?;
        let mut csv = String::from("id,label,prediction\n");
        for (s, p) in samples.iter().zip(pred) {
            csv.push_str(&format!("{},{},{}\n", s.id, s.label, p));
        }
        write_file(Path::new(&path), csv.as_bytes())?;
    }
    print(&json!({
        "task": cfg.task,
        "split": split,
        "use_mf": cfg.use_mf,
        "metrics": metrics,
        "baseline": { "mean": base.mean, "median": base.median, "metrics": base_metrics },
    }));
    Ok(())
}

fn validate(mut r: Resolver, manifest: Option<String>) -> Result<(), CliError> {
    let manifest = r.required::<String>("manifest", manifest)?;
    log_resolved(&r, "validate");
    let report = validate_manifest(Path::new(&manifest))?;
    print(&serde_json::to_value(&report).expect("serializable"));
    if report.passed != report.parts {
        return Err(CliError::Validation(format!("{} of {} parts disagree with ground truth", report.parts - report.passed, report.parts)));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let r = Resolver::new(cli.config.as_deref())?;
    match cli.command {
        Command::Inspect { step } => inspect(r, &step),
        Command::Recognize { step, out } => recognize_cmd(r, &step, out),
        Command::Graph { step, grid, no_mf, out } => graph_cmd(r, &step, grid, no_mf, out),
        Command::Gen { n, seed, profile, out } => gen(r, n, seed, profile, out),
        Command::Train {
            manifest, task, no_mf, seed, out, history, grid, conv1, max_epochs, patience, lr, batch_size, paired,
        } => train(r, TrainArgs { manifest, task, no_mf, seed, out, history, grid, conv1, max_epochs, patience, lr, batch_size, paired }),
        Command::Eval { ckpt, manifest, split, predictions } => eval(r, ckpt, manifest, split, predictions),
        Command::Validate { manifest } => validate(r, manifest),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bendgraph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
