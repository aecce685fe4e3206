//! Command-line interface.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid flags or inputs,
//! 3 dataset generation failure, 4 training failure, 5 planner or checkpoint
//! mismatch, 6 goal unreachable.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nastar_core::datagen::{generate, Dataset, DatasetEntry, DatasetSpec, ObstacleStyle, Split};
use nastar_core::diff_astar::{run_inference, DiffAstarConfig, ExpansionMode, SearchVariant};
use nastar_core::encoder::EncoderConfig;
use nastar_core::metrics::{evaluate, EvalConfig, Evaluation};
use nastar_core::planner::{ClassicalPlanner, NeuralPlanner, Planner};
use nastar_core::train::{EpochLog, TrainConfig, Trainer, ValidationSet};
use nastar_core::{MapKind, NodeIndex, ProblemInstance, ScalarField, SearchResult};
use serde_json::{json, Value};

use crate::bench::{self, BenchPlanner};
use crate::dataset::{read_dataset, write_dataset};
use crate::formats::{encode_ppm, read_map, read_weights, write_atomic, write_weights, WeightsHeader};
use crate::render::{render_guidance, render_search};
use crate::results::{self, with_suffix};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GENERATION: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;
pub const EXIT_UNREACHABLE: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "nastar",
    version,
    about = "Learned guidance maps for A* search on grid maps",
    args_override_self = true
)]
pub struct Cli {
    /// JSON file of default flag values; keys are flag names with `_` for `-`.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset directory.
    Gen(GenArgs),
    /// Train a guidance-map encoder.
    Train(TrainArgs),
    /// Evaluate a planner on one split of a dataset.
    Eval(EvalArgs),
    /// Plan on a single map and render the search.
    Plan(PlanArgs),
    /// Measure mean planning time per instance.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StyleArg {
    RandomBlocks,
    Maze,
    Tiled,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "random-blocks")]
    pub style: StyleArg,
    /// Map width and height.
    #[arg(long, num_args = 2, value_names = ["W", "H"], default_values_t = [32, 32])]
    pub size: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 20)]
    pub n_val: usize,
    #[arg(long, default_value_t = 20)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Render maps as RGB images; obstacle masks are not written.
    #[arg(long)]
    pub image_mode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Astar,
    Bf,
}

impl VariantArg {
    fn variant(self) -> SearchVariant {
        match self {
            VariantArg::Astar => SearchVariant::NeuralAstar,
            VariantArg::Bf => SearchVariant::NeuralBF,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path for the best weights. Also writes `CKPT.last`,
    /// `CKPT.log.csv`, and `CKPT.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "astar")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub base_channels: usize,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Dilate expert paths with a 3x3 kernel. Defaults to on for maps at least 64 wide.
    #[arg(long)]
    pub dilate: Option<bool>,
    /// Continue from a checkpoint written by an earlier run (usually `CKPT.last`).
    #[arg(long, value_name = "CKPT")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlannerArg {
    NeuralAstar,
    NeuralBf,
    Astar,
    Wastar,
    Bf,
    Dijkstra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl SplitArg {
    fn split(self) -> Split {
        match self {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, value_enum)]
    pub planner: PlannerArg,
    /// Checkpoint for the neural planners.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Heuristic weight of weighted A*.
    #[arg(long, default_value_t = 0.8)]
    pub w: f64,
    /// Output prefix; defaults to `DATA/results-PLANNER-SPLIT`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Map file (PGM or PPM).
    #[arg(long)]
    pub map: PathBuf,
    /// Start as `row,col`.
    #[arg(long, value_parser = parse_node)]
    pub start: NodeIndex,
    /// Goal as `row,col`.
    #[arg(long, value_parser = parse_node)]
    pub goal: NodeIndex,
    /// Checkpoint; when given, the neural planner it was trained for is used.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Classical planner used without a checkpoint.
    #[arg(long, value_enum, default_value = "astar")]
    pub planner: PlannerArg,
    #[arg(long, default_value_t = 0.8)]
    pub w: f64,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub planner: PlannerArg,
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub w: f64,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
}

fn parse_node(s: &str) -> Result<NodeIndex, String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected `row,col`, got `{s}`"))?;
    let r = r.trim().parse().map_err(|_| format!("bad row in `{s}`"))?;
    let c = c.trim().parse().map_err(|_| format!("bad column in `{s}`"))?;
    Ok(NodeIndex::new(r, c))
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    fn new(code: i32, msg: impl Into<String>) -> Self {
        Self { code, msg: msg.into() }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_USAGE, msg.to_string())
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Appends flags from a JSON config object that the command line does not
/// already set.
fn merge_config(mut args: Vec<OsString>, path: &Path) -> Result<Vec<OsString>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let obj: serde_json::Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: expected a JSON object: {e}", path.display())))?;
    let present = |flag: &str, args: &[OsString]| {
        args.iter().any(|a| {
            let s = a.to_string_lossy();
            s == flag || s.starts_with(&format!("{flag}="))
        })
    };
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || present(&flag, &args) {
            continue;
        }
        let scalar = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(usage(format!("config key `{key}` has an unsupported value"))),
        };
        match &value {
            Value::Bool(true) if key != "dilate" => args.push(flag.into()),
            Value::Bool(false) if key != "dilate" => {}
            Value::Array(items) => {
                args.push(flag.into());
                for v in items {
                    args.push(scalar(v)?.into());
                }
            }
            Value::Null => {}
            v => {
                args.push(flag.into());
                args.push(scalar(v)?.into());
            }
        }
    }
    Ok(args)
}

/// Parses `args` (including the program name), runs the command, and returns
/// the exit code.
pub fn run(args: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match config_path(&args) {
        Some(p) => match merge_config(args, &p) {
            Ok(a) => a,
            Err(f) => {
                let _ = writeln!(err, "error: {}", f.msg);
                return f.code;
            }
        },
        None => args,
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let r = match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Plan(a) => cmd_plan(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
    };
    match r {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> CmdResult {
    let (w, h) = (a.size[0], a.size[1]);
    let style = match a.style {
        StyleArg::RandomBlocks => ObstacleStyle::RandomBlocks,
        StyleArg::Maze => ObstacleStyle::Maze,
        StyleArg::Tiled => ObstacleStyle::Tiled,
    };
    let mut spec = DatasetSpec::new(style, h, w, (a.n_train, a.n_val, a.n_test), a.seed);
    spec.image_mode = a.image_mode;
    spec.validate().map_err(usage)?;
    if a.image_mode && style != ObstacleStyle::RandomBlocks {
        return Err(usage("image mode renders random-block maps only"));
    }
    if a.out.is_file() {
        return Err(usage(format!("{} is a file", a.out.display())));
    }
    let ds = generate(&spec).map_err(|e| Failure::new(EXIT_GENERATION, e.to_string()))?;
    write_dataset(&a.out, &ds).map_err(|e| Failure::new(EXIT_GENERATION, e.to_string()))?;
    let back = read_dataset(&a.out).map_err(|e| Failure::new(EXIT_GENERATION, format!("re-read failed: {e}")))?;
    if back != ds {
        return Err(Failure::new(EXIT_GENERATION, "dataset changed on re-read"));
    }
    let count = |s: Split| (ds.records.iter().filter(|r| r.split == s).count(), ds.split(s).count());
    let _ = writeln!(out, "wrote {}", a.out.display());
    for s in [Split::Train, Split::Val, Split::Test] {
        let (m, i) = count(s);
        let _ = writeln!(out, "{:<5} maps {m:>5}  instances {i:>6}", s.as_str());
    }
    Ok(())
}

fn load_dataset(dir: &Path) -> Result<Dataset, Failure> {
    if !dir.is_dir() {
        return Err(usage(format!("{} is not a dataset directory", dir.display())));
    }
    read_dataset(dir).map_err(usage)
}

fn dataset_kind(ds: &Dataset) -> MapKind {
    if ds.spec.image_mode {
        MapKind::Image
    } else {
        MapKind::Binary
    }
}

fn mode_for(kind: MapKind) -> ExpansionMode {
    match kind {
        MapKind::Binary => ExpansionMode::BinaryMasked,
        MapKind::Image => ExpansionMode::ImageUnmasked,
    }
}

/// Sidecar JSON written next to a checkpoint.
fn sidecar(cfg: &TrainConfig, enc: &EncoderConfig, best_epoch: usize, best: f64, start_epoch: usize) -> Value {
    json!({
        "train_config": cfg,
        "encoder_config": enc,
        "optimizer": { "kind": "rmsprop", "decay": cfg.rms_decay, "eps": cfg.rms_eps, "momentum": 0.0 },
        "batch_loss": "mean of per-instance losses",
        "start_epoch": start_epoch,
        "best_epoch": best_epoch,
        "best_val_hmean": best,
    })
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> CmdResult {
    let ds = load_dataset(&a.data)?;
    let kind = dataset_kind(&ds);
    let enc = EncoderConfig {
        base_channels: a.base_channels,
        depth: a.depth,
        ..match kind {
            MapKind::Binary => EncoderConfig::binary(),
            MapKind::Image => EncoderConfig::image(),
        }
    };
    enc.validate().map_err(usage)?;
    let cfg = TrainConfig {
        batch_size: a.batch,
        epochs: a.epochs,
        learning_rate: a.lr,
        gt_dilate: a.dilate.unwrap_or(ds.spec.width >= nastar_core::train::DILATE_MIN_WIDTH),
        seed: a.seed,
        variant: a.variant.variant(),
        mode: mode_for(kind),
        ..TrainConfig::default()
    };
    cfg.validate().map_err(usage)?;
    let train: Vec<&DatasetEntry> = ds.split(Split::Train).collect();
    let val: Vec<&DatasetEntry> = ds.split(Split::Val).collect();
    if train.is_empty() || val.is_empty() {
        return Err(usage("training needs non-empty train and val splits"));
    }
    let fail = |ids: &[&DatasetEntry], e: nastar_core::Error| match &e {
        nastar_core::Error::Instance { index, source } => {
            Failure::new(EXIT_TRAINING, format!("instance id {}: {source}", ids[*index].id))
        }
        _ => Failure::new(EXIT_TRAINING, e.to_string()),
    };

    let mut trainer = match &a.resume {
        Some(path) => {
            let (header, weights) = read_weights(path).map_err(usage)?;
            if header.config != enc {
                return Err(Failure::new(
                    EXIT_MISMATCH,
                    format!("{} was trained with a different encoder config: {:?}", path.display(), header.config),
                ));
            }
            if header.variant.is_some_and(|v| v != cfg.variant) {
                return Err(Failure::new(EXIT_MISMATCH, "checkpoint was trained for the other search variant"));
            }
            let mut t = Trainer::new(weights, cfg).map_err(usage)?;
            t.epoch = header.epoch.unwrap_or(0);
            t
        }
        None => Trainer::from_config(enc, cfg).map_err(usage)?,
    };
    let start_epoch = trainer.epoch;
    let train_insts: Vec<ProblemInstance> = train.iter().map(|e| e.instance.clone()).collect();
    let val_set = ValidationSet::new(val.iter().map(|e| (e.map_id, e.instance.clone()))).map_err(|e| fail(&val, e))?;

    let last_path = with_suffix(&a.out, ".last");
    let log_path = with_suffix(&a.out, ".log.csv");
    let side_path = with_suffix(&a.out, ".json");
    let header = |epoch: usize, hmean: f64| WeightsHeader {
        variant: Some(cfg.variant),
        mode: Some(cfg.mode),
        epoch: Some(epoch),
        val_hmean: Some(hmean),
        ..WeightsHeader::new(enc)
    };
    let io = |e: crate::Error| Failure::new(EXIT_TRAINING, e.to_string());
    let mut log: Vec<EpochLog> = Vec::with_capacity(a.epochs);
    for _ in 0..a.epochs {
        let loss = trainer.train_epoch(&train_insts).map_err(|e| fail(&train, e))?;
        let v = val_set.score(&trainer.planner()).map_err(|e| fail(&val, e))?;
        let entry = trainer.record_validation(loss, v);
        let _ = writeln!(
            out,
            "epoch {:>4}  loss {:.5}  val opt {:6.2}  exp {:6.2}  hmean {:6.2}",
            entry.epoch, entry.mean_loss, entry.val_opt, entry.val_exp, entry.val_hmean
        );
        log.push(entry);
        let best = trainer.best.as_ref().expect("recorded");
        write_weights(&a.out, &header(best.epoch, best.val_hmean), &best.weights).map_err(io)?;
        write_weights(&last_path, &header(trainer.epoch, entry.val_hmean), &trainer.weights).map_err(io)?;
        write_atomic(&log_path, results::training_log_csv(&log).as_bytes()).map_err(io)?;
        let side = sidecar(&cfg, &enc, best.epoch, best.val_hmean, start_epoch);
        write_atomic(&side_path, serde_json::to_string_pretty(&side).expect("json").as_bytes()).map_err(io)?;
    }
    let Some(best) = trainer.best.as_ref() else {
        return Err(usage("--epochs must be at least 1"));
    };
    read_weights(&a.out).map_err(io)?;
    read_weights(&last_path).map_err(io)?;
    let _ = writeln!(out, "best val hmean {:.2} at epoch {}", best.val_hmean, best.epoch);
    Ok(())
}

enum Built {
    Classical(ClassicalPlanner),
    Neural(NeuralPlanner),
}

impl Built {
    fn planner(&self) -> &dyn Planner {
        match self {
            Built::Classical(p) => p,
            Built::Neural(p) => p,
        }
    }
}

fn build_planner(p: PlannerArg, w: f64, ckpt: Option<&Path>, kind: MapKind) -> Result<Built, Failure> {
    let classical = match p {
        PlannerArg::Astar => Some(ClassicalPlanner::Astar),
        PlannerArg::Wastar => {
            if !(0.0..=1.0).contains(&w) {
                return Err(usage("--w must lie in [0, 1]"));
            }
            Some(ClassicalPlanner::WeightedAstar(w))
        }
        PlannerArg::Bf => Some(ClassicalPlanner::BestFirst),
        PlannerArg::Dijkstra => Some(ClassicalPlanner::Dijkstra),
        PlannerArg::NeuralAstar | PlannerArg::NeuralBf => None,
    };
    if let Some(c) = classical {
        if kind == MapKind::Image {
            return Err(Failure::new(EXIT_MISMATCH, "classical planners need binary maps"));
        }
        return Ok(Built::Classical(c));
    }
    let variant = if p == PlannerArg::NeuralAstar { SearchVariant::NeuralAstar } else { SearchVariant::NeuralBF };
    let ckpt = ckpt.ok_or_else(|| usage("neural planners need --ckpt"))?;
    let (header, weights) = read_weights(ckpt).map_err(usage)?;
    check_checkpoint(&header, Some(variant), kind)?;
    Ok(Built::Neural(NeuralPlanner::new(weights, variant, mode_for(kind))))
}

fn check_checkpoint(header: &WeightsHeader, variant: Option<SearchVariant>, kind: MapKind) -> CmdResult {
    let want = match kind {
        MapKind::Binary => 2,
        MapKind::Image => 4,
    };
    if header.config.in_channels != want {
        return Err(Failure::new(
            EXIT_MISMATCH,
            format!("checkpoint expects {} input channels; {kind:?} maps give {want}", header.config.in_channels),
        ));
    }
    if let (Some(v), Some(h)) = (variant, header.variant) {
        if v != h {
            return Err(Failure::new(EXIT_MISMATCH, format!("checkpoint was trained for {h:?}, not {v:?}")));
        }
    }
    if header.mode.is_some_and(|m| m != mode_for(kind)) {
        return Err(Failure::new(EXIT_MISMATCH, "checkpoint was trained for a different expansion mode"));
    }
    Ok(())
}

fn planner_label(p: PlannerArg) -> &'static str {
    match p {
        PlannerArg::NeuralAstar => "neural-astar",
        PlannerArg::NeuralBf => "neural-bf",
        PlannerArg::Astar => "astar",
        PlannerArg::Wastar => "wastar",
        PlannerArg::Bf => "bf",
        PlannerArg::Dijkstra => "dijkstra",
    }
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    if a.resamples == 0 {
        return Err(usage("--resamples must be positive"));
    }
    let ds = load_dataset(&a.data)?;
    let split = a.split.split();
    let built = build_planner(a.planner, a.w, a.ckpt.as_deref(), dataset_kind(&ds))?;
    let entries: Vec<&DatasetEntry> = ds.split(split).collect();
    if entries.is_empty() {
        return Err(usage(format!("split {} is empty", split.as_str())));
    }
    let cfg = EvalConfig { resamples: a.resamples, seed: a.seed };
    let eval: Evaluation =
        evaluate(built.planner(), entries.iter().map(|e| (e.map_id, &e.instance)), &cfg).map_err(|e| match &e {
            nastar_core::Error::Instance { index, source } => {
                Failure::new(EXIT_FAILURE, format!("instance id {}: {source}", entries[*index].id))
            }
            _ => Failure::new(EXIT_FAILURE, e.to_string()),
        })?;
    let label = planner_label(a.planner);
    let prefix = a.out.clone().unwrap_or_else(|| a.data.join(format!("results-{label}-{}", split.as_str())));
    let (json_path, csv_path) = results::write_results(&prefix, &eval, label, split.as_str())
        .map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    let reread = fs::read(&json_path).ok().and_then(|b| serde_json::from_slice::<Value>(&b).ok());
    if reread.is_none() || !csv_path.is_file() {
        return Err(Failure::new(EXIT_FAILURE, "results did not validate on re-read"));
    }
    let _ =
        writeln!(out, "{label} on {} ({} instances, {} maps)", split.as_str(), eval.instances.len(), eval.maps.len());
    let _ = write!(out, "{}", results::table(&eval));
    let _ = writeln!(out, "wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn cmd_plan(a: &PlanArgs, out: &mut dyn Write) -> CmdResult {
    let map = read_map(&a.map).map_err(usage)?;
    let kind = map.kind();
    let inst = ProblemInstance::new(map, a.start, a.goal).map_err(usage)?;
    let (name, guidance, result): (String, Option<ScalarField>, nastar_core::Result<SearchResult>) = match &a.ckpt {
        Some(ckpt) => {
            let (header, weights) = read_weights(ckpt).map_err(usage)?;
            check_checkpoint(&header, None, kind)?;
            let variant = header.variant.unwrap_or(SearchVariant::NeuralAstar);
            let p = NeuralPlanner::new(weights, variant, mode_for(kind));
            let phi = p.guidance(&inst).map_err(|e| Failure::new(EXIT_MISMATCH, e.to_string()))?;
            let r = p.search(&inst, &phi);
            (p.name(), Some(phi), r)
        }
        None if kind == MapKind::Image => {
            let unit = ScalarField::filled(inst.height(), inst.width(), 1.0);
            let cfg = DiffAstarConfig::for_map(
                inst.height(),
                inst.width(),
                ExpansionMode::ImageUnmasked,
                SearchVariant::NeuralAstar,
            );
            ("astar".into(), None, run_inference(&inst, &unit, &cfg))
        }
        None => {
            let built = build_planner(a.planner, a.w, None, kind)?;
            let p = built.planner();
            (p.name(), None, p.plan(&inst))
        }
    };
    let result = result.map_err(|e| match e.root() {
        nastar_core::Error::Unreachable => Failure::new(EXIT_UNREACHABLE, "goal is unreachable from the start"),
        _ => Failure::new(EXIT_FAILURE, e.to_string()),
    })?;
    let (h, w) = (inst.height(), inst.width());
    let fail = |e: crate::Error| Failure::new(EXIT_FAILURE, e.to_string());
    let path_json = json!({
        "planner": name,
        "start": [inst.start.row, inst.start.col],
        "goal": [inst.goal.row, inst.goal.col],
        "path": result.path.iter().map(|v| [v.row, v.col]).collect::<Vec<_>>(),
        "explored_count": result.explored_count,
    });
    let path_file = with_suffix(&a.out, ".path.json");
    write_atomic(&path_file, serde_json::to_string_pretty(&path_json).expect("json").as_bytes()).map_err(fail)?;
    let search_file = with_suffix(&a.out, ".search.ppm");
    write_atomic(&search_file, &encode_ppm(w, h, &render_search(&inst, &result))).map_err(fail)?;
    let mut written = vec![path_file, search_file];
    if let Some(phi) = &guidance {
        let g = with_suffix(&a.out, ".guidance.ppm");
        write_atomic(&g, &encode_ppm(w, h, &render_guidance(phi))).map_err(fail)?;
        written.push(g);
    }
    for f in &written {
        let ok = match f.extension().and_then(|e| e.to_str()) {
            Some("ppm") => read_map(f).is_ok(),
            _ => fs::read(f).ok().and_then(|b| serde_json::from_slice::<Value>(&b).ok()).is_some(),
        };
        if !ok {
            return Err(Failure::new(EXIT_FAILURE, format!("{} did not validate on re-read", f.display())));
        }
    }
    let _ = writeln!(out, "{name}: path of {} moves, {} nodes explored", result.path.len() - 1, result.explored_count);
    for f in &written {
        let _ = writeln!(out, "wrote {}", f.display());
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CmdResult {
    if a.repeat == 0 {
        return Err(usage("--repeat must be at least 1"));
    }
    let ds = load_dataset(&a.data)?;
    let built = build_planner(a.planner, a.w, a.ckpt.as_deref(), dataset_kind(&ds))?;
    let insts: Vec<&ProblemInstance> = ds.split(a.split.split()).map(|e| &e.instance).collect();
    if insts.is_empty() {
        return Err(usage("selected split is empty"));
    }
    let bp = match &built {
        Built::Classical(c) => BenchPlanner::Classical(*c),
        Built::Neural(n) => BenchPlanner::Neural(n),
    };
    let rows = bench::bench(&bp, &insts, a.repeat).map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    let _ = writeln!(out, "{}", bench::CSV_HEADER);
    for r in &rows {
        let _ = writeln!(out, "{}", bench::csv_row(r));
    }
    Ok(())
}
