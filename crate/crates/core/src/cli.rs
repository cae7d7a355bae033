//! Command-line front end: synth, train, eval, sweep, report, graph.
//!
//! Option values resolve as flag > config file > `GRAPHICA_SEED` (seed only) >
//! built-in default. Data goes to files under the output directory, progress
//! to stderr.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::conflict_sim::{class_distribution, new_topology, synth_dataset, ConflictLabel, Dataset, Topology, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::gap::{compute_alpha, evaluate, predict_many, stratified_kfold, train, Checkpoint, FocalConfig, TrainConfig};
use crate::gsc::{build_labeled_graph, ConflictGraph};
use crate::metrics::{default_gamma_grid, gamma_sweep, ConfusionMatrix, DatasetSpec, Prf, SweepConfig};
use crate::rca::build_report;

pub const SEED_ENV: &str = "GRAPHICA_SEED";

pub const TOPOLOGY_FILE: &str = "topology.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const RCA_FILE: &str = "rca.csv";

pub fn checkpoint_file(fold: usize) -> String {
    format!("fold{fold}.ckpt")
}

#[derive(Parser, Debug)]
#[command(name = "graphica", version, about = "Detect and trace conflicts between xApps")]
pub struct Cli {
    /// Suppress progress output on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    /// Flat `key = value` file; keys are the long flag names.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a topology and a labeled dataset.
    Synth(SynthArgs),
    /// Cross-validated training; writes one checkpoint per fold.
    Train(TrainArgs),
    /// Evaluate checkpoints on their held-out fold.
    Eval(EvalArgs),
    /// Focal-loss gamma sweep over several datasets.
    Sweep(SweepArgs),
    /// Root cause report for predicted conflicts.
    Report(ReportArgs),
    /// Print the conflict graph of one dataset row.
    Graph(GraphArgs),
}

#[derive(Args, Debug, Default)]
pub struct TopologyFlags {
    #[arg(long, value_name = "N")]
    pub apps: Option<String>,
    #[arg(long, value_name = "N")]
    pub params: Option<String>,
    #[arg(long, value_name = "N")]
    pub kpis: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    #[arg(long, value_name = "RATE")]
    pub lr: Option<String>,
    #[arg(long, value_name = "LAMBDA")]
    pub weight_decay: Option<String>,
    #[arg(long, value_name = "N")]
    pub batch: Option<String>,
    #[arg(long, value_name = "K")]
    pub folds: Option<String>,
    #[arg(long, value_name = "N")]
    pub epochs: Option<String>,
    #[arg(long, value_name = "N")]
    pub patience: Option<String>,
    #[arg(long, value_name = "DELTA")]
    pub delta: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct CommonFlags {
    #[arg(long, value_name = "SEED")]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct DataFiles {
    /// Dataset CSV (default `<out>/dataset.csv`).
    #[arg(short, long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,
    /// Topology JSON (default `<out>/topology.json`).
    #[arg(short, long, value_name = "FILE")]
    pub topology: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct SynthArgs {
    #[command(flatten)]
    pub topology: TopologyFlags,
    #[arg(long, value_name = "N")]
    pub rows: Option<String>,
    /// Fraction of conflict rows, split evenly over the three conflict types.
    #[arg(long, value_name = "FRACTION")]
    pub conflict: Option<String>,
    #[command(flatten)]
    pub common: CommonFlags,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub files: DataFiles,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Focusing parameter.
    #[arg(long, value_name = "GAMMA")]
    pub gamma: Option<String>,
    /// `auto` (inverse class frequency), `uniform`, or four comma-separated weights.
    #[arg(long, value_name = "ALPHA")]
    pub alpha: Option<String>,
    /// Store weights in a little-endian f64 sidecar next to each checkpoint.
    #[arg(long)]
    pub binary: bool,
    #[command(flatten)]
    pub common: CommonFlags,
}

#[derive(Args, Debug, Default)]
pub struct EvalArgs {
    #[command(flatten)]
    pub files: DataFiles,
    /// Checkpoint(s) to evaluate (default: every `fold*.ckpt` in the output directory).
    #[arg(short, long, value_name = "FILE")]
    pub model: Vec<PathBuf>,
    /// Evaluate on every row instead of the checkpoint's held-out fold.
    #[arg(long)]
    pub all_rows: bool,
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct SweepArgs {
    #[command(flatten)]
    pub topology: TopologyFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Comma-separated gamma values.
    #[arg(long, value_name = "LIST")]
    pub gamma_grid: Option<String>,
    /// Comma-separated conflict percentages and/or `balanced`.
    #[arg(long, value_name = "LIST")]
    pub datasets: Option<String>,
    #[arg(long, value_name = "N")]
    pub reps: Option<String>,
    /// Rows per imbalanced dataset.
    #[arg(long, value_name = "N")]
    pub rows: Option<String>,
    /// Rows of the balanced dataset.
    #[arg(long, value_name = "N")]
    pub balanced_rows: Option<String>,
    #[command(flatten)]
    pub common: CommonFlags,
}

#[derive(Args, Debug, Default)]
pub struct ReportArgs {
    #[command(flatten)]
    pub files: DataFiles,
    /// Checkpoint (default `<out>/fold0.ckpt`).
    #[arg(short, long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Report on every row instead of the checkpoint's held-out fold.
    #[arg(long)]
    pub all_rows: bool,
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct GraphArgs {
    #[command(flatten)]
    pub files: DataFiles,
    /// Zero-based row index.
    #[arg(long, default_value_t = 0)]
    pub row: usize,
    #[arg(short, long, value_name = "DIR")]
    pub out: Option<String>,
}

/// Class weights for the focal loss.
#[derive(Clone, Debug, PartialEq)]
pub enum AlphaSetting {
    InverseFrequency,
    Fixed([f64; NUM_CLASSES]),
}

/// Every option a command may read, after defaults, file and flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_apps: usize,
    pub n_params: usize,
    pub n_kpis: usize,
    pub rows: usize,
    pub conflict_fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub gamma: f64,
    pub alpha: AlphaSetting,
    pub binary: bool,
    pub reps: usize,
    pub gamma_grid: Vec<f64>,
    pub datasets: Vec<String>,
    pub balanced_rows: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_apps: 10,
            n_params: 13,
            n_kpis: 10,
            rows: 570,
            conflict_fraction: 0.10,
            seed: 0,
            out: PathBuf::from("out"),
            train: TrainConfig::default(),
            gamma: 2.0,
            alpha: AlphaSetting::InverseFrequency,
            binary: false,
            reps: 10,
            gamma_grid: default_gamma_grid(),
            datasets: ["40", "30", "20", "10", "balanced"].map(String::from).to_vec(),
            balanced_rows: 800,
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| usage(format!("--{key}: cannot parse `{value}`")))
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    let n: usize = parse_num(key, value)?;
    if n == 0 {
        return Err(usage(format!("--{key} must be at least 1")));
    }
    Ok(n)
}

fn parse_nonneg(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(usage(format!("--{key} must be a finite value >= 0, got {value}")));
    }
    Ok(v)
}

fn parse_list<T>(value: &str, mut item: impl FnMut(&str) -> Result<T>) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(&mut item).collect()
}

impl RunConfig {
    /// Sets one option from its textual value. Keys are long flag names;
    /// underscores are accepted in place of dashes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let k = key.as_str();
        let value = value.trim();
        match k {
            "apps" => self.n_apps = parse_count(k, value)?,
            "params" => self.n_params = parse_count(k, value)?,
            "kpis" => self.n_kpis = parse_count(k, value)?,
            "rows" => self.rows = parse_count(k, value)?,
            "balanced-rows" => self.balanced_rows = parse_count(k, value)?,
            "reps" => self.reps = parse_count(k, value)?,
            "batch" => self.train.batch_size = parse_count(k, value)?,
            "folds" => self.train.folds = parse_count(k, value)?,
            "epochs" => self.train.max_epochs = parse_count(k, value)?,
            "patience" => self.train.patience = parse_count(k, value)?,
            "lr" => self.train.learning_rate = parse_nonneg(k, value)?,
            "weight-decay" => self.train.weight_decay = parse_nonneg(k, value)?,
            "delta" => self.train.min_delta = parse_nonneg(k, value)?,
            "gamma" => self.gamma = parse_nonneg(k, value)?,
            "seed" => self.seed = parse_num(k, value)?,
            "out" => self.out = PathBuf::from(value),
            "binary" => self.binary = parse_num(k, value)?,
            "conflict" => {
                let f = parse_nonneg(k, value)?;
                if f > 1.0 {
                    return Err(usage(format!("--conflict must lie in [0, 1], got {value}")));
                }
                self.conflict_fraction = f;
            }
            "alpha" => {
                self.alpha = match value {
                    "auto" => AlphaSetting::InverseFrequency,
                    "uniform" => AlphaSetting::Fixed([1.0; NUM_CLASSES]),
                    _ => {
                        let w = parse_list(value, |s| parse_nonneg(k, s))?;
                        let w: [f64; NUM_CLASSES] = w
                            .try_into()
                            .map_err(|_| usage("--alpha needs `auto`, `uniform` or four weights"))?;
                        if w.iter().any(|&a| a <= 0.0) {
                            return Err(usage("--alpha weights must be positive"));
                        }
                        AlphaSetting::Fixed(w)
                    }
                }
            }
            "gamma-grid" => {
                self.gamma_grid = parse_list(value, |s| parse_nonneg(k, s))?;
                if self.gamma_grid.is_empty() {
                    return Err(usage("--gamma-grid is empty"));
                }
            }
            "datasets" => {
                self.datasets = parse_list(value, |s| {
                    if s == "balanced" {
                        return Ok(s.to_string());
                    }
                    let pct: u32 = parse_num(k, s)?;
                    if pct > 100 {
                        return Err(usage(format!("--datasets: {pct}% is not a percentage")));
                    }
                    Ok(pct.to_string())
                })?;
                if self.datasets.is_empty() {
                    return Err(usage("--datasets is empty"));
                }
            }
            _ => return Err(usage(format!("unknown option `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` config text. Blank lines and `#` comments are skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Defaults, then the seed environment variable, then the config file,
    /// then the given flags.
    pub fn resolve(config: Option<&Path>, flags: &[(&str, Option<&String>)]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.seed = seed.trim().parse().map_err(|_| usage(format!("{SEED_ENV}: cannot parse `{seed}`")))?;
        }
        if let Some(path) = config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_config_text(&text)?;
        }
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if cfg.train.patience >= cfg.train.max_epochs {
            cfg.train.patience = cfg.train.max_epochs.saturating_sub(1).max(1);
        }
        cfg.train.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

impl TopologyFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![("apps", self.apps.as_ref()), ("params", self.params.as_ref()), ("kpis", self.kpis.as_ref())]
    }
}

impl TrainFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![
            ("lr", self.lr.as_ref()),
            ("weight-decay", self.weight_decay.as_ref()),
            ("batch", self.batch.as_ref()),
            ("folds", self.folds.as_ref()),
            ("epochs", self.epochs.as_ref()),
            ("patience", self.patience.as_ref()),
            ("delta", self.delta.as_ref()),
        ]
    }
}

impl CommonFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<&String>)> {
        vec![("seed", self.seed.as_ref()), ("out", self.out.as_ref())]
    }
}

struct Log {
    quiet: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create_file(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn load_data(cfg: &RunConfig, files: &DataFiles) -> Result<Dataset> {
    let topo_path = files.topology.clone().unwrap_or_else(|| cfg.path(TOPOLOGY_FILE));
    let data_path = files.dataset.clone().unwrap_or_else(|| cfg.path(DATASET_FILE));
    let topology = Topology::read_json(&topo_path)?;
    Dataset::load_csv(&topology, &data_path)
}

fn fmt_prf(m: &Prf) -> String {
    format!("precision {:.4}  recall {:.4}  f1 {:.4}", m.precision, m.recall, m.f1)
}

fn fmt_distribution(counts: &[usize; NUM_CLASSES]) -> String {
    ConflictLabel::ALL
        .iter()
        .zip(counts)
        .map(|(l, c)| format!("{} {c}", l.name().to_lowercase()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Rows a checkpoint is evaluated on: its held-out fold, or all rows.
fn checkpoint_rows(ckpt: &Checkpoint, dataset: &Dataset, all_rows: bool) -> Result<Vec<usize>> {
    match (all_rows, ckpt.fold, ckpt.folds) {
        (false, Some(fold), Some(folds)) => {
            let mut split = stratified_kfold(&dataset.labels(), folds, ckpt.seed)?;
            if fold >= split.len() {
                return Err(Error::Compatibility(format!("checkpoint fold {fold} out of {folds}")));
            }
            Ok(split.swap_remove(fold))
        }
        _ => Ok((0..dataset.len()).collect()),
    }
}

fn fold_checkpoints(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(n) = name.strip_prefix("fold").and_then(|s| s.strip_suffix(".ckpt")) {
            if let Ok(i) = n.parse() {
                found.push((i, path));
            }
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(Error::io(dir.join("fold0.ckpt"), std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn cmd_synth(cfg: &RunConfig, log: &Log) -> Result<()> {
    let topology = new_topology(cfg.n_apps, cfg.n_params, cfg.n_kpis, cfg.seed)?;
    let dataset = synth_dataset(&topology, cfg.rows, cfg.conflict_fraction, cfg.seed)?;
    let topo_path = cfg.path(TOPOLOGY_FILE);
    let data_path = cfg.path(DATASET_FILE);
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    topology.write_json(&topo_path)?;
    dataset.save_csv(&data_path)?;
    log.info(format!("wrote {} and {}", topo_path.display(), data_path.display()));
    println!("{} rows: {}", dataset.len(), fmt_distribution(&class_distribution(&dataset)?));
    Ok(())
}

fn cmd_train(args: &TrainArgs, cfg: &RunConfig, log: &Log) -> Result<()> {
    let dataset = load_data(cfg, &args.files)?;
    let alpha = match cfg.alpha {
        AlphaSetting::InverseFrequency => compute_alpha(&dataset.labels())?,
        AlphaSetting::Fixed(a) => a,
    };
    let focal = FocalConfig::new(cfg.gamma, alpha)?;
    let train_cfg = TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    log.info(format!(
        "training {} folds on {} rows (gamma {}, up to {} epochs)",
        train_cfg.folds,
        dataset.len(),
        focal.gamma,
        train_cfg.max_epochs
    ));
    let outcome = train(&dataset, &train_cfg, &focal)?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    for m in &outcome.models {
        Checkpoint::new(&m.params, train_cfg.seed, &focal)
            .with_fold(m.fold, train_cfg.folds)
            .save(&cfg.path(&checkpoint_file(m.fold)), cfg.binary)?;
    }
    let history_path = cfg.path(HISTORY_FILE);
    write_with(&history_path, |w| outcome.history.write_csv(w))?;
    for s in &outcome.history.folds {
        println!(
            "fold {}: best epoch {}, stopped {}, train loss {:.4}, val loss {:.4}, {}",
            s.fold,
            s.best_epoch,
            s.stop_epoch,
            s.final_train_loss,
            s.best_val_loss,
            fmt_prf(&s.metrics)
        );
    }
    println!("mean: {}", fmt_prf(&outcome.history.mean_metrics()));
    log.info(format!("wrote {} checkpoints and {}", outcome.models.len(), history_path.display()));
    Ok(())
}

fn cmd_eval(args: &EvalArgs, cfg: &RunConfig, log: &Log) -> Result<()> {
    let dataset = load_data(cfg, &args.files)?;
    let models = if args.model.is_empty() { fold_checkpoints(&cfg.out)? } else { args.model.clone() };
    let mut total = ConfusionMatrix::default();
    let mut rows: Vec<(String, Prf)> = Vec::new();
    for path in &models {
        let ckpt = Checkpoint::load(path)?;
        let model = ckpt.model()?;
        let indices = checkpoint_rows(&ckpt, &dataset, args.all_rows)?;
        let (_, cm, metrics) = evaluate(&model, &dataset, &indices)?;
        total.add(&cm);
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        log.info(format!("{name}: {} rows, {}", indices.len(), fmt_prf(&metrics)));
        rows.push((name, metrics));
    }
    let mean = Prf::mean(rows.iter().map(|r| r.1));
    write_with(&cfg.path(METRICS_FILE), |w| {
        writeln!(w, "model,precision,recall,f1")?;
        for (name, m) in rows.iter().chain(std::iter::once(&("mean".to_string(), mean))) {
            writeln!(w, "{name},{:.4},{:.4},{:.4}", m.precision, m.recall, m.f1)?;
        }
        Ok(())
    })?;
    write_with(&cfg.path(CONFUSION_FILE), |w| total.write_csv(w))?;
    println!("{}", fmt_prf(&mean));
    Ok(())
}

fn cmd_sweep(_args: &SweepArgs, cfg: &RunConfig, log: &Log) -> Result<()> {
    let specs: Vec<DatasetSpec> = cfg
        .datasets
        .iter()
        .map(|d| match d.as_str() {
            "balanced" => DatasetSpec::balanced(cfg.balanced_rows),
            pct => DatasetSpec::conflict_percent(pct.parse().expect("validated percentage"), cfg.rows),
        })
        .collect();
    let sweep_cfg = SweepConfig {
        n_apps: cfg.n_apps,
        n_params: cfg.n_params,
        n_kpis: cfg.n_kpis,
        train: cfg.train.clone(),
        base_seed: cfg.seed,
    };
    log.info(format!(
        "sweeping {} datasets x {} gamma values, {} repetitions each",
        specs.len(),
        cfg.gamma_grid.len(),
        cfg.reps
    ));
    let result = gamma_sweep(&specs, &cfg.gamma_grid, cfg.reps, &sweep_cfg)?;
    let path = cfg.path(SWEEP_FILE);
    write_with(&path, |w| result.write_csv(w))?;
    let mut stdout = std::io::stdout().lock();
    result.write_csv(&mut stdout).map_err(|e| Error::io("<stdout>", e))?;
    log.info(format!("wrote {}", path.display()));
    Ok(())
}

fn cmd_report(args: &ReportArgs, cfg: &RunConfig, log: &Log) -> Result<()> {
    let dataset = load_data(cfg, &args.files)?;
    let model_path = args.model.clone().unwrap_or_else(|| cfg.path(&checkpoint_file(0)));
    let ckpt = Checkpoint::load(&model_path)?;
    let model = ckpt.model()?;
    let indices = checkpoint_rows(&ckpt, &dataset, args.all_rows)?;
    let graphs: Vec<ConflictGraph> = indices
        .iter()
        .map(|&i| build_labeled_graph(&dataset.topology, &dataset.rows[i]))
        .collect::<Result<_>>()?;
    let refs: Vec<&ConflictGraph> = graphs.iter().collect();
    let predicted = predict_many(&model, &refs, 128)?;
    let pairs: Vec<(ConflictLabel, &ConflictGraph)> = predicted.iter().map(|p| p.0).zip(refs).collect();
    let report = build_report(&pairs, &dataset.topology)?;
    let path = cfg.path(RCA_FILE);
    write_with(&path, |w| report.write_csv(w))?;
    print!("{}", report.to_table());
    log.info(format!("{} of {} rows flagged; wrote {}", report.rows.len(), indices.len(), path.display()));
    Ok(())
}

fn cmd_graph(args: &GraphArgs, cfg: &RunConfig) -> Result<()> {
    let dataset = load_data(cfg, &args.files)?;
    let row = dataset
        .rows
        .get(args.row)
        .ok_or_else(|| usage(format!("--row {} out of range ({} rows)", args.row, dataset.len())))?;
    let graph = build_labeled_graph(&dataset.topology, row)?;
    println!("# row {} label {} ({})", args.row, row.label, row.label.name());
    print!("{}", graph.to_edge_list());
    Ok(())
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let log = Log { quiet: cli.quiet };
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Synth(a) => {
            let mut flags = a.topology.pairs();
            flags.extend([("rows", a.rows.as_ref()), ("conflict", a.conflict.as_ref())]);
            flags.extend(a.common.pairs());
            cmd_synth(&RunConfig::resolve(config, &flags)?, &log)
        }
        Command::Train(a) => {
            let mut flags = a.train.pairs();
            flags.extend([("gamma", a.gamma.as_ref()), ("alpha", a.alpha.as_ref())]);
            flags.extend(a.common.pairs());
            let mut cfg = RunConfig::resolve(config, &flags)?;
            cfg.binary |= a.binary;
            cmd_train(a, &cfg, &log)
        }
        Command::Eval(a) => cmd_eval(a, &RunConfig::resolve(config, &[("out", a.out.as_ref())])?, &log),
        Command::Sweep(a) => {
            let mut flags = a.topology.pairs();
            flags.extend(a.train.pairs());
            flags.extend([
                ("gamma-grid", a.gamma_grid.as_ref()),
                ("datasets", a.datasets.as_ref()),
                ("reps", a.reps.as_ref()),
                ("rows", a.rows.as_ref()),
                ("balanced-rows", a.balanced_rows.as_ref()),
            ]);
            flags.extend(a.common.pairs());
            cmd_sweep(a, &RunConfig::resolve(config, &flags)?, &log)
        }
        Command::Report(a) => cmd_report(a, &RunConfig::resolve(config, &[("out", a.out.as_ref())])?, &log),
        Command::Graph(a) => cmd_graph(a, &RunConfig::resolve(config, &[("out", a.out.as_ref())])?),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| usage(e.to_string().trim().to_string()))?;
    execute(&cli)
}
