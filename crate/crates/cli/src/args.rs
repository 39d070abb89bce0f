//! Command-line flags. Every subcommand's arguments are serializable so the
//! resolved configuration can be stored in a manifest and replayed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use graphvar_core::io::Features;
use graphvar_core::{Norm, ProblemParams, SolverConfig, SolverKind};
use graphvar_gnn::Objective;

#[derive(Debug, Parser)]
#[command(name = "graphvar", version, about = "Variational processing of point clouds on k-NN graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Denoise or simplify one point cloud with a variational solver.
    Solve(SolveArgs),
    /// Run several solvers on one cloud and write their objective traces.
    Bench(BenchArgs),
    /// Write a synthetic dataset `<out>/<shape>/<shape>_NNN.ply`.
    Synth(SynthArgs),
    /// Cache primal-dual outputs for every cloud of a dataset.
    PrecomputeTargets(TargetArgs),
    /// Train the graph network.
    Train(TrainArgs),
    /// Compare a trained network with the primal-dual and Adam solvers on the test class.
    Eval(EvalArgs),
    /// Re-run a command from its manifest and check the outputs are bit-identical.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Bench(_) => "bench",
            Command::Synth(_) => "synth",
            Command::PrecomputeTargets(_) => "precompute-targets",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureArg {
    Coords,
    Colors,
}

impl From<FeatureArg> for Features {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Coords => Features::Coords,
            FeatureArg::Colors => Features::Colors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Gj,
    Pd,
    Gd,
    Adam,
    Lbfgs,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Gj => SolverKind::Gj,
            SolverArg::Pd => SolverKind::Pd,
            SolverArg::Gd => SolverKind::Gd,
            SolverArg::Adam => SolverKind::Adam,
            SolverArg::Lbfgs => SolverKind::Lbfgs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Unsupervised,
    Distill,
}

impl From<ModeArg> for Objective {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Unsupervised => Objective::Unsupervised,
            ModeArg::Distill => Objective::Distill,
        }
    }
}

/// Non-negative integer that may be written in scientific notation (`2e4`).
pub fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x >= 0.0 && x.fract() == 0.0 && x <= 9_007_199_254_740_992.0 {
        Ok(x as usize)
    } else {
        Err(format!("'{s}' is not a non-negative integer"))
    }
}

pub fn parse_seed(s: &str) -> Result<u64, String> {
    parse_count(s).map(|n| n as u64)
}

fn parse_p(s: &str) -> Result<u8, String> {
    match parse_count(s)? {
        1 => Ok(1),
        2 => Ok(2),
        _ => Err("p must be 1 or 2".into()),
    }
}

/// How a single cloud becomes a graph problem.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct InstanceFlags {
    #[arg(long)]
    pub input: PathBuf,
    /// Which attribute is processed.
    #[arg(long, value_enum, default_value = "coords")]
    pub features: FeatureArg,
    #[arg(long, default_value = "2", value_parser = parse_p)]
    pub p: u8,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Regularization weight [default: 0.2 for coords, 0.05 for colors].
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Neighbors per point before symmetrization.
    #[arg(long, default_value = "4", value_parser = parse_count)]
    pub k: usize,
    /// Feature-proximity reweighting `w exp(-kappa |f0_i - f0_j|^2)`; 0 keeps binary weights.
    #[arg(long, default_value_t = 0.0)]
    pub kappa: f64,
    #[arg(long, default_value = "20000", value_parser = parse_count)]
    pub iters: usize,
    /// Objective logging period, in iterations.
    #[arg(long, default_value = "100", value_parser = parse_count)]
    pub trace_every: usize,
    /// Recorded in the manifest; all solvers are deterministic.
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: u64,
}

impl InstanceFlags {
    pub fn resolve(&mut self) {
        self.lambda.get_or_insert(match self.features {
            FeatureArg::Coords => 0.2,
            FeatureArg::Colors => 0.05,
        });
    }

    pub fn problem(&self) -> Result<ProblemParams, String> {
        let lambda = self.lambda.expect("resolved");
        ProblemParams::new(norm(self.p), self.q, lambda, self.epsilon).map_err(|e| e.to_string())
    }

    pub fn check(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("--k must be >= 1".into());
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err("--kappa must be finite and >= 0".into());
        }
        if self.trace_every == 0 {
            return Err("--trace-every must be >= 1".into());
        }
        Ok(())
    }

    /// Fixed step used by the gradient baselines when `--lr` is not given.
    pub fn default_lr(&self, solver: SolverArg) -> Option<f64> {
        match solver {
            SolverArg::Adam => Some(1e-3),
            SolverArg::Gd => Some(match self.features {
                FeatureArg::Coords => 1e-3,
                FeatureArg::Colors => 0.1,
            }),
            SolverArg::Lbfgs => Some(if self.q < 1.0 { 0.1 } else { 0.01 }),
            SolverArg::Gj | SolverArg::Pd => None,
        }
    }

    pub fn solver_config(&self, solver: SolverArg, lr: Option<f64>) -> Result<SolverConfig, String> {
        let mut config = SolverConfig::new(solver.into(), self.problem()?)
            .with_iters(self.iters)
            .with_trace_every(self.trace_every);
        if let Some(lr) = lr {
            config = config.with_learning_rate(lr);
        }
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

pub fn norm(p: u8) -> Norm {
    if p == 1 {
        Norm::L1
    } else {
        Norm::L2
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub instance: InstanceFlags,
    /// Processed cloud; format from the extension (.ply binary, .xyz text).
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "pd")]
    pub solver: SolverArg,
    /// Step for gd / adam / lbfgs [default: adam 1e-3; gd 1e-3 coords, 0.1 colors; lbfgs 0.01, 0.1 if q < 1].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Objective trace CSV `iter,J,J_eps,time_ms`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Manifest path [default: <output>.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct BenchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub instance: InstanceFlags,
    /// Comma-separated solver list.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gj,pd,gd,adam,lbfgs")]
    pub solvers: Vec<SolverArg>,
    /// One step for every gradient baseline, overriding the per-solver defaults.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Per-solver steps after resolution (not a flag).
    #[arg(skip)]
    pub resolved_lr: Vec<(SolverArg, f64)>,
    /// Directory for `<solver>.csv`, `bench.csv` and `manifest.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated shape classes (sphere, torus, cube, cylinder, saddle).
    #[arg(long, value_delimiter = ',', default_value = "sphere,torus,cube")]
    pub shapes: Vec<String>,
    /// Total number of clouds, spread round-robin over the shapes.
    #[arg(long, default_value = "50", value_parser = parse_count)]
    pub count: usize,
    #[arg(long, default_value = "300", value_parser = parse_count)]
    pub min_points: usize,
    #[arg(long, default_value = "800", value_parser = parse_count)]
    pub max_points: usize,
    #[arg(long, default_value_t = 0.02)]
    pub position_noise: f64,
    #[arg(long, default_value_t = 0.004)]
    pub color_noise: f64,
    #[arg(long, default_value_t = 0.2)]
    pub scale_jitter: f64,
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: u64,
}

/// How a dataset becomes training instances, and the problem they encode.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct DatasetFlags {
    /// Dataset root laid out as `<root>/<class>/<name>.{ply,xyz}`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "colors")]
    pub features: FeatureArg,
    #[arg(long, default_value = "4", value_parser = parse_count)]
    pub k: usize,
    #[arg(long, default_value_t = 1e4)]
    pub kappa: f64,
    #[arg(long, default_value = "2", value_parser = parse_p)]
    pub p: u8,
    #[arg(long, default_value_t = 0.05)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Primal-dual iterations for the reference outputs.
    #[arg(long, default_value = "20000", value_parser = parse_count)]
    pub pd_iters: usize,
}

impl DatasetFlags {
    pub fn check(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("--k must be >= 1".into());
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err("--kappa must be finite and >= 0".into());
        }
        self.pd_config()?;
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemParams, String> {
        ProblemParams::new(norm(self.p), 1.0, self.lambda, self.epsilon).map_err(|e| e.to_string())
    }

    pub fn pd_config(&self) -> Result<SolverConfig, String> {
        let config = SolverConfig::new(SolverKind::Pd, self.problem()?)
            .with_iters(self.pd_iters)
            .with_trace_every(self.pd_iters.max(1));
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn pipeline(&self) -> graphvar_gnn::PipelineConfig {
        graphvar_gnn::PipelineConfig {
            features: self.features.into(),
            k: self.k,
            kappa: self.kappa,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct TargetArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dataset: DatasetFlags,
    /// Target cache [default: $GRAPHVAR_CACHE_DIR, else <data>/.targets].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Manifest path [default: <cache>/precompute-<config hash>.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct SplitFlags {
    /// Class held out for testing [default: last class in sorted order].
    #[arg(long)]
    pub holdout: Option<String>,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Seeds the split, the initialization and the shuffling.
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dataset: DatasetFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub split: SplitFlags,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, default_value = "60", value_parser = parse_count)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Distillation targets [default: $GRAPHVAR_CACHE_DIR, else <data>/.targets].
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Checkpoint (JSON).
    #[arg(long)]
    pub output: PathBuf,
    /// Loss curves [default: <output>.curves.csv].
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Manifest path [default: <output>.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// The part of a training run that determines the model; stored in checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainSnapshot {
    #[serde(flatten)]
    pub dataset: DatasetFlags,
    #[serde(flatten)]
    pub split: SplitFlags,
    pub mode: ModeArg,
    pub epochs: usize,
    pub lr: f64,
}

impl TrainArgs {
    pub fn snapshot(&self) -> TrainSnapshot {
        TrainSnapshot {
            dataset: self.dataset.clone(),
            split: self.split.clone(),
            mode: self.mode,
            epochs: self.epochs,
            lr: self.lr,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct EvalArgs {
    /// Trained checkpoint; dataset, split and problem settings are read from it.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Per-instance table.
    #[arg(long)]
    pub output: PathBuf,
    /// Dataset root [default: the one recorded in the checkpoint].
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "20000", value_parser = parse_count)]
    pub adam_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub adam_lr: f64,
    /// Training configuration copied from the checkpoint (not a flag).
    #[arg(skip)]
    pub train: Option<TrainSnapshot>,
    /// Manifest path [default: <output>.manifest.json].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Keep the replayed outputs here instead of a temporary directory.
    #[arg(long)]
    pub keep: Option<PathBuf>,
}

pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cache_dir(explicit: &Option<PathBuf>, data: &Path) -> PathBuf {
    explicit
        .clone()
        .or_else(|| std::env::var_os(crate::CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| data.join(".targets"))
}
