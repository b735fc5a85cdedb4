//! Command-line driver: sampling, distance matrices, grasp recovery,
//! round-trip evaluation, timing and loss evaluation over on-disk files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod bench;
mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use config::RunConfig;
pub use error::{exit, CliError, CliResult};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "DRO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dro", version, about = "Robot-object distance matrices and grasp recovery")]
pub struct Cli {
    /// Run seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; DRO_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample canonical robot link clouds and an object cloud.
    Sample(SceneArgs),
    /// Pose a robot cloud at `q` and write its distance matrix to the object cloud.
    ComputeDro(ComputeDroArgs),
    /// Recover a grasp configuration from a distance matrix.
    Recover(RecoverArgs),
    /// Ground truth → matrix → recovery on random configurations.
    Roundtrip(RoundtripArgs),
    /// Time the geometric recovery stages.
    Bench(BenchArgs),
    /// Evaluate training losses on stored arrays.
    Losses(LossesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Robot URDF.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory URDF mesh references resolve in.
    #[arg(long)]
    pub mesh_dir: Option<PathBuf>,
    /// Object OBJ mesh.
    #[arg(long)]
    pub object: Option<PathBuf>,
}

/// Where a joint configuration comes from.
#[derive(Debug, Clone, Args)]
pub struct ConfigSource {
    /// Comma-separated configuration values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// JSON-lines grasp file; the record at `--record` is used.
    #[arg(long, conflicts_with = "q")]
    pub grasp: Option<PathBuf>,
    /// Zero-based record index in `--grasp`.
    #[arg(long, default_value_t = 0, requires = "grasp")]
    pub record: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F64,
    F32,
}

#[derive(Debug, Clone, Args)]
pub struct ComputeDroArgs {
    /// Labeled canonical robot cloud written by `sample`.
    #[arg(long)]
    pub robot_cloud: PathBuf,
    #[arg(long)]
    pub object_cloud: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub q: ConfigSource,
    #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
    pub dtype: DtypeArg,
    /// Tile grid per matrix axis.
    #[arg(long, default_value_t = dro_core::pipeline::DEFAULT_BLOCKS)]
    pub blocks: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub dro: PathBuf,
    #[arg(long)]
    pub object_cloud: PathBuf,
    /// Labeled canonical robot cloud written by `sample`.
    #[arg(long)]
    pub robot_cloud: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Initial configuration (`--q` or `--grasp`).
    #[command(flatten)]
    pub q_init: ConfigSource,
    /// Also write the recovered, link-labeled robot cloud.
    #[arg(long)]
    pub emit_cloud: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RoundtripArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Largest acceptable mean link-origin error, meters.
    #[arg(long, default_value_t = 1e-3)]
    pub mean_tolerance: f64,
    /// Largest acceptable single link-origin error, meters.
    #[arg(long, default_value_t = 5e-3)]
    pub max_tolerance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
    pub runs: usize,
    #[arg(long, default_value_t = bench::DEFAULT_WARMUP)]
    pub warmup: usize,
}

#[derive(Debug, Clone, Args)]
pub struct LossesArgs {
    /// Predicted distance matrix (DROMX), paired with `--dro-true`.
    #[arg(long, requires = "dro_true")]
    pub dro_pred: Option<PathBuf>,
    #[arg(long, requires = "dro_pred")]
    pub dro_true: Option<PathBuf>,
    /// Feature matrix of configuration A (DROMX, one row per point).
    #[arg(long, requires_all = ["features_b", "feature_points"])]
    pub features_a: Option<PathBuf>,
    #[arg(long, requires = "features_a")]
    pub features_b: Option<PathBuf>,
    /// Point cloud (DROPC) the rows of `--features-b` belong to.
    #[arg(long, requires = "features_a")]
    pub feature_points: Option<PathBuf>,
    /// Normalize negative-pair weights per row instead of globally.
    #[arg(long)]
    pub per_row: bool,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    /// Predicted link poses (JSON `{link: {"R": [9], "x": [3]}}`).
    #[arg(long, requires = "poses_true")]
    pub poses_pred: Option<PathBuf>,
    #[arg(long, requires = "poses_pred")]
    pub poses_true: Option<PathBuf>,
    /// Robot cloud (DROPC) tested for penetration into `--mesh`.
    #[arg(long, requires = "mesh")]
    pub cloud: Option<PathBuf>,
    /// Watertight object mesh (OBJ).
    #[arg(long, requires = "cloud")]
    pub mesh: Option<PathBuf>,
}

/// What a finished command reports on stdout.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: serde_json::Value,
    /// Set when the run finished but missed a tolerance (exit status 4).
    pub tolerance_failure: Option<String>,
}

/// Thread count: `DRO_THREADS` if set, else `--threads`.
pub fn thread_count(flag: Option<usize>, env: Option<&str>) -> CliResult<Option<usize>> {
    match env {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::validation(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        None => match flag {
            Some(0) => Err(CliError::validation("--threads must be positive")),
            other => Ok(other),
        },
    }
}

/// Merges the config file with command-line overrides.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    let scene = match &cli.command {
        Command::Sample(s) => Some(s),
        Command::Roundtrip(r) => Some(&r.scene),
        Command::Bench(b) => Some(&b.scene),
        _ => None,
    };
    if let Some(s) = scene {
        cfg.model_path = s.model.clone().or(cfg.model_path);
        cfg.mesh_dir = s.mesh_dir.clone().or(cfg.mesh_dir);
        cfg.object_path = s.object.clone().or(cfg.object_path);
    }
    match &cli.command {
        Command::ComputeDro(a) => cfg.model_path = a.model.clone().or(cfg.model_path),
        Command::Recover(a) => cfg.model_path = a.model.clone().or(cfg.model_path),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let threads = thread_count(cli.threads, std::env::var(THREADS_ENV).ok().as_deref())?;
    if let Some(n) = threads {
        // Fails only if a pool already exists, e.g. when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = resolve_config(cli)?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::file(&cfg.output_dir, e.into()))?;
    match &cli.command {
        Command::Sample(_) => commands::sample(&cfg),
        Command::ComputeDro(a) => commands::compute_dro(&cfg, a),
        Command::Recover(a) => commands::recover(&cfg, a),
        Command::Roundtrip(a) => commands::roundtrip(&cfg, a),
        Command::Bench(a) => commands::bench(&cfg, a),
        Command::Losses(a) => commands::losses(&cfg, a),
    }
}
