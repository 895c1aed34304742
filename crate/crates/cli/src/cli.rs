use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use endoscale::fusion::FusionDomain;

use crate::commands;
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "endoscale", version, about = "Metric depth for endoscopic frames from the instrument shaft")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, env = "ENDOSCALE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Multiplies the configured intrinsics, e.g. 0.5 after halving images.
    #[arg(long, global = true)]
    pub intrinsics_scale: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Fuse low- and high-resolution relative depth.
    Fuse(FuseArgs),
    /// Recover metric depth from relative depth and a shaft mask.
    Recover(RecoverArgs),
    /// Score predicted depth against ground truth.
    Eval(EvalArgs),
    /// Monte-Carlo pose accuracy benchmark.
    PoseBench(PoseBenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long)]
    pub low: PathBuf,
    #[arg(long)]
    pub high: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum DomainArg {
    Depth,
    InverseDepth,
}

impl From<DomainArg> for FusionDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Depth => FusionDomain::Depth,
            DomainArg::InverseDepth => FusionDomain::InverseDepth,
        }
    }
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Single frame: relative depth (PFM).
    #[arg(long, requires = "mask", conflicts_with = "input")]
    pub relative: Option<PathBuf>,
    /// Single frame: shaft mask (PGM).
    #[arg(long, requires = "relative")]
    pub mask: Option<PathBuf>,
    /// Directory of frames named by the configured suffixes.
    #[arg(long, required_unless_present = "relative")]
    pub input: Option<PathBuf>,
    /// Output depth file (single frame) or directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Record file; defaults to stdout for a single frame and
    /// `<out>/records.jsonl` for a directory.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Use boundaries and tips from a synth manifest instead of the masks.
    #[arg(long)]
    pub observations: Option<PathBuf>,
    /// Reuse the previous good frame's scale for rejected frames.
    #[arg(long)]
    pub fallback_scale: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Report directory; the table is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoseBenchArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Zero all noise levels.
    #[arg(long)]
    pub noise_free: bool,
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(f) = cli.intrinsics_scale {
        cfg.scale_intrinsics(f)?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => commands::synth::run(&cfg, a),
        Command::Fuse(a) => commands::fuse::run(&cfg, a),
        Command::Recover(a) => commands::recover::run(&cfg, a),
        Command::Eval(a) => commands::eval::run(&cfg, a),
        Command::PoseBench(a) => commands::pose_bench::run(&cfg, a),
    })
}
