use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use erw_core::montecarlo::{default_checkpoints, dyadic_checkpoints};
use erw_core::MemoryConfig;

#[derive(Debug, Parser)]
#[command(name = "erw", version, about = "Elephant random walks on free products of Z and Z2")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo ensemble and write checkpoint statistics.
    Simulate(SimulateArgs),
    /// Exact law of the distance by exhaustive enumeration.
    Oracle(OracleArgs),
    /// Run the property and oracle checks over the parameter grid.
    Verify(VerifyArgs),
    /// Fit decay exponents and test the limit law on simulation output.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Elephant,
    Pos,
    Neg,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of Z factors.
    #[arg(long)]
    pub d1: usize,
    /// Number of Z2 factors.
    #[arg(long)]
    pub d2: usize,
    /// Memory parameter of the elephant walk.
    #[arg(long, conflicts_with = "ptilde")]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value = "elephant")]
    pub variant: Variant,
    /// Parameter of the positively or negatively reinforced walk.
    #[arg(long)]
    pub ptilde: Option<f64>,
}

impl ModelArgs {
    pub fn memory(&self) -> anyhow::Result<MemoryConfig> {
        let cfg = match (self.variant, self.p, self.ptilde) {
            (Variant::Elephant, Some(p), None) => MemoryConfig::elephant(p),
            (Variant::Elephant, None, _) => bail!("--variant elephant requires --p"),
            (Variant::Pos, None, Some(p_tilde)) => MemoryConfig::PositiveReinforced { p_tilde },
            (Variant::Neg, None, Some(p_tilde)) => MemoryConfig::NegativeReinforced { p_tilde },
            (Variant::Pos | Variant::Neg, _, None) => {
                bail!("--variant pos and --variant neg require --ptilde")
            }
            _ => bail!("--p and --ptilde cannot be combined"),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Horizon n.
    #[arg(long)]
    pub steps: u64,
    #[arg(long)]
    pub replicas: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated list, or `pow2:LO:HI` for 2^LO..2^HI.
    /// Defaults to a geometric grid ending at the horizon.
    #[arg(long)]
    pub checkpoints: Option<String>,
    /// Extra absolute-moment orders (1, 1.5 and 2 are always tracked).
    #[arg(long, value_delimiter = ',')]
    pub moments: Vec<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, env = "ERW_WORKERS")]
    pub workers: Option<usize>,
    /// Also write SVG histograms and the scatter plot.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,1.5,2")]
    pub moments: Vec<f64>,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also simulate this many replicas and report per-bin z-scores.
    #[arg(long, value_name = "REPLICAS")]
    pub compare_mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "ERW_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Reduced grid and sample sizes.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "ERW_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Directory written by `simulate`; repeat for a parameter sweep.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Smallest checkpoint used in the fits.
    #[arg(long, default_value_t = 1024)]
    pub burn_in: u64,
    /// Absolute-moment order to fit.
    #[arg(long, default_value_t = 1.0)]
    pub moment: f64,
    /// Output directory for analysis.json, scatter data and plots.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: bool,
}

/// Parses `--checkpoints`.
pub fn parse_checkpoints(spec: Option<&str>, horizon: u64) -> anyhow::Result<Vec<u64>> {
    let Some(spec) = spec else {
        return Ok(default_checkpoints(horizon));
    };
    if let Some(range) = spec.strip_prefix("pow2:") {
        let (lo, hi) = range
            .split_once(':')
            .context("expected pow2:LO:HI")?;
        let lo: u32 = lo.trim().parse().context("invalid LO in pow2:LO:HI")?;
        let hi: u32 = hi.trim().parse().context("invalid HI in pow2:LO:HI")?;
        if lo > hi || hi > 40 {
            bail!("pow2:LO:HI needs LO <= HI <= 40");
        }
        return Ok(dyadic_checkpoints(lo, hi));
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .with_context(|| format!("invalid checkpoint {s:?}"))
        })
        .collect()
}
