use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qwalk", version, about = "Exact walks driven by chaotic maps in a frozen random environment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Bernoulli environment file (QWENV1).
    Env(EnvArgs),
    /// Closed-form constants as exact fractions.
    Analytic(AnalyticArgs),
    /// Simulate an ensemble of trajectories.
    ///
    /// Files written next to PREFIX:
    ///   PREFIX.summary.json   scalars and matrices
    ///   PREFIX.hist.csv       tile,count (1d) or k1,k2,count (2d)
    ///   PREFIX.ecdf.csv       z,F (1d); z1,z2,ecdf,gaussian on the comparison grid (2d)
    ///   PREFIX.labels.csv     center,density0,density1 (1d)
    ///   PREFIX.samples.csv    z or z1,z2, with --retain-samples
    ///   PREFIX.trace.csv      step,tile,tile_over_step (1d det, count 1)
    ///   PREFIX.manifest.json  parameters, environment hash, timing
    #[command(verbatim_doc_comment)]
    Sim(SimArgs),
    /// Exact or high-precision distribution of the 1D tile chain.
    ///
    /// CSV columns: tile,probability (a fraction in exact mode, a decimal in float mode).
    /// Moments are printed as JSON on stdout.
    #[command(verbatim_doc_comment)]
    Dist(DistArgs),
    /// Compare a simulation summary against analytic constants.
    ///
    /// Exit status 0 iff every check passes, 1 otherwise, 2 on usage errors.
    #[command(verbatim_doc_comment)]
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::OneD => "1d",
            Model::TwoD => "2d",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Model::OneD => 1,
            Model::TwoD => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Det,
    Markov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistMode {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct EnvArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability of label 0, as a fraction or decimal.
    #[arg(long, default_value = "1/2")]
    pub p0: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Tiles per axis: N, or N,M in 2D.
    #[arg(long)]
    pub extent: String,
    #[arg(long)]
    pub out: PathBuf,
}

/// Map parameters shared by several subcommands. Defaults are the standard
/// examples: 2 and 3 in 1D, `2,1;1,1` and `3,1;2,1` in 2D.
#[derive(Debug, Args, Clone)]
pub struct MapArgs {
    /// Label-0 map: integer multiplier (1d) or matrix "a,b;c,d" (2d).
    #[arg(long = "A0")]
    pub a0: Option<String>,
    /// Label-1 map.
    #[arg(long = "A1")]
    pub a1: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[command(flatten)]
    pub maps: MapArgs,
    #[arg(long, default_value = "1/2")]
    pub p0: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to a file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long, value_enum, default_value_t = SimMode::Det)]
    pub mode: SimMode,
    #[command(flatten)]
    pub maps: MapArgs,
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub count: u64,
    /// Master seed of the per-trajectory random streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub retain_samples: bool,
    /// Record label transitions between steps T and T+1 (1d only).
    #[arg(long)]
    pub transition_step: Option<u64>,
    #[arg(long)]
    pub out_prefix: PathBuf,
    /// Worker threads; 0 uses all cores. Never changes the output.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub env: PathBuf,
    #[command(flatten)]
    pub maps: MapArgs,
    #[arg(long)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = DistMode::Exact)]
    pub mode: DistMode,
    /// Largest n accepted in exact mode.
    #[arg(long, default_value_t = 2000)]
    pub max_exact_n: u64,
    /// Significant bits in float mode; chosen from n when omitted.
    #[arg(long)]
    pub precision: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub analytic: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest accepted KS distance against the 1d Gaussian limit.
    #[arg(long, default_value_t = 0.012)]
    pub ks_tol: f64,
    /// Largest accepted grid CDF difference (2d).
    #[arg(long, default_value_t = 0.05)]
    pub grid_tol: f64,
    /// Absolute tolerance on the label-0 end mass.
    #[arg(long, default_value_t = 0.01)]
    pub mass_tol: f64,
    /// Relative tolerance on each drift component.
    #[arg(long, default_value_t = 0.02)]
    pub drift_tol: f64,
    /// Relative tolerance on the 1d variance.
    #[arg(long, default_value_t = 0.05)]
    pub var_tol: f64,
    #[arg(long, default_value_t = 0.05)]
    pub label_l1_tol: f64,
    #[arg(long, default_value_t = 0.02)]
    pub alpha_tol: f64,
}
