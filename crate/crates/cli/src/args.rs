use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "transient-scan", version, about = "Detect transient mean shifts in sequential data")]
pub struct Cli {
    /// Print one JSON record instead of human-readable output
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the threshold giving a target false detection probability
    Calibrate(CalibrateArgs),
    /// False detection probability within L steps
    Fdp(FdpArgs),
    /// Detection probability of a signal lasting L steps
    Pod(PodArgs),
    /// Reproduce one of the reference POD/FDP tables
    Table(TableArgs),
    /// Run a chart over a price panel and report alarms
    Analyze(AnalyzeArgs),
    /// Write per-step statistics of a price panel run to a CSV file
    Charts(ChartsArgs),
    /// Re-run the configuration stored in a JSON record
    Replay(ReplayArgs),
}

/// Chart kind and parameters. Only the fields the kind needs are read.
#[derive(Debug, Clone, Args)]
pub struct ChartArgs {
    /// ewma, ma, moving_ewma, cusum, glrt, mewma, mma, mcusum, mglrt, mc1,
    /// mewma_soft, mewma_hard, mma_hard, mglrt_hard
    #[arg(long)]
    pub chart: String,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Window length (MA family)
    #[arg(long)]
    pub w: Option<usize>,
    /// Smallest window (GLR and windowed CUSUM)
    #[arg(long)]
    pub w0: Option<usize>,
    /// Largest window (GLR and windowed CUSUM)
    #[arg(long)]
    pub w1: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub h1: Option<f64>,
    /// Prior signal fraction of the soft-threshold weights
    #[arg(long)]
    pub p: Option<f64>,
    /// Hard-threshold cut on squared channel statistics
    #[arg(long, alias = "hard-cut")]
    pub cut: Option<f64>,
    /// Alarm level of the threshold variants
    #[arg(long)]
    pub level: Option<f64>,
    /// Number of channels (multivariate kinds)
    #[arg(long)]
    pub dim: Option<usize>,
    /// Cap on the MC1 look-back
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 20_000)]
    pub reps: u64,
    #[arg(long, env = "TRANSIENT_SCAN_SEED", default_value_t = 20_240_601)]
    pub seed: u64,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Fixed burn-in length instead of the per-kind default
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// CUSUM only: draw the start from its approximate stationary law
    #[arg(long)]
    pub fast_start: bool,
    /// How alarms raised during the burn-in are treated
    #[arg(long, value_enum, default_value_t = WarmUpChoice::Unconditional)]
    pub warm_up: WarmUpChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WarmUpChoice {
    /// Ignore burn-in alarms
    Unconditional,
    /// Restart the replication when the burn-in alarms
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EwmaArgChoice {
    Auto,
    Plain,
    Matched,
}

#[derive(Debug, Clone, Args)]
pub struct ConventionArgs {
    /// Use the accurate overshoot function instead of the exponential one
    #[arg(long)]
    pub accurate: bool,
    /// Argument of the overshoot function in EWMA-type formulas
    #[arg(long, value_enum, default_value_t = EwmaArgChoice::Auto)]
    pub ewma_arg: EwmaArgChoice,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub chart: ChartArgs,
    #[arg(long)]
    pub target_fdp: f64,
    #[arg(long = "L")]
    pub horizon: u64,
    /// Calibrate on simulated FDP
    #[arg(long)]
    pub mc: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub convention: ConventionArgs,
}

#[derive(Debug, Args)]
pub struct FdpArgs {
    #[command(flatten)]
    pub chart: ChartArgs,
    #[arg(long = "L")]
    pub horizon: u64,
    /// Closed-form approximation (default)
    #[arg(long, conflicts_with = "simulate")]
    pub approx: bool,
    /// Monte Carlo estimate from a stationary start
    #[arg(long)]
    pub simulate: bool,
    /// Apply the discreteness correction to the threshold first
    #[arg(long)]
    pub corrected: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub convention: ConventionArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pattern {
    /// The same mean in every channel
    All,
    /// The mean in the first channel only
    Single,
}

#[derive(Debug, Args)]
pub struct PodArgs {
    #[command(flatten)]
    pub chart: ChartArgs,
    #[arg(long = "L")]
    pub horizon: u64,
    /// Per-channel signal mean
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long, value_enum, default_value_t = Pattern::All)]
    pub pattern: Pattern,
    /// Full mean vector, comma separated; overrides --mu and --pattern
    #[arg(long, value_delimiter = ',')]
    pub mu_vec: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "simulate")]
    pub approx: bool,
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub convention: ConventionArgs,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// t1 .. t5
    #[arg(long)]
    pub id: String,
    #[arg(long, default_value_t = 50_000)]
    pub reps: u64,
    #[arg(long, env = "TRANSIENT_SCAN_SEED", default_value_t = 20_240_601)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the rows as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PanelArgs {
    /// Price file with header date,NAME1,...,NAMEN
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub chart: ChartArgs,
    /// Channels to keep, comma separated (default: all)
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Whiten with the estimated correlation matrix (multivariate default)
    #[arg(long, conflicts_with = "independent")]
    pub whiten: bool,
    /// Treat channels as independent; univariate charts run per channel
    #[arg(long)]
    pub independent: bool,
    /// Scale returns by a trailing window of this many returns
    #[arg(long)]
    pub trailing: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
}

#[derive(Debug, Args)]
pub struct ChartsArgs {
    #[command(flatten)]
    pub panel: PanelArgs,
    /// Output CSV path
    #[arg(long)]
    pub emit: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// JSON record written by --json
    #[arg(long)]
    pub record: PathBuf,
    /// Fail with exit code 3 if the result differs from the stored one
    #[arg(long)]
    pub check: bool,
}
