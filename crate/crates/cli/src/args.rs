use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "truncvar",
    version,
    about = "Truncated variation of Brownian paths with drift"
)]
pub struct Cli {
    /// Worker threads for simulation (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Output file (a directory for `simulate`). Standard output if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate paths and write one CSV file per path.
    Simulate(SimulateArgs),
    /// Truncated variations of a path read from CSV.
    Compute(ComputeArgs),
    /// Evaluate a closed-form quantity.
    #[command(subcommand)]
    ClosedForm(ClosedForm),
    /// Run the bound checks over the default grid.
    Verify(VerifyArgs),
    /// Optimal trading schedule under a flat commission.
    Trade(TradeArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed.
    #[arg(long, env = "TRUNCVAR_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PathKind {
    /// `B_t + mu t`.
    Bm,
    /// `exp(mu t + sigma B_t)`.
    Gbm,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long, value_enum, default_value_t = PathKind::Bm)]
    pub kind: PathKind,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Tv,
    Utv,
    Dtv,
    All,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// Path CSV with header `time,value`.
    #[arg(long)]
    pub input: PathBuf,
    /// Truncation level.
    #[arg(long)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = KindArg::All)]
    pub kind: KindArg,
    /// Also report the realizing pairs (utv or dtv only).
    #[arg(long)]
    pub partition: bool,
}

#[derive(Debug, Args)]
pub struct DriftLevel {
    #[arg(long, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long)]
    pub c: f64,
}

#[derive(Debug, Subcommand)]
pub enum ClosedForm {
    /// Expected first drawdown time E T_c.
    ExpectedTc(DriftLevel),
    /// (E T_c)^2 / E T_c^2.
    MomentRatio(DriftLevel),
    /// Tail of the largest drawup before T_c, at y > c.
    HvTail {
        #[command(flatten)]
        base: DriftLevel,
        #[arg(long)]
        y: f64,
    },
    /// E sup_{[0,T_c]} (W_s - W_t - c)_+.
    HvMean(DriftLevel),
    /// P(largest drawup on [0,T] >= y) from the eigenfunction series.
    Gdbar {
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 10_000)]
        max_terms: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// E sup_{[0,T]} (W_s - W_t - c)_+ by integrating the series.
    DrawupExcess {
        #[command(flatten)]
        base: DriftLevel,
        #[arg(long = "T")]
        horizon: f64,
    },
    /// First roots θ_n of mu y sin θ + θ cos θ = 0.
    EigenTheta {
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 5)]
        n: usize,
    },
    /// Root η of mu y sinh η + η cosh η = 0 (exists for mu y < -1).
    EigenEta {
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long)]
        y: f64,
    },
    /// E exp(alpha sup_{[0,T]} W).
    SupMgf {
        #[arg(long)]
        alpha: f64,
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long = "T")]
        horizon: f64,
    },
    /// Upper bound on E exp(alpha TV^c[0,T]).
    ExpBound {
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        base: DriftLevel,
        #[arg(long = "T")]
        horizon: f64,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Grid steps per path.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Paths per check.
    #[arg(long, default_value_t = 2000)]
    pub paths: usize,
    /// Only claims whose id starts with this prefix.
    #[arg(long)]
    pub claim: Option<String>,
    /// Drifts of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = [-1.0, 0.0, 1.0], allow_negative_numbers = true)]
    pub mus: Vec<f64>,
    /// Truncation levels of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0])]
    pub cs: Vec<f64>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct TradeArgs {
    /// Price CSV with header `time,value`.
    #[arg(long)]
    pub input: PathBuf,
    /// Commission ratio in [0, 1).
    #[arg(long)]
    pub gamma: f64,
}
