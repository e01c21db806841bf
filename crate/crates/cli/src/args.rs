use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "distglm",
    version,
    about = "Distance-penalized GLM regression under set constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a GLM to CSV data.
    Fit(FitArgs),
    /// Fit a matrix-variate GLM under a rank constraint.
    FitMatrix(FitMatrixArgs),
    /// Write a simulated sparse GLM dataset as CSV files.
    Simulate(SimulateArgs),
    /// Choose a constraint level by K-fold cross-validation.
    Cv(CvArgs),
    /// Run a seeded benchmark suite and emit a per-seed metrics table.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct Common {
    /// Key-value configuration file (TOML); flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Response family: gaussian, poisson or bernoulli.
    #[arg(long)]
    pub family: Option<String>,
    /// Armijo sufficient-decrease constant.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Backtracking step multiplier.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub obj_tol: Option<f64>,
    /// Iteration budget per weight epoch.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Ridge coefficient omega.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub anneal_rho: Option<f64>,
    #[arg(long)]
    pub anneal_cap: Option<f64>,
    /// Quasi-Newton secants (0 disables acceleration).
    #[arg(long)]
    pub qn: Option<usize>,
    /// auto, always or never.
    #[arg(long)]
    pub woodbury: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Design matrix CSV, one case per row.
    #[arg(long)]
    pub x: PathBuf,
    /// Response CSV, one value per row.
    #[arg(long)]
    pub y: PathBuf,
    /// Both CSV files start with a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Constraint clause such as `sparsity:k=10:v=1`; repeatable.
    #[arg(long = "constraint")]
    pub constraints: Vec<String>,
    /// CSV of true coefficients; adds recovery metrics.
    #[arg(long)]
    pub beta_true: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitMatrixArgs {
    #[command(flatten)]
    pub common: Common,
    /// Rows are predictor matrices stacked column by column.
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long)]
    pub rank: usize,
    /// Initial penalty weight.
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    /// Standard deviation of design entries [default: sqrt(0.1)].
    #[arg(long)]
    pub design_sd: Option<f64>,
    /// Directory receiving X.csv, y.csv and beta.csv.
    #[arg(long)]
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Constraint clause with `{}` in place of the level, e.g. `sparsity:k={}:v=1`.
    #[arg(long)]
    pub template: String,
    /// Candidate levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// sparse-poisson, sparse-logistic, matrix-cross or isotonic.
    #[arg(long)]
    pub suite: String,
    /// Number of seeds, starting at --seed (default 0).
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Also write the per-seed table as CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
}
