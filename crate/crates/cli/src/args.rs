use std::path::PathBuf;

use addsel::{Criterion, FitConfig, Method, SolverOptions};
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "addsel",
    version,
    about = "Component selection in sparse additive models"
)]
pub struct Cli {
    /// Worker threads for replications and folds (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one method with criterion-tuned penalties.
    Fit(FitArgs),
    /// Trace the first-step group Lasso path and its criterion values.
    Path(PathArgs),
    /// Run the simulation designs and summarize selection accuracy.
    Simulate(SimulateArgs),
    /// Rank covariates by absolute marginal correlation with the response.
    Screen(ScreenArgs),
    /// Repeated k-fold cross-validated prediction error.
    Cv(CvArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    /// B-spline degree.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Number of interior knots.
    #[arg(long, default_value_t = 6)]
    pub knots: usize,
    /// EBIC weight on log p.
    #[arg(long, default_value_t = 0.5)]
    pub nu: f64,
    /// Points on each penalty grid.
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Smallest over largest penalty on the grid.
    #[arg(long, default_value_t = 1e-3)]
    pub grid_ratio: f64,
    /// Stop a path once this fraction of the response variation is explained (1 fits every point).
    #[arg(long, default_value_t = 0.999)]
    pub max_fit: f64,
}

impl TuneArgs {
    pub fn config(&self, criterion: Criterion) -> Result<FitConfig, CliError> {
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(CliError::Usage(format!(
                "--nu must lie in [0, 1], got {}",
                self.nu
            )));
        }
        if self.grid_size == 0 {
            return Err(CliError::Usage("--grid-size must be positive".into()));
        }
        if !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0) {
            return Err(CliError::Usage(format!(
                "--grid-ratio must lie in (0, 1), got {}",
                self.grid_ratio
            )));
        }
        if !(self.max_fit > 0.0 && self.max_fit <= 1.0) {
            return Err(CliError::Usage(format!(
                "--max-fit must lie in (0, 1], got {}",
                self.max_fit
            )));
        }
        let config = FitConfig {
            degree: self.degree,
            num_knots: self.knots,
            criterion,
            nu: self.nu,
            grid_count: self.grid_size,
            grid_ratio: self.grid_ratio,
            max_fit: self.max_fit,
            solver: SolverOptions::default(),
        };
        config.basis()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[arg(long, default_value = "bic")]
    pub criterion: Criterion,
    /// agl, gl, olasso or linear.
    #[arg(long, default_value = "agl")]
    pub method: Method,
    /// Keep only the k covariates most correlated with the response before fitting.
    #[arg(long)]
    pub screen_top_k: Option<usize>,
    /// Where to write the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Simulation design, 1 or 2.
    #[arg(long, default_value_t = 2)]
    pub example: u8,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    /// Correlation control; pairwise correlation is t^2 / (1 + t^2).
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    /// Noise standard deviation (default: the design's own value).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "agl,gl,olasso,linear")]
    pub methods: Vec<Method>,
    /// Comma-separated criteria; one table per criterion.
    #[arg(long, value_delimiter = ',', default_value = "bic")]
    pub criterion: Vec<Criterion>,
    #[command(flatten)]
    pub tune: TuneArgs,
    /// Also write one generated dataset (replication 0) to this CSV file.
    #[arg(long)]
    pub write_data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of covariates to keep (default: all, i.e. a full ranking).
    #[arg(long)]
    pub screen_top_k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[arg(long, default_value = "bic")]
    pub criterion: Criterion,
    #[arg(long, default_value = "agl")]
    pub method: Method,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Independent repetitions of the fold split.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
