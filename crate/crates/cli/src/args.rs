use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Meta-analysis of twin-study heritability: effect-size computation,
/// Bayesian nonparametric model fitting, and posterior reporting.
#[derive(Debug, Parser)]
#[command(name = "h2meta", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert twin correlations into heritability effect sizes.
    ComputeEs(ComputeEsArgs),
    /// Fit the mixture model to a dataset and persist the chains.
    Fit(FitArgs),
    /// Evaluate a posterior predictive density from a persisted chain.
    Predict(PredictArgs),
    /// Predictive median/IQR profiles by informant and age.
    Profile(ProfileArgs),
    /// Predictive mean-square-error fit score of a chain on its dataset.
    FitScore(FitScoreArgs),
    /// Summaries and Monte Carlo error diagnostics for persisted chains.
    Diagnose(DiagnoseArgs),
    /// Simulation-based calibration of the sampler on a reduced model.
    Sbc(SbcArgs),
}

/// Output directory: the flag wins, then H2META_OUT, then `./h2meta-out`.
#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory for artifacts and the run manifest.
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
}

impl OutDir {
    pub fn resolve(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("H2META_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("h2meta-out"))
    }
}

#[derive(Debug, Args)]
pub struct ComputeEsArgs {
    /// CSV with columns study_id, informant, rho_mz, rho_dz, n_mz, n_dz.
    #[arg(long)]
    pub input: PathBuf,
    /// Pool estimates sharing a study_id by inverse-variance averaging.
    #[arg(long)]
    pub pool: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset CSV: study_id, h2, var, plus the 29 moderator columns.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<u32>,
    #[arg(long)]
    pub batch_count: Option<usize>,
    /// Adaptive-window tail mass tolerance.
    #[arg(long)]
    pub tail_mass_tol: Option<f64>,
    /// Fixed window `MIN:MAX` instead of adaptive truncation.
    #[arg(long)]
    pub fixed_window: Option<String>,
    /// Prior override `key=value`; repeatable (keys as in the prior file).
    #[arg(long = "prior")]
    pub prior: Vec<String>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Directory holding the persisted chain.
    #[arg(long)]
    pub chain: PathBuf,
    /// Chain file stem.
    #[arg(long, default_value = "chain_0")]
    pub stem: String,
    /// Moderator override `name=value` on the original scale; repeatable.
    /// Unset moderators sit at their standardized zero.
    #[arg(long = "x")]
    pub x: Vec<String>,
    /// Effect-size variance to condition on.
    #[arg(long, default_value_t = 1e-3)]
    pub var_condition: f64,
    /// Evaluation grid `MIN:MAX:POINTS`.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, default_value = "chain_0")]
    pub stem: String,
    /// Comma-separated ages on the original scale of the age moderator.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ages: Vec<f64>,
    /// Comma-separated informants; defaults to all five.
    #[arg(long, value_delimiter = ',')]
    pub informants: Vec<String>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct FitScoreArgs {
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, default_value = "chain_0")]
    pub stem: String,
    /// The dataset the chain was fitted to.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Directory holding one or more persisted chains (chain_*.csv).
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub batch_count: Option<usize>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct SbcArgs {
    #[arg(long, default_value_t = 200)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 3)]
    pub n_moderators: usize,
    #[arg(long, default_value_t = 5450)]
    pub iterations: u64,
    #[arg(long, default_value_t = 500)]
    pub burn_in: u64,
    #[arg(long, default_value_t = 50)]
    pub thin: u64,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Prior override `key=value`; repeatable. The default prior is the
    /// reduced calibration prior, not the fitting default.
    #[arg(long = "prior")]
    pub prior: Vec<String>,
    #[command(flatten)]
    pub out: OutDir,
}
