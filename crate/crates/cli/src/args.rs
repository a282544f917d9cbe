use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "doublelasso",
    about = "Debiased lasso inference for treatment effects"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a raw table into a design matrix plus a metadata sidecar.
    Encode(EncodeArgs),
    /// Estimate treatment effects and print a regression table.
    Fit(FitArgs),
    /// Run a Monte Carlo coverage study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Raw delimited table (comma or tab).
    #[arg(long)]
    pub data: PathBuf,
    /// Encoding spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Encoded matrix path; the sidecar goes to `<out>.meta.toml`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Logit,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Plugin,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned plain text.
    Text,
    /// Tab-delimited.
    Tsv,
    /// Structured, round-trippable.
    Toml,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Encoded matrix (with its `.meta.toml` sidecar), or a raw table when `--spec` is given.
    #[arg(long)]
    pub data: PathBuf,
    /// Encoding spec; encodes `--data` on the fly.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Outcome column; must match the dataset's outcome for encoded input.
    #[arg(long)]
    pub outcome: Option<String>,
    /// Comma-separated treatment selectors: a column name, a source variable,
    /// or a prefix ending in `*`. Defaults to every treatment-role column.
    #[arg(long, value_delimiter = ',')]
    pub treatments: Vec<String>,
    /// Comma-separated control selectors. Defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    pub controls: Vec<String>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Logit)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Plugin)]
    pub penalty: PenaltyArg,
    /// Significance level; intervals have coverage 1 - level.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Seeds cross-validation folds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stop at the first failing treatment (exit status 3).
    #[arg(long)]
    pub fail_fast: bool,
    /// Worker threads.
    #[arg(long, env = "DOUBLELASSO_JOBS")]
    pub jobs: Option<usize>,
    /// Decimals in text and tab-delimited tables.
    #[arg(long, default_value_t = 3)]
    pub precision: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Study spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    /// Replaces the study's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; replaces the study's setting.
    #[arg(long, env = "DOUBLELASSO_JOBS")]
    pub jobs: Option<usize>,
}
