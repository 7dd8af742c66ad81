use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "entryexit", version, about = "Entry-exit predictions from balance functions")]
pub struct Cli {
    /// JSON configuration file; command-line values take precedence.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "entryexit-out")]
    pub out: PathBuf,

    /// Seed recorded with the configuration; reserved for randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a balance function and its first nontrivial zero.
    Balance(BalanceArgs),
    /// Run the balance computation over a range of one parameter.
    Sweep(SweepArgs),
    /// Compute gated balance functions from sampled trajectory files.
    Ingest(IngestArgs),
    /// Generate a synthetic sample file from a model flow.
    MakeFixture(FixtureArgs),
    /// List the built-in flows and their parameters.
    Flows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Eig,
    Fastslow,
    Ftle,
    Nile,
}

impl Method {
    /// Tag used by the serialized configuration.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Eig => "instant-eig",
            Method::Fastslow => "fast-slow",
            Method::Ftle => "ftle",
            Method::Nile => "nile",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FtleModeArg {
    Exact,
    Commuting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinearizationArg {
    Jacobian,
    Rotational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtrapolateArg {
    None,
    Linear,
    Quadratic,
}

/// Flow selection and parameter overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct FlowArgs {
    /// Flow id (see `entryexit flows`).
    #[arg(long)]
    pub flow: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Solid-body entry offset: the entry point is (-b, 0).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long = "alpha-s")]
    pub alpha_s: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// KM entry height on the free surface.
    #[arg(long = "z2-0")]
    pub z2_0: Option<f64>,
    /// Any flow parameter as NAME=VALUE; may be repeated.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub flow: FlowArgs,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Eigenvalue or singular-value index, zero-based, by descending size.
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long = "ftle-mode", value_enum)]
    pub ftle_mode: Option<FtleModeArg>,
    /// Matrix family for eig and ftle.
    #[arg(long, value_enum)]
    pub linearization: Option<LinearizationArg>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Entry point on the manifold, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z0: Option<Vec<f64>>,
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,
    #[arg(long = "ode-tol")]
    pub ode_tol: Option<f64>,
    #[arg(long = "zero-tol")]
    pub zero_tol: Option<f64>,
    #[arg(long = "deriv-tol")]
    pub deriv_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Parameter to vary.
    #[arg(long = "param")]
    pub sweep_param: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Sample files with columns t,z1,...,zd,vn[,ann].
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Flow supplying the manifold, default gate and model normal rates.
    #[command(flatten)]
    pub flow: FlowArgs,
    /// Gate coordinate index (zero-based).
    #[arg(long = "gate-coord")]
    pub gate_coord: Option<usize>,
    #[arg(long = "gate-lower", allow_hyphen_values = true)]
    pub gate_lower: Option<f64>,
    #[arg(long = "gate-upper", allow_hyphen_values = true)]
    pub gate_upper: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, value_enum)]
    pub extrapolate: Option<ExtrapolateArg>,
    /// Trailing samples used by the extrapolation fit.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[command(flatten)]
    pub flow: FlowArgs,
    /// Release offset from the manifold.
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Sampled time span.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Output file; defaults to fixture.csv in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
