//! Command-line front end: argument parsing, configuration merging and the
//! five subcommands.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};

pub use config::{ModelKind, RunConfig, TransformStep};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "GWR_ROUTE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Contract(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Csv(PathBuf, csv::Error),
    #[error(transparent)]
    Core(#[from] gwr_route::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gwr-route",
    version,
    about = "GWR model family and route-map model selection"
)]
pub struct Cli {
    /// Log bandwidth searches and backfitting sweeps to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    /// Worker threads (default: $GWR_ROUTE_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write its report and surfaces.
    Fit(FitArgs),
    /// Run the route map and recommend a model.
    Routemap(RoutemapArgs),
    /// Residual autocorrelation, standardized residuals and collinearity.
    Diagnose(DiagnoseArgs),
    /// Draw a synthetic spatially varying coefficient dataset.
    Simulate(SimulateArgs),
    /// Trace the GWR bandwidth criterion curve.
    BwCurve(FitArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct DataArgs {
    /// JSON run configuration; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    /// Comma separated predictor columns.
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,
    /// Easting column.
    #[arg(long = "x")]
    pub x_column: Option<String>,
    /// Northing column.
    #[arg(long = "y")]
    pub y_column: Option<String>,
    #[arg(long = "id")]
    pub id_column: Option<String>,
    /// Elementwise transform, e.g. `STN=ln`; repeatable, applied in order.
    #[arg(long = "transform")]
    pub transforms: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write surfaces as GeoJSON points.
    #[arg(long)]
    pub geojson: bool,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ModelArgs {
    /// ols, sam, gwr, mxgwr or msgwr.
    #[arg(long)]
    pub model: Option<String>,
    /// gaussian, exponential, bisquare, tricube or boxcar.
    #[arg(long)]
    pub kernel: Option<String>,
    /// `fixed:<metres>` or `adaptive:<count>`.
    #[arg(long)]
    pub bw: Option<String>,
    /// Optimize the bandwidth by `aicc` or `cv`.
    #[arg(long = "bw-search")]
    pub bw_search: Option<String>,
    /// `fixed` or `adaptive`.
    #[arg(long = "bw-form")]
    pub bw_form: Option<String>,
    /// Global terms of a mixed model.
    #[arg(long, value_delimiter = ',')]
    pub global: Option<Vec<String>>,
    /// Local terms of a mixed model.
    #[arg(long, value_delimiter = ',')]
    pub local: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct WeightArgs {
    /// `knn:<k>`, `band:<metres>` or `idw:<power>`.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long = "row-standardize", num_args = 0..=1, default_missing_value = "true")]
    pub row_standardize: Option<bool>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RoutemapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Bandwidth ratio at or above which a term is global.
    #[arg(long = "global-threshold")]
    pub global_threshold: Option<f64>,
    /// Largest max/min ratio of similar local bandwidths.
    #[arg(long = "similarity-ratio")]
    pub similarity_ratio: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Moran permutation trials (0 disables the permutation test).
    #[arg(long)]
    pub permutations: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON simulation specification.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// True coefficients CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(flag: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

/// Starts from the config file (or defaults) and applies every flag given.
pub fn merge_config(
    data: &DataArgs,
    model: Option<&ModelArgs>,
    weights: Option<&WeightArgs>,
    threads: Option<usize>,
) -> Result<RunConfig, CliError> {
    let mut cfg = match &data.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &data.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &data.response {
        cfg.response = Some(v.clone());
    }
    if let Some(v) = &data.predictors {
        cfg.predictors = v
            .iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    if let Some(v) = &data.x_column {
        cfg.x_column = v.clone();
    }
    if let Some(v) = &data.y_column {
        cfg.y_column = v.clone();
    }
    if let Some(v) = &data.id_column {
        cfg.id_column = Some(v.clone());
    }
    if !data.transforms.is_empty() {
        cfg.transforms = data
            .transforms
            .iter()
            .map(|t| parse("transform", t))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = &data.out {
        cfg.out = v.clone();
    }
    if let Some(v) = data.seed {
        cfg.seed = v;
    }
    cfg.geojson |= data.geojson;
    if threads.is_some() {
        cfg.threads = threads;
    }
    if let Some(m) = model {
        if let Some(v) = &m.model {
            cfg.model = parse("model", v)?;
        }
        if let Some(v) = &m.kernel {
            cfg.kernel = parse("kernel", v)?;
            cfg.routemap.kernel = cfg.kernel;
        }
        if let Some(v) = &m.bw {
            parse::<gwr_route::Bandwidth<f64>>("bw", v)?;
            cfg.bandwidth = Some(v.clone());
        }
        if let Some(v) = &m.bw_search {
            cfg.bandwidth_search = Some(parse("bw-search", v)?);
        }
        if let Some(v) = &m.bw_form {
            cfg.bandwidth_form = parse("bw-form", v)?;
            cfg.routemap.form = cfg.bandwidth_form;
        }
        if let Some(v) = &m.global {
            cfg.global_terms = v.clone();
        }
        if let Some(v) = &m.local {
            cfg.local_terms = v.clone();
        }
    }
    if let Some(w) = weights {
        if let Some(v) = &w.weights {
            cfg.weights = parse("weights", v)?;
            cfg.routemap.weights = cfg.weights;
        }
        if let Some(v) = w.row_standardize {
            cfg.row_standardize = v;
            cfg.routemap.row_standardize = v;
        }
    }
    Ok(cfg)
}

fn init_logging(verbose: bool) {
    let level = if verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn thread_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    init_logging(cli.verbose);
    let threads = thread_count(cli.threads);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| commands::dispatch(&cli.command, cli.threads)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                let mut cmd = Cli::command();
                let name = match &cli.command {
                    Command::Fit(_) => "fit",
                    Command::Routemap(_) => "routemap",
                    Command::Diagnose(_) => "diagnose",
                    Command::Simulate(_) => "simulate",
                    Command::BwCurve(_) => "bw-curve",
                };
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    let mut sub = sub.clone().bin_name(format!("gwr-route {name}"));
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            e.exit_code()
        }
    }
}
