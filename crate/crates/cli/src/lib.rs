//! Command-line front end: argument parsing, run configuration, dispatch to
//! the engines and deterministic CSV / JSON output.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

mod commands;
pub mod spec;
pub mod table;

pub use table::{Table, SCHEMA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_FIND: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Engine(String),
}

/// Everything that determines a run. Serialized into the JSON trace.
#[derive(Parser, Clone, Debug, Serialize)]
#[command(name = "cassels", version, about = "Witness searches and experiments for multiplicative approximation of grids")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Working precision in bits.
    #[arg(long, global = true, default_value_t = 256)]
    pub precision: u32,
    /// Enumeration cap on lattice points per box.
    #[arg(long = "cap-points", global = true, default_value_t = 200_000)]
    pub cap_points: usize,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// CSV destination; the trace goes next to it with extension `.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    /// Running minima of rate(|q|) |q| <qu - alpha> <qv - beta>.
    Scan(ScanArgs),
    /// Level certificates of the criterion on a grid.
    Certify(CertifyArgs),
    /// A grid vector in a product window, directly or through the guided pipeline.
    Witness(WitnessArgs),
    /// First hitting times of diagonal orbits near the compact point.
    Recurrence(RecurrenceArgs),
    /// Power products of two algebraic numbers (or unit characters) near targets.
    Baker(BakerArgs),
    /// Covering-radius estimates of stabilizer orbits on a fiber.
    Density(DensityArgs),
    /// Units of an order and stabilizers of rational fiber points.
    Units(UnitsArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct ScanArgs {
    pub u: String,
    pub v: String,
    pub alpha: String,
    pub beta: String,
    /// Largest |q|.
    pub q_max: u64,
    /// `one`, `logS`, `logS^D`, `powE` or `*`-products.
    #[arg(default_value = "log1")]
    pub rate: String,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct CertifyArgs {
    /// `cassels:u,v,alpha,beta`, `fiber:y1,..,yd` or `json:PATH`.
    pub grid: String,
    #[arg(long = "t-list", value_delimiter = ',', default_value = "2,4,8")]
    pub t_list: Vec<f64>,
    #[arg(long, default_value = "log1")]
    pub rate: String,
    #[arg(long = "a-mesh", default_value_t = 6)]
    pub a_mesh: usize,
    #[arg(long = "refine-bound", default_value_t = 64.0)]
    pub refine_bound: f64,
    /// Field polynomial for fiber grids, constant term first.
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct WitnessArgs {
    pub grid: String,
    #[arg(long, default_value = "3")]
    pub theta: String,
    #[arg(long, default_value = "0")]
    pub eps1: String,
    #[arg(long, default_value = "1/2")]
    pub eps2: String,
    /// Run the guided pipeline (fiber grids only).
    #[arg(long)]
    pub guided: bool,
    #[arg(long, default_value = "log1")]
    pub rate: String,
    #[arg(long = "t-max", default_value_t = 20.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct RecurrenceArgs {
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// Target size; ignored when `--beta` is given.
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    /// Target size `t_max^-beta`.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "t-max", default_value_t = 50.0)]
    pub t_max: f64,
    /// Whole neighbourhood instead of the annulus.
    #[arg(long)]
    pub ball: bool,
    /// Run an n x n horospherical grid around a random start instead.
    #[arg(long = "horo-grid")]
    pub horo_grid: Option<usize>,
    #[arg(long = "horo-spacing", default_value_t = 0.1)]
    pub horo_spacing: f64,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct BakerArgs {
    /// `L1 L2 T M [Q]`, or `T M` with `--character`. `T` may be a comma list.
    #[arg(num_args = 2..=5, required = true)]
    pub values: Vec<String>,
    /// Root character of the compact point's stabilizer, e.g. `a_12`.
    #[arg(long)]
    pub character: Option<String>,
    #[arg(long = "eta-cap", default_value_t = cassels::baker::DEFAULT_ETA_CAP)]
    pub eta_cap: f64,
    /// Constant C in the reported bound C q t / M.
    #[arg(long = "bound-constant", default_value_t = 4.0)]
    pub bound_constant: f64,
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct DensityArgs {
    /// Fiber point in lattice coordinates.
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<f64>,
    #[arg(long = "q-list", value_delimiter = ',', default_value = "100,1000,10000")]
    pub q_list: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub mesh: usize,
    /// Diophantine classification parameters.
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    #[arg(long = "q-max", default_value_t = 1000)]
    pub q_max: u64,
    #[arg(long, default_value_t = 4)]
    pub l: u64,
    #[arg(long)]
    pub field: Option<String>,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct UnitsArgs {
    #[arg(long)]
    pub field: Option<String>,
    /// Also list stabilizers of all q-rational fiber points.
    #[arg(long)]
    pub q: Option<u64>,
}

/// Result of a run before anything is written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub code: i32,
    pub csv: String,
    pub trace: Value,
    /// Text for stderr (usage or error messages, no-find reasons).
    pub message: Option<String>,
}

pub(crate) struct Report {
    pub table: Table,
    pub result: Value,
    pub found: bool,
    pub note: Option<String>,
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.precision < 64 {
            return Err(CliError::Usage("--precision must be at least 64".into()));
        }
        if self.cap_points == 0 {
            return Err(CliError::Usage("--cap-points must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        Ok(())
    }
}

fn failure(cfg: Option<&RunConfig>, e: CliError) -> Outcome {
    let code = match e {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Engine(_) => EXIT_ERROR,
    };
    Outcome {
        code,
        csv: String::new(),
        trace: json!({ "schema": SCHEMA, "config": cfg, "error": e.to_string() }),
        message: Some(e.to_string()),
    }
}

/// Run a parsed configuration on its own worker pool.
pub fn run(cfg: &RunConfig) -> Outcome {
    if let Err(e) = cfg.validate() {
        return failure(Some(cfg), e);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return failure(Some(cfg), CliError::Engine(e.to_string())),
    };
    match pool.install(|| commands::dispatch(cfg)) {
        Ok(rep) => Outcome {
            code: if rep.found { EXIT_OK } else { EXIT_NO_FIND },
            csv: rep.table.to_csv(),
            trace: json!({ "schema": SCHEMA, "config": cfg, "result": rep.result }),
            message: rep.note,
        },
        Err(e) => failure(Some(cfg), e),
    }
}

/// Parse command-line arguments (including the program name) and run.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            Outcome {
                code,
                csv: String::new(),
                trace: Value::Null,
                message: Some(e.render().to_string()),
            }
        }
    }
}

/// Write the outcome: CSV to `--out` (trace beside it) or to stdout.
pub fn emit(out: Option<&std::path::Path>, o: &Outcome) -> std::io::Result<()> {
    if let Some(m) = &o.message {
        if o.code == EXIT_OK && o.trace.is_null() {
            print!("{m}");
        } else {
            eprintln!("{}", m.trim_end());
        }
    }
    match out {
        Some(path) => {
            if !o.csv.is_empty() {
                std::fs::write(path, &o.csv)?;
            }
            if !o.trace.is_null() {
                let text = serde_json::to_string_pretty(&o.trace).expect("trace serializes");
                std::fs::write(path.with_extension("json"), text + "\n")?;
            }
        }
        None => print!("{}", o.csv),
    }
    Ok(())
}
