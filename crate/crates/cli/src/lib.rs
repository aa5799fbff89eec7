//! The `sdfields` command line: configuration ingestion, the analysis and
//! simulation subcommands, and deterministic report emission.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sdfields_core::Error;

use crate::config::{load, parse_error, DEFAULT_SEED};

/// Exit code of a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code of a run that failed with an error.
pub const EXIT_ERROR: i32 = 1;
/// Exit code of a check whose verdict is "fail".
pub const EXIT_VERDICT_FAIL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sdfields", version, about = "Selfdecomposable random fields driven by Lévy bases")]
pub struct Cli {
    /// Seed; overrides SDFIELDS_SEED and the seed of a replayed config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for replica-level parallelism; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Print the JSON report on stdout even when it is also written to a file.
    #[arg(long, global = true)]
    pub json: bool,

    /// Report path (JSON), or the CSV path for commands that emit paths.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Rerun the resolved config stored in a previous report.
    #[arg(long, value_name = "REPORT")]
    pub rerun: Option<String>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a Volterra field on a grid; CSV columns replica,u,value.
    Simulate(SimulateArgs),
    /// Musielak–Orlicz integrability of a kernel section.
    Orlicz(OrliczArgs),
    /// Dilation test of selfdecomposability, optionally through a kernel.
    SdCheck(SdCheckArgs),
    /// Stochastic Fubini condition and both sides of the identity.
    Fubini(FubiniArgs),
    /// Checks on the field-valued Lévy process of a Volterra field.
    FieldProcess(FieldProcessArgs),
    /// Cumulant `C{θ ‡ (X_{u_1}, …)}` by quadrature.
    Cumulant(CumulantArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub basis: String,
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub grid: String,
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
}

#[derive(Debug, Args)]
pub struct OrliczArgs {
    #[arg(long, visible_alias = "config")]
    pub basis: String,
    #[arg(long)]
    pub kernel: String,
    /// Index point of the kernel section `s ↦ f(u, s)`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub u: f64,
    #[arg(long, default_value_t = 1)]
    pub p: u8,
}

#[derive(Debug, Args)]
pub struct SdCheckArgs {
    #[arg(long)]
    pub basis: String,
    /// With a kernel the master measure is tested on cylinder sets.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Dilation factors, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Option<Vec<f64>>,
    /// `default`, or intervals `a:b` separated by commas.
    #[arg(long, default_value = "default", allow_hyphen_values = true)]
    pub intervals: String,
    /// Index points of the cylinder sets.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5,0.6")]
    pub u: Vec<f64>,
    /// Parameter point at which the seed is tested.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long)]
    pub urbanik_depth: Option<u32>,
}

#[derive(Debug, Args)]
pub struct FubiniArgs {
    #[arg(long)]
    pub basis: String,
    #[arg(long)]
    pub kernel: String,
    #[arg(long)]
    pub mu: String,
    /// JSON list of intervals `[[a, b], …]`.
    #[arg(long)]
    pub sets: String,
    /// Grid for the simulated sides; omitted means no simulation.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
    /// Simulate even when the condition is not shown to hold; the report is
    /// then marked unverified.
    #[arg(long = "override")]
    pub override_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldCheck {
    OuMarginal,
    Consistency,
    Simulate,
}

#[derive(Debug, Args)]
pub struct FieldProcessArgs {
    /// JSON object with `basis` and `kernel`.
    #[arg(long)]
    pub spec: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    pub u: Vec<f64>,
    /// Larger list of index points for the consistency check.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub t_grid: Vec<f64>,
    #[arg(long, value_enum, default_value = "ou-marginal")]
    pub check: FieldCheck,
    /// θ vectors separated by `;`, entries by `,`.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Grid for the simulation check; its index points are `--u`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
}

#[derive(Debug, Args)]
pub struct CumulantArgs {
    #[arg(long)]
    pub basis: String,
    #[arg(long)]
    pub kernel: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
}

/// Errors of a CLI run.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                Error::QuadratureDivergence(_) => "QuadratureDivergence",
                Error::QuadratureInconclusive(_) => "QuadratureInconclusive",
                Error::QuadratureBudget { .. } => "QuadratureBudget",
                Error::NonFinite(_) => "NonFinite",
                Error::IntegrabilityFailure(_) => "IntegrabilityFailure",
                Error::LogMomentFailure(_) => "LogMomentFailure",
                Error::NotL1(_) => "NotL1",
                Error::NotCentered(_) => "NotCentered",
                Error::JumpRateOverflow { .. } => "JumpRateOverflow",
                Error::SingularCellOverflow(_) => "SingularCellOverflow",
                Error::InvalidInput(_) => "InvalidInput",
                Error::ConfigParse(_) => "ConfigParse",
            },
            CliError::Io(_) => "Io",
        }
    }
}

/// Everything a run depends on; embedded in its report and accepted back
/// through `--rerun`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub command: commands::CommandConfig,
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var("SDFIELDS_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| parse_error(format!("SDFIELDS_SEED must be an unsigned 64-bit integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Resolves flags, files and environment into a run configuration. All
/// inputs are read and validated here, before any computation.
pub fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let (file_seed, command) = match (&cli.rerun, &cli.command) {
        (Some(_), Some(_)) => return Err(parse_error("--rerun cannot be combined with a subcommand")),
        (None, None) => return Err(parse_error("a subcommand or --rerun is required")),
        (Some(path), None) => {
            let v: serde_json::Value = load(path, "report")?;
            let v = v.get("config").cloned().unwrap_or(v);
            let rc: RunConfig = serde_json::from_value(v).map_err(|e| parse_error(format!("config in {path}: {e}")))?;
            (Some(rc.seed), rc.command)
        }
        (None, Some(c)) => (None, commands::CommandConfig::from_args(c)?),
    };
    command.validate()?;
    let seed = cli.seed.or(env_seed()?).or(file_seed).unwrap_or(DEFAULT_SEED);
    Ok(RunConfig { seed, command })
}

/// Runs the command line and returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
        }
    };
    let json = cli.json;
    match run_cli(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            if json {
                let v = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
                println!("{v}");
            }
            EXIT_ERROR
        }
    }
}

fn run_cli(cli: &Cli) -> Result<i32, CliError> {
    let config = resolve(cli)?;
    output::check_target(cli.out.as_deref())?;
    let outcome = match cli.threads {
        Some(0) => return Err(parse_error("--threads must be at least 1").into()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Io(e.to_string()))?;
            pool.install(|| commands::execute(&config))?
        }
        None => commands::execute(&config)?,
    };
    output::emit(&config, &outcome, cli.out.as_deref(), cli.json)?;
    Ok(if outcome.failed { EXIT_VERDICT_FAIL } else { EXIT_OK })
}
