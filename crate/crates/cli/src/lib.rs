//! `hmf`: the detection and allocation pipeline as subcommands over a TOML
//! run configuration.
//!
//! Exit codes: 0 on success, 1 for invalid configuration, arguments or
//! missing inputs, 2 for runtime and data errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod workspace;

pub use commands::{cmd_allocate, cmd_discover, cmd_eval, cmd_fixture, cmd_ingest, cmd_train};
pub use config::RunConfig;
pub use workspace::{Context, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Path(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Path(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    hmf_core::allocation::AllocationError,
    hmf_core::dataset::DatasetError,
    hmf_core::discovery::DiscoveryError,
    hmf_core::eval::EvalError,
    hmf_core::geodata::GeoError,
    hmf_core::model::ModelError,
    hmf_core::records::RecordError
);

#[derive(Debug, Parser)]
#[command(name = "hmf", version, about = "Hidden multi-family household discovery pipeline")]
pub struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Write a synthetic fixture under <out>/fixture.
    Fixture,
    /// Geocode records and write the dataset manifest.
    Ingest,
    /// Train the configured model families.
    Train,
    /// Compare trained models on the test split.
    Eval {
        /// Checkpoints to compare; defaults to every configured family.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
    },
    /// Rank officially single-family addresses of one zipcode.
    Discover {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        region: Option<String>,
    },
    /// Apportion canvassers over census tracts.
    Allocate {
        #[arg(long)]
        tracts: Option<PathBuf>,
        #[arg(long)]
        budget: Option<u64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fixture => "fixture",
            Command::Ingest => "ingest",
            Command::Train => "train",
            Command::Eval { .. } => "eval",
            Command::Discover { .. } => "discover",
            Command::Allocate { .. } => "allocate",
        }
    }
}

/// Loads and validates the configuration, applying the seed override.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut config = match path {
        Some(p) if !p.exists() => return Err(CliError::Path(format!("config not found: {}", p.display()))),
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

/// Runs one command under the output-directory lock and records it in the
/// run manifest.
pub fn execute(cli: &Cli) -> Result<Context, CliError> {
    let config = load_config(cli.config.as_deref(), cli.seed)?;
    let ctx = Context::new(config, &cli.out);
    let _lock = workspace::OutputLock::acquire(&ctx.out)?;
    let outcome = match &cli.command {
        Command::Fixture => cmd_fixture(&ctx)?,
        Command::Ingest => cmd_ingest(&ctx)?,
        Command::Train => cmd_train(&ctx)?,
        Command::Eval { checkpoints } => cmd_eval(&ctx, checkpoints)?,
        Command::Discover { checkpoint, region } => cmd_discover(&ctx, checkpoint.as_deref(), region.as_deref())?,
        Command::Allocate { tracts, budget } => cmd_allocate(&ctx, tracts.as_deref(), *budget)?,
    };
    workspace::record(&ctx, cli.command.name(), &outcome)?;
    log::info!("{} done; artifacts in {}", cli.command.name(), ctx.run_dir.display());
    Ok(ctx)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
