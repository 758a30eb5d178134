//! `sebs`: run stagewise schedules and the reproduction experiments from a
//! TOML config, writing plot-ready CSVs and a JSON manifest.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "sebs", version, about = "Stagewise batch-size enlargement runs and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured multi-stage run.
    Run(Common),
    /// Optimal batch size against initial distance.
    Figure2(Common),
    /// Compare per-stage mean suboptimality with the theory's targets.
    Validate(Common),
    /// Decaying learning rate against growing batch under equal budgets.
    Equivalence(Common),
    /// Coupled runs on neighbouring datasets.
    Stability(Common),
    /// Print the computed schedule as a TOML fragment without running it.
    Schedule(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(sebs::Error),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<sebs::Error> for CliError {
    fn from(e: sebs::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Config("`--threads`: must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("`--threads`: {e}")))?;
    Ok(())
}

type Handler = fn(&mut output::Context) -> Result<(), CliError>;

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (name, common, command): (_, _, Handler) = match cli.command {
        Command::Run(c) => ("run", c, commands::run),
        Command::Figure2(c) => ("figure2", c, commands::figure2),
        Command::Validate(c) => ("validate", c, commands::validate),
        Command::Equivalence(c) => ("equivalence", c, commands::equivalence),
        Command::Stability(c) => ("stability", c, commands::stability),
        Command::Schedule(c) => ("schedule", c, commands::schedule),
    };
    set_threads(common.threads)?;
    let mut ctx = output::Context::load(name, &common.config, common.seed, common.out.as_deref())?;
    command(&mut ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEBS_LOG", "warn"))
        .format_timestamp(None)
        .init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
