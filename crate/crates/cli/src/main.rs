//! `halfspace`: command-line front end to the `halfspace` library.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "halfspace", version, about = "Weighted half-space operator toolkit")]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "halfspace-out")]
    out: PathBuf,
    /// Seed for random data and map sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "HALFSPACE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kernel evaluation and normalisation.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Convergence study of the transform invariance identity.
    VerifyInvariance,
    /// Solve a truncated boundary-value problem.
    Solve,
    /// Extend boundary data by kernel quadrature.
    Extend,
    /// Fractional Laplacian as a weighted flux limit.
    Fraclap,
    /// Moving-sphere scan of an analytic family.
    MovingSphere,
    /// Uniqueness experiment: solve, fit, scan.
    Classify,
}

#[derive(Debug, Subcommand)]
enum KernelAction {
    /// Evaluate a kernel at a list of points.
    Eval,
    /// Quadrature boundary mass against its closed form.
    Norm,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(halfspace::Error),
}

impl From<halfspace::Error> for CliError {
    fn from(e: halfspace::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) => "validation",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Io(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, rec| {
            let line = serde_json::json!({
                "level": rec.level().as_str().to_lowercase(),
                "target": rec.target(),
                "message": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
}

fn run(cli: Cli) -> Result<commands::Outcome, CliError> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = commands::Ctx {
        config: cli.config.as_deref(),
        out: output::OutDir::create(&cli.out)?,
        seed: cli.seed,
    };
    match cli.command {
        Command::Kernel {
            action: KernelAction::Eval,
        } => commands::kernel_eval(&ctx),
        Command::Kernel {
            action: KernelAction::Norm,
        } => commands::kernel_norm(&ctx),
        Command::VerifyInvariance => commands::verify_invariance(&ctx),
        Command::Solve => commands::solve_cmd(&ctx),
        Command::Extend => commands::extend(&ctx),
        Command::Fraclap => commands::fraclap(&ctx),
        Command::MovingSphere => commands::moving_sphere(&ctx),
        Command::Classify => commands::classify(&ctx),
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            output::diagnostic("usage", e.to_string().trim());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(reason) => {
                    output::diagnostic("numerical", &reason);
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            output::diagnostic(e.kind(), &e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
