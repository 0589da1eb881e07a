//! `qib`: command-line front end for the bottleneck engines, the analytic
//! benchmarks and the experiment pipelines.
//!
//! Exit status is 0 on success, 1 for invalid input (malformed config,
//! invalid state or channel files, bad parameters) and 2 when the numerics
//! fail.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AdvantageArgs, Context, Format};
use config::LoadedConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "qib",
    version,
    about = "Quantum information bottleneck solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file, written atomically; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Base seed; overrides the config value.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads for concurrent runs.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Dump the c-q state used by the run as JSON.
    #[arg(long, global = true, value_name = "PATH")]
    emit_state: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Accelerated QIB iteration on a configured state.
    RunQib,
    /// Deterministic bottleneck iteration on a configured state.
    RunQdib,
    /// QIB runs over a list of acceleration parameters from one initial channel.
    GammaSweep,
    /// Converged QIB metrics over a list of beta values.
    BetaSweep,
    /// Analytic quantum-versus-classical gap on copy states.
    Advantage {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Kernel classification with quantum and classical bottleneck features.
    Classify,
    /// Approximate sufficient statistics of a noisy, permuted ensemble.
    Suffstats {
        /// Second CSV: I(T:Y) against the baseline and I(X:Y).
        #[arg(long, value_name = "PATH")]
        info_out: Option<PathBuf>,
    },
    /// Check state and channel files against their invariants.
    Validate {
        #[arg(long, value_name = "PATH")]
        state: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        channel: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let config = LoadedConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(config.file.seed).unwrap_or(0);
    let ctx = Context {
        config,
        seed,
        format: cli.format,
        out: cli.out,
        emit_state: cli.emit_state,
    };
    let dispatch = || match &cli.command {
        Command::RunQib => commands::run_qib_cmd(&ctx),
        Command::RunQdib => commands::run_qdib_cmd(&ctx),
        Command::GammaSweep => commands::gamma_sweep_cmd(&ctx),
        Command::BetaSweep => commands::beta_sweep_cmd(&ctx),
        Command::Advantage { d, n, alpha, beta } => commands::advantage_cmd(
            &ctx,
            AdvantageArgs {
                d: *d,
                n: *n,
                alpha: *alpha,
                beta: *beta,
            },
        ),
        Command::Classify => commands::classify_cmd(&ctx),
        Command::Suffstats { info_out } => commands::suffstats_cmd(&ctx, info_out.as_deref()),
        Command::Validate { state, channel } => {
            commands::validate_cmd(&ctx, state.as_deref(), channel.as_deref())
        }
    };
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(dispatch),
        None => dispatch(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's own usage-error status (2) is reserved for numerical failures
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
