//! `ctesn` — train, validate and deploy reservoir-computing surrogates of
//! stiff parametrized ODE models.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{cmd_cosim, cmd_optimize, cmd_report, cmd_simulate, cmd_train, CliError, Ctx};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "ctesn",
    version,
    about = "CTESN surrogates of stiff parametrized ODE models: training, \
             validation, optimization and co-simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config's out_dir).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker thread cap for parallel training solves.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Master seed override (replaces the seeds in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a built-in model and write the trajectory CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train a surrogate, validate it, and write artifact + report + plots.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run differential evolution on the full model and/or a surrogate.
    Optimize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Co-simulate coupled units; optionally swap one for a surrogate.
    Cosim {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pretty-print a surrogate artifact (and its sibling report.json).
    Report {
        /// Path to a surrogate artifact.
        artifact: PathBuf,
    },
}

fn make_ctx(
    cli: &Cli,
    config_path: &PathBuf,
    command: &'static str,
) -> Result<Ctx, CliError> {
    let config = RunConfig::from_path(config_path).map_err(CliError::Config)?;
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Ctx {
        config,
        command,
        out_dir,
        seed_override: cli.seed,
        quiet: cli.quiet,
        jobs: cli.jobs,
    })
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let run = |ctx: Ctx| -> Result<(), CliError> {
        let body = || match ctx.command {
            "simulate" => cmd_simulate(&ctx),
            "train" => cmd_train(&ctx),
            "optimize" => cmd_optimize(&ctx),
            "cosim" => cmd_cosim(&ctx),
            _ => unreachable!(),
        };
        match ctx.jobs {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("--jobs: {e}")))?
                .install(body),
            None => body(),
        }
    };
    match &cli.command {
        Command::Simulate { config } => run(make_ctx(cli, config, "simulate")?),
        Command::Train { config } => run(make_ctx(cli, config, "train")?),
        Command::Optimize { config } => run(make_ctx(cli, config, "optimize")?),
        Command::Cosim { config } => run(make_ctx(cli, config, "cosim")?),
        Command::Report { artifact } => cmd_report(artifact, cli.quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
