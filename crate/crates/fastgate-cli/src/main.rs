use clap::{Parser, Subcommand};
use fastgate_cli::commands::{self, ensure_dir, Context};
use fastgate_cli::config::{ConfigError, RunConfig};
use fastgate_cli::{CliError, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

/// Fast impulsive entangling gates for trapped ions with RF micromotion.
#[derive(Debug, Parser)]
#[command(name = "fastgate", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `optimizer.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; `FASTGATE_THREADS` is used when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trap report: beta, mu, chi, modes, crystal and a mu map over (a, q).
    Characterize,
    /// Optimise a gate and write `schedule.toml`.
    Optimize {
        /// Also export oracle trajectories of the optimised gate.
        #[arg(long)]
        trajectory: bool,
    },
    /// Evaluate a schedule with the closed form, linear response and oracle.
    Evaluate {
        /// Schedule file; defaults to `<out>/schedule.toml`.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Robustness sweep from the `[sweep]` section.
    Sweep {
        /// Schedule file; a fresh optimisation is used when absent.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Integrate the equations of motion and export trajectories.
    Oracle {
        /// Schedule file; defaults to `<out>/schedule.toml`.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("FASTGATE_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| {
            ConfigError::Invalid {
                field: "FASTGATE_THREADS".into(),
                message: format!("expected a thread count, got {v:?}"),
            }
            .into()
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(ConfigError::Invalid {
                field: "--threads".into(),
                message: "must be positive".into(),
            }
            .into());
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = cli.config.ok_or_else(|| ConfigError::Invalid {
        field: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let mut config = RunConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.optimizer.seed = seed;
    }
    ensure_dir(&cli.out)?;
    let (schedule, trajectory) = match &cli.command {
        Command::Evaluate { schedule } | Command::Sweep { schedule } | Command::Oracle { schedule } => {
            (schedule.clone(), false)
        }
        Command::Optimize { trajectory } => (None, *trajectory),
        Command::Characterize => (None, false),
    };
    let ctx = Context {
        config,
        out: cli.out,
        schedule,
        trajectory,
    };
    match cli.command {
        Command::Characterize => commands::characterize(&ctx),
        Command::Optimize { .. } => commands::optimize(&ctx),
        Command::Evaluate { .. } => commands::evaluate(&ctx),
        Command::Sweep { .. } => commands::sweep(&ctx),
        Command::Oracle { .. } => commands::oracle(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
