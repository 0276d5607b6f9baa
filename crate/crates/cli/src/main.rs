use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use fedzmg_cli::commands;

/// Deterministic federated-learning simulator comparing a zero-mean
/// gradient-projection optimizer against plain averaging and a server-side
/// Adam baseline.
#[derive(Parser)]
#[command(name = "fedzmg", version, arg_required_else_help = true)]
struct Cli {
    /// Results directory (falls back to $FEDZMG_OUT_DIR, then ./results).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Threads used to run independent cells; output is identical for any
    /// value.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) cell of an experiment config.
    Run {
        /// Experiment TOML.
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep client/server learning rates and rank cells by the mean
    /// validation accuracy of their final rounds.
    GridSearch {
        /// Experiment TOML; its [grid] section shapes the sweep.
        #[arg(long)]
        config: PathBuf,
    },
    /// Turn a rounds CSV into comparison metrics and paired significance
    /// tests.
    Analyze {
        /// Rounds CSV produced by `run`.
        #[arg(long)]
        rounds: PathBuf,
        /// Accuracy threshold; repeat for several (default: 0.5 and 0.6).
        #[arg(long = "threshold")]
        thresholds: Vec<f64>,
        /// Moving-average window for threshold crossings.
        #[arg(long, default_value_t = 4)]
        window: usize,
    },
    /// Check the variance identity, the step-size decay bound, and the
    /// convergence-constant ordering numerically.
    VerifyTheory {
        /// Optional experiment TOML; its [theory] section overrides the
        /// built-in fixture.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print and save per-client label-skew statistics; optionally export
    /// the raw partitions or read back a previous export.
    DataReport {
        /// Experiment TOML whose [data] section describes the federation.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write per-client CSVs and a checksummed manifest here.
        #[arg(long)]
        export_dir: Option<PathBuf>,
        /// Read a previously exported federation instead of generating one.
        #[arg(long)]
        import_dir: Option<PathBuf>,
        /// Restrict the report to these client ids (comma separated).
        #[arg(long, value_delimiter = ',')]
        clients: Vec<usize>,
    },
}

fn resolve_out(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("FEDZMG_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Dying quietly when the reader goes away (`fedzmg analyze | head`) beats
/// a panic from a failed `println!`.
fn reset_sigpipe() {
    #[cfg(unix)]
    #[allow(unsafe_code)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

fn main() -> Result<()> {
    reset_sigpipe();
    let cli = Cli::parse();
    let out = resolve_out(cli.out);
    let workers = cli.workers;
    match cli.command {
        Command::Run { config } => {
            commands::run::run(&config, &out, workers)?;
        }
        Command::GridSearch { config } => {
            commands::grid::grid_search(&config, &out, workers)?;
        }
        Command::Analyze {
            rounds,
            thresholds,
            window,
        } => {
            let thresholds = if thresholds.is_empty() {
                vec![0.5, 0.6]
            } else {
                thresholds
            };
            commands::analyze::analyze(&rounds, &out, &thresholds, window)?;
        }
        Command::VerifyTheory { config } => {
            commands::theory::verify_theory(config.as_deref())?;
        }
        Command::DataReport {
            config,
            export_dir,
            import_dir,
            clients,
        } => {
            let filter = if clients.is_empty() {
                None
            } else {
                Some(clients.as_slice())
            };
            commands::data_report::data_report(
                config.as_deref(),
                &out,
                export_dir.as_deref(),
                import_dir.as_deref(),
                filter,
            )?;
        }
    }
    Ok(())
}
