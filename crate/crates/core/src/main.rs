use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use marl_lens::eval_stats::mean_and_ci;
use marl_lens::runner::{diagnose, evaluate_checkpoint, export, run_experiment, ExperimentConfig, ExportMetric};

#[derive(Parser)]
#[command(name = "marl-lens", version, about = "Train, evaluate and diagnose cooperative multi-agent learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Parent directory for the run, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summarise the diagnostics of a run.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
    },
    /// Emit plot data as CSV.
    Export {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        metric: ExportMetric,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            if let Some(o) = out {
                cfg.experiment.out_dir = o;
            }
            let dir = run_experiment(&cfg)?;
            println!("{}", dir.display());
        }
        Command::Eval { checkpoint, episodes, seed } => {
            let res = evaluate_checkpoint(&checkpoint, episodes, seed)?;
            let ci = mean_and_ci(&res.outcome.episode_returns, 0.95)?;
            println!("scenario: {}", res.meta.scenario);
            println!("episodes: {episodes}");
            println!("team return: {:.4} [{:.4}, {:.4}]", ci.mean, ci.lo, ci.hi);
            for (i, r) in res.outcome.agent_returns.iter().enumerate() {
                println!("agent {i} return: {r:.4}");
            }
        }
        Command::Diagnose { run } => print!("{}", diagnose(&run)?),
        Command::Export { runs, metric, out } => match out {
            Some(path) => {
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                export(&runs, metric, file)?;
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                export(&runs, metric, &mut lock)?;
                lock.flush()?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
