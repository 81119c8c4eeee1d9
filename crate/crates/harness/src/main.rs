use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcp_harness::metrics::read_run;
use qcp_harness::{run_experiment, Comparison, ExperimentConfig, HarnessError, RunOptions};

#[derive(Parser)]
#[command(name = "qcp", version, about = "Run and compare cooperative planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm and seed of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write per-search trace tables.
        #[arg(long)]
        trace: bool,
        /// Render one greedy episode per run.
        #[arg(long)]
        render: bool,
    },
    /// Compare per-run metric tables.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            config,
            workers,
            trace,
            render,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| HarnessError::io(&config, e))?;
            let experiment = ExperimentConfig::parse(&text)?;
            let runs = run_experiment(&experiment, RunOptions { workers, trace, render })?;
            print!("{}", Comparison::from_runs(&runs).to_table());
            println!("results in {}", experiment.output.display());
        }
        Command::Compare { files } => {
            let runs = files.iter().map(|p| read_run(p)).collect::<Result<Vec<_>, _>>()?;
            print!("{}", Comparison::from_runs(&runs).to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
