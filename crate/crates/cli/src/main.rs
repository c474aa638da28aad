use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcm_core::Method;

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(name = "mcm-sched", version, about = "Merged-pipeline scheduler for multi-chip-module NN accelerators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// Built-in network name or path to a network JSON file (comma-separated for compare)
    #[arg(long, global = true, value_delimiter = ',')]
    pub net: Vec<String>,
    /// Hardware JSON file; defaults apply to missing fields
    #[arg(long, global = true)]
    pub hw: Option<PathBuf>,
    /// Chiplet count(s); overrides the hardware file and picks the most-square mesh
    #[arg(long, global = true, value_delimiter = ',')]
    pub chiplets: Vec<usize>,
    /// Batch size m
    #[arg(long, global = true, default_value_t = 64)]
    pub samples: usize,
    /// scope, sequential, full_pipeline or segmented (comma-separated for compare/breakdown)
    #[arg(long, global = true, value_delimiter = ',')]
    pub method: Vec<Method>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Schedule one network and write schedule.json, report.json and layers.csv
    Schedule,
    /// Sweep networks x chiplet counts x methods into compare.csv and normalized.csv
    Compare,
    /// Compare the heuristic against exhaustive enumeration of one segment
    Validate {
        /// Layer range START:END (end exclusive); whole network by default
        #[arg(long)]
        layers: Option<String>,
    },
    /// Per-cluster load and energy breakdown for a set of methods
    Breakdown,
    /// Print the design-space size for a network (or --num-layers) and chiplet count
    Count {
        #[arg(long)]
        num_layers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Schedule => commands::schedule(&cli.opts),
        Command::Compare => commands::compare(&cli.opts),
        Command::Validate { layers } => commands::validate(&cli.opts, layers.as_deref()),
        Command::Breakdown => commands::breakdown(&cli.opts),
        Command::Count { num_layers } => commands::count(&cli.opts, num_layers),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
