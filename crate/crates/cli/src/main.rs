//! `trackqubo`: simulate events, reconstruct tracks with a QUBO solver,
//! evaluate them against truth and export plotting tables.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Process exit codes.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_VIOLATION: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "trackqubo", version, about = "QUBO track reconstruction for a four-layer pixel tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Sub-QUBO solver: exact, anneal or vqe.
    #[arg(long, global = true, value_name = "NAME")]
    pub solver: Option<String>,
    #[arg(long, global = true, value_name = "K")]
    pub subqubo_size: Option<usize>,
    /// Maximum sub-QUBO iterations.
    #[arg(long, global = true, value_name = "N")]
    pub iterations: Option<usize>,
    /// VQE shots per expectation value and for the final histogram.
    #[arg(long, global = true, value_name = "N")]
    pub shots: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate events and write hits, particles and metadata.
    Simulate {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        events: u64,
        /// Id of the first event, to keep ids unique across data sets.
        #[arg(long, value_name = "N", default_value_t = 0)]
        first_event: u64,
        /// Laser intensity scenario; sets the mean multiplicity and label.
        #[arg(long, value_name = "XI")]
        xi: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct tracks from a data set.
    Reconstruct {
        /// Directory holding hits.csv (and optionally metadata.json).
        #[arg(long, value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Write each event's QUBO to DIR/event_<id>.qubo.
        #[arg(long, value_name = "DIR")]
        dump_qubo: Option<PathBuf>,
        /// Write doublet and triplet features to FILE.
        #[arg(long, value_name = "FILE")]
        dump_features: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score tracks against truth.
    Evaluate {
        /// Truth data set; pair each with a --tracks file, in order.
        #[arg(long, value_name = "DIR", required = true)]
        truth: Vec<PathBuf>,
        #[arg(long, value_name = "FILE", required = true)]
        tracks: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Energy bin edges in GeV, comma separated.
        #[arg(long, value_name = "E0,E1,...", value_delimiter = ',')]
        edges: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Flatten reports (and VQE histograms) into one long-format CSV.
    Plotdata {
        #[arg(long, value_name = "FILE", required = true)]
        report: Vec<PathBuf>,
        /// `bitstring,count` files from `solve`.
        #[arg(long, value_name = "FILE")]
        counts: Vec<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Minimise a dumped QUBO; with the VQE solver also export the
    /// sampling histogram.
    Solve {
        #[arg(long, value_name = "FILE")]
        qubo: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            out,
            events,
            first_event,
            xi,
            common,
        } => commands::simulate(&common, &out, events, first_event, xi),
        Command::Reconstruct {
            input,
            out,
            dump_qubo,
            dump_features,
            common,
        } => commands::reconstruct(&common, &input, &out, dump_qubo.as_deref(), dump_features.as_deref()),
        Command::Evaluate {
            truth,
            tracks,
            out,
            edges,
            common,
        } => commands::evaluate(&common, &truth, &tracks, &out, edges),
        Command::Plotdata {
            report,
            counts,
            out,
            common: _,
        } => commands::plotdata(&report, &counts, &out),
        Command::Solve { qubo, out, common } => commands::solve(&common, &qubo, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", commands::describe(&e));
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
