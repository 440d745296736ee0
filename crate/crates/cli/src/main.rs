//! Command-line front end for seed selection, compositing, placement
//! sampling, object-level evaluation, ranking alignment, and fixture
//! synthesis.
//!
//! Exit codes: 0 on success (including --help and --version), 1 for usage
//! errors, 2 for data or validation errors. Failures in the 2 class print a
//! one-line JSON object {"error": {"kind", "message"}} on stderr so callers
//! can match on the kind without parsing prose.
//!
//! S2M_THREADS caps the worker pool. Every output is assembled in a fixed
//! order before it is written, so the thread count never changes output
//! bytes, only wall time.

mod commands;
mod error;
mod jsonio;
mod pngio;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "s2m", version, about = "Attention-consensus seed selection and object compositing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank archived seeds by leave-one-out attention consensus.
    SelectSeed(commands::select_seed::SelectSeedArgs),
    /// Composite a masked object onto a background under one transform.
    Composite(commands::composite::CompositeArgs),
    /// Draw placement candidates and render the accepted ones.
    SamplePlacements(commands::sample_placements::SamplePlacementsArgs),
    /// Score a rendered sequence against its masks and a target mask.
    EvalObj(commands::eval_obj::EvalObjArgs),
    /// Compare metric rankings against pairwise-judgment rankings.
    RankAlign(commands::rank_align::RankAlignArgs),
    /// Generate synthetic scenes, attention archives, or seed populations.
    Synth(commands::synth::SynthArgs),
}

fn configure_threads() -> Result<(), String> {
    let Some(raw) = std::env::var_os("S2M_THREADS") else {
        return Ok(());
    };
    let parsed = raw
        .to_str()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let Some(threads) = parsed else {
        return Err(format!(
            "S2M_THREADS must be a positive integer, got {:?}",
            raw.to_string_lossy()
        ));
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("failed to build thread pool: {e}"))
}

fn run() -> u8 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    if let Err(message) = configure_threads() {
        eprintln!("{message}");
        return 1;
    }
    let result = match &cli.command {
        Command::SelectSeed(args) => commands::select_seed::run(args),
        Command::Composite(args) => commands::composite::run(args),
        Command::SamplePlacements(args) => commands::sample_placements::run(args),
        Command::EvalObj(args) => commands::eval_obj::run(args),
        Command::RankAlign(args) => commands::rank_align::run(args),
        Command::Synth(args) => commands::synth::run(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run())
}
