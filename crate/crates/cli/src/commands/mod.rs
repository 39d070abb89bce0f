mod dataset;
mod replay;
mod solve;

use std::path::PathBuf;

use crate::args::Command;
use crate::error::CliResult;

pub use dataset::EVAL_HEADER;

/// Runs one command and returns the path of the manifest it wrote.
pub fn run(command: Command, argv: Vec<String>) -> CliResult<PathBuf> {
    match command {
        Command::Solve(a) => solve::run_solve(a, argv),
        Command::Bench(a) => solve::run_bench(a, argv),
        Command::Synth(a) => dataset::run_synth(a, argv),
        Command::PrecomputeTargets(a) => dataset::run_precompute(a, argv),
        Command::Train(a) => dataset::run_train(a, argv),
        Command::Eval(a) => dataset::run_eval(a, argv),
        Command::Replay(a) => replay::run_replay(a),
    }
}
