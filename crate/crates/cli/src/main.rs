//! `gazedp` — generate rated gaze datasets, detect events, train and
//! evaluate perceived-privacy predictors, map privacy levels to DP
//! budgets, run personalized mechanisms, audit them, and benchmark the
//! whole chain.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;

use clap::Parser;

fn main() {
    // Clap handles usage errors itself (exit code 2).
    let cli = commands::Cli::parse();
    match commands::run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
