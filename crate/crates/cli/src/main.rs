mod args;
mod commands;
mod error;
mod manifest;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ComputeEs(args) => commands::run_compute_es(args),
        Command::Fit(args) => commands::run_fit(args),
        Command::Predict(args) => commands::run_predict(args),
        Command::Profile(args) => commands::run_profile(args),
        Command::FitScore(args) => commands::run_fit_score(args),
        Command::Diagnose(args) => commands::run_diagnose(args),
        Command::Sbc(args) => commands::run_sbc(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
