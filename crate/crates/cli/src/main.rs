mod args;
mod commands;
mod error;
mod inputs;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Shap(selection) => commands::shap(&cli.global, selection),
        Command::Explain(args) => commands::explain(&cli.global, args),
        Command::Validate => commands::validate(&cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
