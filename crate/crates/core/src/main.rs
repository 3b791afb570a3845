use std::process::ExitCode;

use clap::Parser;
use deconflict::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
