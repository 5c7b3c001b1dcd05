//! `pdt`: offline workflows and the session server.

mod args;
mod commands;
mod error;
mod output;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse_from(args::expand_overrides(std::env::args()));
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Update(a) => commands::update::run(a),
        Command::Optimize(a) => commands::optimize::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Study(a) => commands::study::run(a),
        Command::Report(a) => commands::report::run(a),
        Command::Serve(a) => commands::serve::run(a),
    };
    if let Err(e) = res {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
