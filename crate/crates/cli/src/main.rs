mod args;
mod commands;
mod failure;
mod table;

use clap::{CommandFactory, FromArgMatches};
use doublelasso::dml::DmlConfig;

use args::{Cli, Command};

fn version() -> String {
    format!(
        "{}\nestimator defaults: {}",
        env!("CARGO_PKG_VERSION"),
        DmlConfig::default().fingerprint()
    )
}

fn main() {
    let matches = Cli::command().version(version()).get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let result = match &cli.command {
        Command::Encode(a) => commands::cmd_encode(a),
        Command::Fit(a) => commands::cmd_fit(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
