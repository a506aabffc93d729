mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn report(err: &CliError, json: bool) -> ExitCode {
    if json {
        let line = serde_json::json!({
            "error": err.message(),
            "kind": match err { CliError::Input(_) => "input", CliError::Internal(_) => "internal" },
            "exit_code": err.exit_code(),
        });
        eprintln!("{line}");
    } else {
        eprintln!("error: {}", err.message());
    }
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let json_hint = argv.iter().any(|a| a == "--json-errors");

    let argv = match config::expand_config(argv) {
        Ok(a) => a,
        Err(msg) => return report(&CliError::Input(msg), json_hint),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let json = json_hint || argv.iter().any(|a| a == "--json-errors");
            if json {
                let msg = e.kind().to_string() + ": " + e.to_string().lines().next().unwrap_or("");
                return report(&CliError::Input(msg), true);
            }
            let _ = e.print();
            return ExitCode::from(2);
        }
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            return report(&CliError::Internal(format!("thread pool: {e}")), cli.json_errors);
        }
    }

    let result = match &cli.command {
        Command::BenchIdeal(a) => commands::bench_ideal(a),
        Command::Synth(a) => commands::synth(a),
        Command::Encode(a) => commands::encode_cmd(a),
        Command::Decode(a) => commands::decode_cmd(a),
        Command::Metrics(a) => commands::metrics_cmd(a),
        Command::Convert(a) => commands::convert(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e, cli.json_errors),
    }
}
