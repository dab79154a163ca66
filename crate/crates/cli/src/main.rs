//! `deepagg` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 data errors (unreadable
//! or malformed inputs, degenerate descriptors, failed batch items).
//! `DEEPAGG_THREADS` caps the worker pool.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

const EXIT_VALIDATION: u8 = 2;
const EXIT_DATA: u8 = 3;

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("DEEPAGG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("DEEPAGG_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<deepagg_core::Error>()) {
        Some(e) if e.is_validation() => EXIT_VALIDATION,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let result = match &cli.command {
        Command::Aggregate(a) => commands::aggregate(a),
        Command::WhitenTrain(a) => commands::whiten_train(a),
        Command::Index(a) => commands::index(a),
        Command::Search(a) => commands::search(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::SweepAlpha(a) => commands::sweep_alpha(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Viz(c) => commands::viz(c),
        Command::GenSynthetic(a) => commands::gen_synthetic(a),
    };
    match result {
        Ok(out) => {
            let body = if cli.json {
                serde_json::to_string_pretty(&out.json).expect("json values always serialize") + "\n"
            } else {
                out.text
            };
            // a closed pipe on stdout is not an error of ours
            let _ = std::io::stdout().lock().write_all(body.as_bytes());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(deepagg_core::Error::Batch(items)) = err.downcast_ref::<deepagg_core::Error>() {
                for (id, e) in items {
                    eprintln!("  {id}: {e}");
                }
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
