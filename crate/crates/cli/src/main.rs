mod args;
mod clause;
mod error;
mod ingest;
mod run;

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use args::Cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = Instant::now();
    let outcome = run::run(&cli.command);
    let seconds = start.elapsed().as_secs_f64();

    let (doc, code) = match outcome {
        Ok(o) => (
            json!({
                "config": o.config,
                "result": o.result,
                "metrics": o.metrics,
                "timing": { "wall_seconds": seconds },
                "error": Value::Null,
            }),
            if o.converged { 0 } else { 2 },
        ),
        Err(e) => (
            json!({
                "config": Value::Null,
                "result": Value::Null,
                "metrics": Value::Null,
                "timing": { "wall_seconds": seconds },
                "error": e.to_string().replace('\n', " "),
            }),
            1,
        ),
    };

    let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    match &run::common(&cli.command).out {
        Some(path) => {
            if let Err(e) = fs::write(path, text + "\n") {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => println!("{text}"),
    }
    if let Some(msg) = doc["error"].as_str() {
        eprintln!("error: {msg}");
    }
    ExitCode::from(code)
}
