mod args;
mod run;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use capdual::Error;
use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;

use crate::args::Cli;

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

/// Numerical failures exit with 2, everything traceable to the input with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SingularSystem(_)
        | Error::BranchFailure(_)
        | Error::MeshFailure { .. }
        | Error::LookupFailure(_)
        | Error::UnresolvedScale(_)
        | Error::Disconnected(_) => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    status: &'static str,
    kind: &'a str,
    message: String,
    exit_code: u8,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config: &'a Cli,
    input_hashes: BTreeMap<String, String>,
    artifacts: Vec<String>,
    wall_time_s: f64,
    threads: usize,
    versions: BTreeMap<&'static str, &'static str>,
    status: &'static str,
    converged: Option<bool>,
    exit_code: u8,
    error: Option<String>,
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("CAPDUAL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Precondition(format!("CAPDUAL_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            let message = e.render().to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            let rec = ErrorRecord { status: "error", kind: "Usage", message, exit_code: EXIT_INPUT };
            eprintln!("{}", serde_json::to_string(&rec).expect("error record serializes"));
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let start = Instant::now();
    let result = configure_threads().and_then(|_| run::run(&cli));
    let (code, outcome, error) = match result {
        Ok(o) => (if o.converged { EXIT_OK } else { EXIT_NUMERICAL }, Some(o), None),
        Err(e) => (exit_code(&e), None, Some(e)),
    };
    if let Some(e) = &error {
        let rec = ErrorRecord { status: "error", kind: e.kind(), message: e.to_string(), exit_code: code };
        eprintln!("{}", serde_json::to_string(&rec).expect("error record serializes"));
    }
    if !matches!(cli.command, args::Command::Report) && cli.common.out.is_dir() {
        let (artifacts, input_hashes, converged) = match outcome {
            Some(o) => (o.artifacts, o.input_hashes, Some(o.converged)),
            None => (Vec::new(), BTreeMap::new(), None),
        };
        let manifest = Manifest {
            command: cli.command.name(),
            config: &cli,
            input_hashes,
            artifacts,
            wall_time_s: start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            versions: BTreeMap::from([
                ("capdual", capdual::VERSION),
                ("capdual-cli", env!("CARGO_PKG_VERSION")),
            ]),
            status: if error.is_some() { "error" } else if code == EXIT_OK { "ok" } else { "not_converged" },
            converged,
            exit_code: code,
            error: error.as_ref().map(|e| e.to_string()),
        };
        let path = cli.common.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        if let Err(e) = std::fs::write(&path, text) {
            eprintln!("{}", serde_json::json!({"status": "warning", "message": format!("{}: {e}", path.display())}));
        }
    }
    ExitCode::from(code)
}
