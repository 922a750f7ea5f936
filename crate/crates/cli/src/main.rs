//! `paraverify`: run, list and export verification scenarios.
//!
//! Exit codes: 0 when every gating check passes, 1 when some check fails,
//! 2 for configuration, scenario or evaluation errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use paraverify_core::{
    export_scenario, list_scenarios, resolve_scenario, run_scenario, ScenarioError,
};

#[derive(Parser)]
#[command(
    name = "paraverify",
    version,
    about = "Numerical verification of almost paracontact metric geometry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a builtin scenario or a scenario file.
    Run {
        /// Builtin name (see `list`) or path to a JSON scenario.
        scenario: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List builtin scenarios.
    List,
    /// Write a scenario as JSON.
    Export {
        scenario: String,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            let list = list_scenarios();
            let w = list.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
            for (name, desc) in list {
                println!("{name:<w$}  {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::Export { scenario, output } => {
            let sc = match resolve_scenario(&scenario) {
                Ok(sc) => sc,
                Err(e) => return fail(e),
            };
            let text = export_scenario(&sc);
            match output {
                Some(path) => match std::fs::write(&path, text) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(format!("cannot write {}: {e}", path.display())),
                },
                None => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
            }
        }
        Command::Run {
            scenario,
            samples,
            tol,
            seed,
            format,
        } => {
            let run = || -> Result<_, ScenarioError> {
                let sc = resolve_scenario(&scenario)?;
                let cfg = sc.config(samples, tol, seed);
                run_scenario(&sc, &cfg)
            };
            let report = match run() {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let text = match format {
                Format::Json => report.to_json() + "\n",
                Format::Text => report.to_text(),
            };
            let mut out = std::io::stdout().lock();
            if out
                .write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(2);
            }
            if report.has_errors() {
                eprintln!("error: some checks could not be evaluated");
                ExitCode::from(2)
            } else if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
