use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use fracmfg_cli::acceptance;
use fracmfg_cli::run::{execute, execute_text, Execution, Options, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    FpSolve,
    HjbSolve,
    MfgSolve,
    MfgVariational,
    MfgProbeUniqueness,
    Acceptance,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::FpSolve => Self::FpSolve,
            Command::HjbSolve => Self::HjbSolve,
            Command::MfgSolve => Self::MfgSolve,
            Command::MfgVariational => Self::MfgVariational,
            Command::MfgProbeUniqueness => Self::MfgProbeUniqueness,
            Command::Acceptance => Self::Acceptance,
        }
    }
}

/// Stationary fractional mean field game solvers on the periodic torus.
///
/// Exit status: 0 ok, 1 i/o failure, 2 configuration error, 3 solver
/// non-convergence, 4 invariant violation.
#[derive(Debug, Parser)]
#[command(name = "fracmfg", version)]
struct Cli {
    command: Command,
    /// TOML configuration; repeat to run several configurations concurrently.
    #[arg(short, long = "config")]
    configs: Vec<PathBuf>,
    /// Reject unknown configuration keys instead of warning.
    #[arg(long)]
    strict: bool,
    /// Output directory (overrides output.directory; with several configs a
    /// numbered subdirectory is used per config).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn report(label: &str, e: &Execution) {
    if e.exit_code == 0 {
        eprintln!("{label}: {}", e.message);
    } else {
        eprintln!("{label}: error (exit {}): {}", e.exit_code, e.message);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sub = Subcommand::from(cli.command);
    let opts = Options {
        strict: cli.strict,
        output: cli.output.clone(),
        seed: cli.seed,
    };
    let results: Vec<(String, Execution)> = if cli.configs.is_empty() {
        if !matches!(sub, Subcommand::Acceptance) {
            eprintln!("{}: --config is required", sub.name());
            return ExitCode::from(2);
        }
        vec![("defaults".into(), execute_text("", sub, &opts, Instant::now()))]
    } else if cli.configs.len() == 1 {
        vec![(cli.configs[0].display().to_string(), execute(&cli.configs[0], sub, &opts))]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = cli
                .configs
                .iter()
                .enumerate()
                .map(|(i, path)| {
                    let mut opts = opts.clone();
                    opts.output = opts.output.map(|o| o.join(format!("run-{i}")));
                    scope.spawn(move || (path.display().to_string(), execute(path, sub, &opts)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
        })
    };
    for (label, e) in &results {
        if matches!(sub, Subcommand::Acceptance) {
            if let Some(report) = e.diagnostics.as_ref().and_then(|d| serde_json::from_value::<acceptance::Report>(d.clone()).ok()) {
                for line in report.lines() {
                    println!("{line}");
                }
            } else if let Some(dir) = &e.output_dir {
                print_acceptance_file(dir);
            }
        }
        report(label, e);
    }
    let code = results.iter().map(|(_, e)| e.exit_code).max().unwrap_or(0);
    ExitCode::from(code as u8)
}

fn print_acceptance_file(dir: &std::path::Path) {
    let Ok(text) = std::fs::read_to_string(dir.join("diagnostics.json")) else {
        return;
    };
    if let Ok(report) = serde_json::from_str::<acceptance::Report>(&text) {
        for line in report.lines() {
            println!("{line}");
        }
    }
}
