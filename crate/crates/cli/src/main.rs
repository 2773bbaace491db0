use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use reachdec::approx::ApproxScheme;
use reachdec_cli::{parse_scenario, run, Command, Format, RunOptions};

/// Decomposition-based reachability for linear time-invariant systems.
#[derive(Parser, Debug)]
#[command(name = "reachdec", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// `box` or `eps:<value>`; overrides the scenario.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<ApproxScheme>,
    /// Seed for sampled directions; overrides the scenario.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_scheme(s: &str) -> Result<ApproxScheme, String> {
    s.parse().map_err(|e: reachdec::approx::ApproxError| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        out: args.out,
        format: args.format,
        scheme: args.scheme,
        seed: args.seed,
    };
    let result = parse_scenario(&args.scenario)
        .and_then(|sc| run(args.command, &sc, &opts, &mut std::io::stdout().lock()));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
