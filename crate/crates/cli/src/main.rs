use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use multibeam_cli::{parse_scenario_with, runner, CliError, Overrides, Preset};

/// Run a multibeam array scenario and write its artifacts.
#[derive(Debug, Parser)]
#[command(name = "multibeam", version)]
struct Args {
    /// Scenario file (INI). Optional when --preset is given.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Output directory, overrides `output_dir` in the file.
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// RNG seed, overrides `seed` in the file.
    #[arg(short, long)]
    seed: Option<u64>,

    /// One of beampattern-28, lenslet-28, link-60, calibrate, sync-budget, channel-stats.
    #[arg(short, long)]
    preset: Option<Preset>,
}

fn execute(args: Args) -> Result<String, CliError> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        None if args.preset.is_some() => String::new(),
        None => return Err(CliError::Config("need --config or --preset".into())),
    };
    let overrides = Overrides {
        preset: args.preset,
        seed: args.seed,
        output_dir: args.output,
    };
    let scenario = parse_scenario_with(&text, &overrides)?;
    let manifest = runner::run(&scenario)?;
    Ok(runner::describe(&scenario, &manifest))
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
