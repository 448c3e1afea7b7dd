use std::path::PathBuf;
use std::process::ExitCode;

use bundlesim_cli::scenario::BUNDLED;
use bundlesim_cli::{run, CliError, RunKind, Scenario};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bundlesim", version, about = "Multi-photon bundle emission from a driven quantum Rabi system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled scenario (by name) or a scenario file.
    Run {
        scenario: String,
        /// Replace the scenario's run kind.
        #[arg(long, value_enum)]
        kind: Option<RunKind>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_traj: Option<usize>,
        #[arg(long)]
        cycles: Option<usize>,
        /// Dotted `key=value`, e.g. `pulses.width=2000`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the bundled scenarios.
    List,
    /// Validate a scenario and print it fully resolved.
    Check {
        scenario: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            for (name, text) in BUNDLED {
                let s = Scenario::from_toml(text)?;
                println!("{name:<14} {:<12} {}", s.run.kind.name(), s.description);
            }
            Ok(())
        }
        Command::Check { scenario, overrides } => {
            let s = Scenario::resolve(&scenario)?.with_overrides(&overrides)?;
            for w in s.warnings() {
                eprintln!("warning: {w}");
            }
            print!("{}", s.to_toml());
            Ok(())
        }
        Command::Run { scenario, kind, out_dir, seed, n_traj, cycles, mut overrides } => {
            // flags are recorded as ordinary overrides
            if let Some(k) = kind {
                overrides.push(format!("run.kind=\"{}\"", k.name()));
            }
            if let Some(v) = seed {
                overrides.push(format!("run.seed={v}"));
            }
            if let Some(v) = n_traj {
                overrides.push(format!("run.n_traj={v}"));
            }
            if let Some(v) = cycles {
                overrides.push(format!("run.cycles={v}"));
            }
            let s = Scenario::resolve(&scenario)?.with_overrides(&overrides)?;
            for w in s.warnings() {
                eprintln!("warning: {w}");
            }
            let out = run(&s, &overrides, &out_dir)?;
            for w in out.warnings.iter().skip(s.warnings().len()) {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&out.summary).unwrap_or_default());
            println!("wrote {} files to {}", out.files.len(), out.out_dir.display());
            Ok(())
        }
    }
}
