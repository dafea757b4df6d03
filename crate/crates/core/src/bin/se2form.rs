use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use se2form::sim;
use se2form::Error;

#[derive(Parser)]
#[command(
    name = "se2form",
    version,
    about = "Unicycle formation simulator on SE(2)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated subset of csv, svg, json.
        #[arg(long, default_value = "csv,svg,json")]
        format: String,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Enable the forward-motion guard.
        #[arg(long)]
        strict_forward: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the formation class of a scenario.
    Classify { scenario: PathBuf },
    /// Validate a scenario without running it.
    Check { scenario: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::RuntimeAbort { .. } | Error::DegenerateDirection { .. } => 3,
        Error::Io { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SE2FORM_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate {
            scenario,
            out,
            format,
            horizon,
            step,
            strict_forward,
            seed,
        } => {
            let formats = sim::parse_formats(&format)?;
            let mut cfg = sim::read_scenario_file(&scenario)?;
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if let Some(s) = step {
                cfg.step = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.guards.strict_forward |= strict_forward;
            let metrics_cfg = cfg.metrics;
            let scenario = cfg.validate()?;
            let log = sim::run(&scenario)?;
            let summary = sim::metrics(&log, &metrics_cfg);
            for path in sim::export(&log, &summary, &formats, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Classify { scenario } => {
            let s = sim::read_scenario_file(&scenario)?.validate()?;
            println!("{}", s.class);
            Ok(())
        }
        Command::Check { scenario } => {
            let s = sim::read_scenario_file(&scenario)?.validate()?;
            println!("ok: {} vehicles, {}", s.n_vehicles(), s.class);
            Ok(())
        }
    }
}
