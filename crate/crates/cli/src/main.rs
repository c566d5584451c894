use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use euler_lab_cli::config::{RawConfig, RunConfig};
use euler_lab_cli::verify::{self, Suite, VerifyOptions};
use euler_lab_cli::{commands, CliError};

#[derive(Parser)]
#[command(name = "euler-lab", version, about = "Pseudospectral Euler runs with regularity diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured initial condition and write the trace and reports.
    Run {
        config: Option<PathBuf>,
        /// Override one config key, e.g. `--set grid.n=32`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the built-in check suites.
    Verify {
        /// kernels, norms or all.
        suite: String,
        /// Grid size for the kernel checks.
        #[arg(long, default_value_t = 32)]
        n: usize,
    },
    /// Evaluate all diagnostics on a stored snapshot and print them as JSON.
    Diagnose {
        snapshot: PathBuf,
        /// File with `diag.*` keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-render the plots of a run directory from its trace.
    Report { dir: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    euler_lab_cli::init_threads()?;
    match cli.command {
        Command::Run { config, set } => {
            let cfg = RunConfig::load(config.as_deref(), &set)?;
            let out = commands::cmd_run(&cfg)?;
            println!("{} samples written to {}", out.trace.len(), out.out_dir.display());
            if let Some(t) = &out.trace.run.termination {
                return Err(CliError::Blowup(format!(
                    "{} at t = {} (last valid t = {})",
                    t.reason, t.t_detected, t.t_last_valid
                )));
            }
            Ok(())
        }
        Command::Verify { suite, n } => {
            let suite: Suite = suite.parse()?;
            let opts = VerifyOptions { kernel_n: n, ..VerifyOptions::default() };
            let report = verify::run_suite(suite, &opts)?;
            print!("{report}");
            if report.all_pass() {
                Ok(())
            } else {
                Err(CliError::CheckFailed(format!(
                    "{} of {} checks failed",
                    report.rows.iter().filter(|r| !r.pass).count(),
                    report.rows.len()
                )))
            }
        }
        Command::Diagnose { snapshot, config, set } => {
            let mut raw = match config {
                Some(p) => RawConfig::load(&p)?,
                None => RawConfig::default(),
            };
            for s in &set {
                raw.set(s)?;
            }
            let sample = commands::cmd_diagnose(&snapshot, &raw.diag_overrides()?)?;
            let text = serde_json::to_string_pretty(&sample).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
        Command::Report { dir } => {
            for p in commands::cmd_report(&dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("euler-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
