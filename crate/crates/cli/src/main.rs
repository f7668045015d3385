use std::process::ExitCode;

use clap::Parser;
use levy_fbsde_cli::{run, Cli, ConfigError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            if !report.checks_in_lines {
                for check in &report.checks {
                    println!("{check}");
                }
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks:");
                for check in report.failures() {
                    eprintln!("  {}", check.message);
                }
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
