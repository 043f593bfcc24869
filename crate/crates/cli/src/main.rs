use std::process::ExitCode;

use bjj_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for path in &report.outputs {
                eprintln!("wrote {}", path.display());
            }
            for gate in &report.gates {
                let tag = if gate.passed { "ok" } else { "FAILED" };
                eprintln!("{tag:>6}  {}: {}", gate.name, gate.detail);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
