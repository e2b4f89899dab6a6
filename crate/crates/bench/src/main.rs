use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Runs the acceptance suite and prints a markdown report.
#[derive(Parser)]
#[command(name = "ncadmm-suite", version)]
struct Args {
    /// Seed of the generated problems.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let report = match ncadmm_bench::acceptance_suite(args.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("suite aborted: {e}");
            return ExitCode::from(3);
        }
    };
    let md = report.markdown();
    print!("{md}");
    if let Some(path) = args.out {
        if let Err(e) = std::fs::write(&path, &md) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(3);
        }
    }
    for c in report.failed() {
        eprintln!("criterion {} ({}) failed: {}", c.id, c.name, c.measured);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
