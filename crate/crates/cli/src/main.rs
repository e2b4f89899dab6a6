use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncadmm::rates::MERIT_LAG;
use ncadmm_cli::commands::configured_report;
use ncadmm_cli::{cmd_check, cmd_rates, cmd_run, Code, Outcome};
use rayon::prelude::*;

/// Certify, run and analyze proximal ADMM configurations.
#[derive(Parser)]
#[command(name = "ncadmm", version)]
struct Cli {
    /// Independent configurations processed at once.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the admissibility of the configured parameters.
    Check {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
    },
    /// Run the solver, write the trace and audit it.
    Run {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Run even if the parameters are not admissible.
        #[arg(long)]
        force: bool,
    },
    /// Fit the convergence rate of recorded traces.
    Rates {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Lag of the merit recurrence.
        #[arg(long, default_value_t = MERIT_LAG)]
        l0: usize,
    },
}

fn process(paths: &[PathBuf], jobs: usize, f: impl Fn(&Path) -> Outcome + Sync) -> Result<Vec<Outcome>, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| e.to_string())?;
    Ok(pool.install(|| paths.par_iter().map(|p| f(p)).collect()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (paths, outcomes) = match &cli.command {
        Command::Check { configs } => (configs.clone(), process(configs, cli.jobs, cmd_check)),
        Command::Run { configs, force } => (configs.clone(), process(configs, cli.jobs, |p| cmd_run(p, *force))),
        Command::Rates { traces, l0 } => (Vec::new(), process(traces, cli.jobs, |p| cmd_rates(p, *l0))),
    };
    let outcomes = match outcomes {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return ExitCode::from(Code::Runtime as u8);
        }
    };
    let mut worst = Code::Ok;
    let mut combined = String::new();
    for (i, o) in outcomes.iter().enumerate() {
        if outcomes.len() > 1 && !o.report.is_empty() {
            combined.push_str(&format!("# {}\n", i + 1));
        }
        combined.push_str(&o.report);
        if let Some(m) = &o.message {
            eprintln!("{m}");
        }
        worst = worst.max(o.code);
        if let Some(p) = paths.get(i).and_then(|p| configured_report(p)) {
            if let Err(e) = std::fs::write(&p, &o.report) {
                eprintln!("cannot write {}: {e}", p.display());
                worst = worst.max(Code::Runtime);
            }
        }
    }
    print!("{combined}");
    if let Some(p) = &cli.out {
        if let Err(e) = std::fs::write(p, &combined) {
            eprintln!("cannot write {}: {e}", p.display());
            worst = worst.max(Code::Runtime);
        }
    }
    ExitCode::from(worst as u8)
}
