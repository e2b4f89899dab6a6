//! The `check`, `run` and `rates` subcommands.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ncadmm::diagnostics::{audit_trace, boundedness_precheck, kkt_residual};
use ncadmm::params::{check_admissibility, AdmissibilityInputs, AdmissibilityReport};
use ncadmm::problems::{oracle_distance, TestProblem};
use ncadmm::rates::analyze_merit_rates;
use ncadmm::solver::{run, SolverConfig};
use ncadmm::trace::Trace;

use crate::config::{build_problem, build_solver_config, RunConfig};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Code {
    Ok = 0,
    Failed = 1,
    Usage = 2,
    Runtime = 3,
}

/// What a command prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: Code,
    pub report: String,
    pub message: Option<String>,
}

impl Outcome {
    fn fail(code: Code, message: impl Into<String>) -> Self {
        Outcome { code, report: String::new(), message: Some(message.into()) }
    }
}

struct Loaded {
    cfg: RunConfig,
    base: PathBuf,
    problem: TestProblem,
    solver: SolverConfig,
}

fn load(path: &Path) -> Result<Loaded, Outcome> {
    let usage = |e: crate::config::ConfigError| Outcome::fail(Code::Usage, e.to_string());
    let (cfg, base) = RunConfig::load(path).map_err(usage)?;
    let problem = build_problem(&cfg.problem, &base).map_err(usage)?;
    let label = format!("{} ({})", path.display(), problem.descriptor);
    let solver = build_solver_config(&cfg.solver, &problem.spec, &label).map_err(usage)?;
    Ok(Loaded { cfg, base, problem, solver })
}

fn admissibility(l: &Loaded) -> Result<AdmissibilityReport, Outcome> {
    let spec = &l.problem.spec;
    let inputs = AdmissibilityInputs {
        schedule: &l.solver.schedule,
        a: &spec.a,
        r: l.solver.r,
        rho: l.solver.rho,
        l: spec.h.lipschitz(),
        gamma: l.solver.gamma,
        variant: l.solver.variant,
    };
    check_admissibility(&inputs, &[0], l.solver.regime).map_err(|e| Outcome::fail(Code::Usage, e.to_string()))
}

fn preamble(l: &Loaded) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "label = {}", l.solver.label);
    let _ = writeln!(s, "variant = {}", l.solver.variant.name());
    let _ = writeln!(s, "x_solver = {}", l.solver.x_solver.name());
    let _ = writeln!(s, "rho = {:?}", l.solver.rho);
    let b = boundedness_precheck(&l.problem.spec);
    let _ = writeln!(s, "boundedness = {}", b.name());
    if let Some(w) = b.warning() {
        let _ = writeln!(s, "warning = {w}");
    }
    s
}

fn check_text(l: &Loaded, rep: &AdmissibilityReport) -> String {
    let mut s = preamble(l);
    s.push_str(&rep.to_text());
    for f in rep.failures() {
        let _ = writeln!(s, "failed = {f}");
    }
    s
}

/// Certifies the configured parameters. Exits 0 iff the requested regime's
/// assumption holds.
pub fn cmd_check(path: &Path) -> Outcome {
    let l = match load(path) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let rep = match admissibility(&l) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let code = if rep.passed() { Code::Ok } else { Code::Failed };
    Outcome { code, report: check_text(&l, &rep), message: None }
}

fn write_trace(trace: &Trace, path: &Path) -> std::io::Result<()> {
    let w = BufWriter::new(File::create(path)?);
    trace.write_jsonl(w).map_err(|e| std::io::Error::other(e.to_string()))
}

fn trace_path(l: &Loaded, config: &Path) -> PathBuf {
    match &l.cfg.output.trace {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => l.base.join(p),
        None => {
            let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            l.base.join(format!("{stem}.trace.jsonl"))
        }
    }
}

/// Path of the report file named in the configuration, if any.
pub fn configured_report(path: &Path) -> Option<PathBuf> {
    let (cfg, base) = RunConfig::load(path).ok()?;
    cfg.output.report.map(|p| if p.is_absolute() { p } else { base.join(p) })
}

/// Runs the solver, writes the trace and summarizes the audits. Refuses
/// inadmissible configurations unless `force` is set.
pub fn cmd_run(path: &Path, force: bool) -> Outcome {
    let mut l = match load(path) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let rep = match admissibility(&l) {
        Ok(r) => r,
        Err(o) => return o,
    };
    if !rep.passed() && !force {
        return Outcome {
            code: Code::Failed,
            report: check_text(&l, &rep),
            message: Some(format!("{}: not admissible; pass --force to run anyway", path.display())),
        };
    }
    l.solver.allow_uncertified = force;
    let out = trace_path(&l, path);
    let trace = match run(&l.problem.spec, &l.solver) {
        Ok(t) => t,
        Err(f) => {
            let mut msg = format!("{}: solver failed: {f}", path.display());
            if !f.partial.records.is_empty() {
                match write_trace(&f.partial, &out) {
                    Ok(()) => msg.push_str(&format!("; partial trace in {}", out.display())),
                    Err(e) => msg.push_str(&format!("; cannot write partial trace: {e}")),
                }
            }
            return Outcome::fail(Code::Runtime, msg);
        }
    };
    if let Err(e) = write_trace(&trace, &out) {
        return Outcome::fail(Code::Runtime, format!("cannot write {}: {e}", out.display()));
    }

    let audit = audit_trace(&trace);
    let last = trace.last();
    let tol = l.cfg.analysis.kkt_tol;
    let kkt = kkt_residual(&last.x, &last.z, &last.y, &l.problem.spec, tol);
    let certified = trace.header.certified;
    let mut s = preamble(&l);
    let _ = writeln!(s, "certification = {}", if certified { "certified" } else { "uncertified" });
    let _ = writeln!(s, "regime = {}", trace.header.regime.name());
    let _ = writeln!(s, "r = {:?}", l.solver.r);
    let _ = writeln!(s, "iterations = {}", trace.header.iterations);
    let _ = writeln!(s, "stop_reason = {}", trace.header.status.name());
    let _ = writeln!(s, "final_Fk = {:?}", last.fk);
    let _ = writeln!(s, "final_objective = {:?}", last.obj);
    let _ = writeln!(s, "kkt.stationarity = {:?}", kkt.stationarity);
    let _ = writeln!(s, "kkt.feasibility = {:?}", kkt.feasibility);
    let _ = writeln!(s, "kkt.membership = {}", kkt.membership);
    let _ = writeln!(s, "kkt.within_tol = {} (tol {tol:?})", kkt.holds(tol));
    if let Some(d) = oracle_distance(&l.problem, &last.x) {
        let _ = writeln!(s, "oracle.{} = {d:?}", l.problem.oracle.kind());
    }
    let _ = writeln!(s, "violations.descent = {}", audit.descent.len());
    let _ = writeln!(s, "violations.estimates = {}", audit.estimates.len());
    let _ = writeln!(s, "violations.bound_d = {}", audit.bound_d.len());
    let _ = writeln!(s, "violations.bound_big_d = {}", audit.bound_big_d.len());
    let _ = writeln!(s, "violations = {}", audit.total());
    if let Some(v) = audit.all().next() {
        let _ = writeln!(s, "first_violation = {v}");
    }
    let _ = writeln!(s, "trace = {}", out.display());

    // Violations on a certified run contradict the certificate.
    let mut code = if certified && audit.total() > 0 { Code::Failed } else { Code::Ok };
    let mut message = None;
    if l.cfg.analysis.rates {
        match analyze_merit_rates(&trace, l.cfg.analysis.l0) {
            Ok(r) => {
                s.push_str(&prefixed("rates.", &r.to_text()));
                if !r.envelope_ok() {
                    code = Code::Failed;
                }
            }
            Err(e) => {
                code = Code::Failed;
                message = Some(format!("rate analysis: {e}"));
            }
        }
    }
    Outcome { code, report: s, message }
}

fn prefixed(prefix: &str, text: &str) -> String {
    text.lines().map(|line| format!("{prefix}{line}\n")).collect()
}

/// Fits the rate of a recorded trace and checks the envelopes.
pub fn cmd_rates(path: &Path, l0: usize) -> Outcome {
    let trace = match File::open(path) {
        Ok(f) => Trace::read_jsonl(BufReader::new(f)),
        Err(e) => return Outcome::fail(Code::Usage, format!("cannot open {}: {e}", path.display())),
    };
    let trace = match trace {
        Ok(t) => t,
        Err(e) => return Outcome::fail(Code::Usage, format!("{}: {e}", path.display())),
    };
    match analyze_merit_rates(&trace, l0) {
        Ok(r) => {
            let mut s = String::new();
            let _ = writeln!(s, "trace = {}", path.display());
            s.push_str(&r.to_text());
            let code = if r.envelope_ok() { Code::Ok } else { Code::Failed };
            Outcome { code, report: s, message: None }
        }
        Err(e) => Outcome::fail(Code::Failed, format!("{}: {e}", path.display())),
    }
}
