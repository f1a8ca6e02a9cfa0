//! The three subcommands, each returning a process exit code.
//!
//! Summaries go to `out`, diagnostics to `err`.

use std::io::Write;
use std::path::Path;

use horoprox::bsubdiff::OracleError;
use horoprox::manifold::dist;
use horoprox::solver::{bhppm, ppa_exact, InnerMethod, ProxKind, RunResult, SolverConfig, SolverError, Terminal};
use thiserror::Error;

use crate::problem::{load_problem, ProblemError, ProblemSpec};
use crate::suites::run_suite;
use crate::trace::{write_atomic, Trace};

pub const EXIT_OK: i32 = 0;
/// Invalid input, usage errors, failed checks.
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_MAX_ITERS: i32 = 2;
/// Inner failure, or an objective without a certified B-subgradient.
pub const EXIT_INNER_FAILURE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_UNSUPPORTED: i32 = 5;

/// Largest per-step deviation accepted by `compare-exact`.
pub const EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no certified B-subgradient: {0}")]
    Uncertified(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Trace(#[from] crate::trace::TraceError),
}

impl SolveError {
    fn exit_code(&self) -> i32 {
        match self {
            SolveError::Uncertified(_) => EXIT_INNER_FAILURE,
            SolveError::Solver(SolverError::Config(_)) => EXIT_INVALID,
            SolveError::Solver(_) => EXIT_INNER_FAILURE,
            SolveError::Trace(_) => EXIT_IO,
        }
    }
}

/// Runs the solver on a validated problem and renders the trace.
pub fn solve_to_csv(spec: &ProblemSpec) -> Result<(String, RunResult), SolveError> {
    let f = spec.objective.build().map_err(|e| SolverError::Config(e.to_string()))?;
    let run = match bhppm(f.as_ref(), &spec.initial_point, &spec.solver) {
        Ok(run) => run,
        Err(SolverError::Oracle(OracleError::NoCertifiedSubgradient(msg))) => return Err(SolveError::Uncertified(msg)),
        Err(e) => return Err(e.into()),
    };
    let p_star = spec.reference_solution();
    let csv = Trace::from_history(&run.history, p_star.as_ref()).to_csv_string()?;
    Ok((csv, run))
}

fn load_error_code(e: &ProblemError) -> i32 {
    match e {
        ProblemError::Io { .. } => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn terminal_code(t: Terminal) -> i32 {
    match t {
        Terminal::Converged => EXIT_OK,
        Terminal::MaxIters => EXIT_MAX_ITERS,
        Terminal::InnerFailure => EXIT_INNER_FAILURE,
    }
}

pub fn cmd_solve(spec_path: &Path, output: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = match load_problem(spec_path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return load_error_code(&e);
        }
    };
    let (csv, run) = match solve_to_csv(&spec) {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    for w in &run.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    if let Err(e) = write_atomic(output, &csv) {
        let _ = writeln!(err, "error: cannot write {}: {e}", output.display());
        return EXIT_IO;
    }
    let last = run.history.last();
    let _ = writeln!(out, "terminal     {:?}", run.terminal);
    let _ = writeln!(out, "iterations   {}", run.history.len());
    if let Some(r) = last {
        let _ = writeln!(out, "f(q_k)       {:.12e}", r.f_q);
        let _ = writeln!(out, "d(p_k,q_k)   {:.3e}", r.dist_pq);
    }
    let coords: Vec<String> = run.final_point.to_vec().iter().map(|x| format!("{x:.12}")).collect();
    let _ = writeln!(out, "final point  [{}]", coords.join(", "));
    let _ = writeln!(out, "trace        {}", output.display());
    terminal_code(run.terminal)
}

pub fn cmd_check(suite: &str, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(checks) = run_suite(suite, seed) else {
        let _ = writeln!(err, "error: unknown suite '{suite}'");
        return EXIT_INVALID;
    };
    let width = checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        let pad = width - c.name.chars().count();
        let _ = writeln!(out, "{mark}  {}{}  {}", c.name, " ".repeat(pad), c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", checks.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_INVALID
    }
}

/// Per-step deviation between the closed-form-inner solver and the exact
/// proximal point iteration.
pub fn compare_exact(spec: &ProblemSpec) -> Result<Vec<f64>, (i32, String)> {
    if spec.solver.sigma != 0.0 {
        return Err((EXIT_INVALID, format!("compare-exact needs solver.sigma = 0, got {}", spec.solver.sigma)));
    }
    let f = spec.objective.build().map_err(|e| (EXIT_INVALID, e.to_string()))?;
    let kind = ProxKind::from_construction(&f.construction())
        .ok_or_else(|| (EXIT_UNSUPPORTED, format!("no closed-form proximal map for {}", f.construction())))?;
    let config = SolverConfig { inner: InnerMethod::ClosedForm(kind.clone()), ..spec.solver.clone() };
    let a = bhppm(f.as_ref(), &spec.initial_point, &config).map_err(|e| (EXIT_INVALID, e.to_string()))?;
    let b = ppa_exact(&kind, &spec.initial_point, &spec.solver.mu, spec.solver.max_outer_iters, spec.solver.stop_tol)
        .map_err(|e| (EXIT_INVALID, e.to_string()))?;
    let n = a.history.len().max(b.history.len());
    Ok((0..n)
        .map(|k| match (a.history.get(k), b.history.get(k)) {
            (Some(x), Some(y)) => {
                dist(&x.p, &y.p).unwrap_or(f64::INFINITY).max(dist(&x.q, &y.q).unwrap_or(f64::INFINITY))
            }
            _ => f64::INFINITY,
        })
        .collect())
}

pub fn cmd_compare_exact(spec_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = match load_problem(spec_path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return load_error_code(&e);
        }
    };
    let devs = match compare_exact(&spec) {
        Ok(d) => d,
        Err((code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return code;
        }
    };
    let _ = writeln!(out, "{:>5}  {:>12}", "k", "deviation");
    for (k, d) in devs.iter().enumerate() {
        let _ = writeln!(out, "{k:>5}  {d:>12.3e}");
    }
    let worst = devs.iter().copied().fold(0.0, f64::max);
    let passed = worst <= EXACT_TOL;
    let _ = writeln!(out, "max deviation {worst:.3e} (tol {EXACT_TOL:.0e}): {}", if passed { "PASS" } else { "FAIL" });
    if passed {
        EXIT_OK
    } else {
        EXIT_INVALID
    }
}
