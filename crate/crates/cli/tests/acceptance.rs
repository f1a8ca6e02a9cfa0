//! The nine acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the summary is always printed:
//! `cargo test -p horoprox-cli --test acceptance`.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use horoprox_cli::suites::{self, Check};

const SEED: u64 = 42;

const REPRO_SPEC: &str = r#"
seed = 7
[manifold]
kind = "hyperboloid"
dim = 2
kappa = 1.0
[objective]
kind = "max_of_distances"
anchors = [[1.0, 0.2, 1.42828568570857], [-0.6, 0.9, 1.4730919862656235], [-0.3, -1.1, 1.5165750888103102]]
[solver]
sigma = 0.5
max_outer_iters = 200
"#;

struct Outcome {
    checks: Vec<Check>,
    secs: f64,
    limit: Option<f64>,
}

fn timed(limit: Option<f64>, run: impl FnOnce() -> Vec<Check>) -> Outcome {
    let t = Instant::now();
    let checks = run();
    Outcome { checks, secs: t.elapsed().as_secs_f64(), limit }
}

/// Runs `bhppm solve` on the same spec twice and compares the trace bytes.
fn binary_reproducibility() -> Vec<Check> {
    let dir = tempfile::tempdir().expect("temp dir");
    let spec = dir.path().join("problem.toml");
    std::fs::write(&spec, REPRO_SPEC).expect("write spec");
    let solve = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_bhppm"))
            .arg("solve")
            .arg(&spec)
            .arg("-o")
            .arg(out)
            .env_remove("BHPPM_SEED")
            .output()
            .expect("run bhppm")
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let (ra, rb) = (solve(&a), solve(&b));
    if !ra.status.success() || !rb.status.success() {
        return vec![Check {
            name: "reproducibility: bhppm solve twice".into(),
            passed: false,
            detail: format!(
                "exit codes {:?} {:?}: {}",
                ra.status.code(),
                rb.status.code(),
                String::from_utf8_lossy(&ra.stderr)
            ),
        }];
    }
    let (ba, bb) = (std::fs::read(&a).expect("trace a"), std::fs::read(&b).expect("trace b"));
    vec![Check {
        name: "reproducibility: bhppm solve twice gives identical bytes".into(),
        passed: ba == bb && !ba.is_empty(),
        detail: format!("{} and {} bytes", ba.len(), bb.len()),
    }]
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Outcome)> = vec![
        ("geometry", timed(Some(10.0), || suites::geometry(SEED))),
        ("busemann functions", timed(None, || suites::busemann_functions(SEED))),
        ("horosphere projection", timed(None, || suites::projection(SEED))),
        (
            "B-subgradients and counterexamples",
            timed(None, || {
                let mut c = suites::subdiff(SEED);
                c.extend(suites::counterexamples(SEED));
                c
            }),
        ),
        ("solver descent", timed(None, || suites::solver_descent(SEED))),
        ("complexity bounds", timed(None, || suites::solver_complexity(SEED))),
        ("exact-case reduction", timed(None, || suites::exact_reduction(SEED))),
        ("symmetry", timed(None, || suites::symmetry(SEED))),
        (
            "reproducibility",
            timed(None, || {
                let mut c = suites::reproducibility(SEED);
                c.extend(binary_reproducibility());
                c
            }),
        ),
    ];

    let mut failed = 0;
    for (i, (name, o)) in criteria.iter().enumerate() {
        let bad: Vec<&Check> = o.checks.iter().filter(|c| !c.passed).collect();
        let slow = o.limit.is_some_and(|l| o.secs >= l);
        let passed = bad.is_empty() && !slow && !o.checks.is_empty();
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} ({} checks, {:.1} s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            o.checks.len(),
            o.secs
        );
        for c in bad {
            println!("       {}: {}", c.name, c.detail);
        }
        if slow {
            println!("       runtime {:.1} s over the {:.0} s limit", o.secs, o.limit.unwrap());
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
