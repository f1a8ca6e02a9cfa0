use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use horoprox_cli::commands::{
    solve_to_csv, EXIT_INNER_FAILURE, EXIT_INVALID, EXIT_IO, EXIT_MAX_ITERS, EXIT_UNSUPPORTED,
};
use horoprox_cli::problem::{load_problem, parse_problem};
use horoprox_cli::trace::Trace;
use tempfile::TempDir;

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn bhppm(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bhppm"));
    cmd.args(args).env_remove("BHPPM_SEED").env("RUST_LOG", "warn");
    if let Some(s) = env_seed {
        cmd.env("BHPPM_SEED", s);
    }
    cmd.output().expect("bhppm runs")
}

fn solve(spec: &Path, out: &Path) -> Output {
    bhppm(&["solve", spec.to_str().unwrap(), "-o", out.to_str().unwrap()], None)
}

fn write_spec(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const RANDOM_START: &str = r#"
seed = 11
[manifold]
kind = "hyperboloid"
dim = 2
[objective]
kind = "max_of_squared_distances"
anchors = [[-1.0, 0.0, 1.4142135623730951], [1.0, 0.0, 1.4142135623730951], [0.0, 1.0, 1.4142135623730951]]
"#;

#[test]
fn midpoint_problem_converges_and_writes_trace() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("trace.csv");
    let res = solve(&problem("midpoint_h2.toml"), &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("Converged"), "{stdout}");

    let trace = Trace::read(&out).unwrap();
    let star = trace.p_star.unwrap();
    assert!(star.iter().zip([0.0, 0.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-12), "{star:?}");
    let last = trace.rows.last().unwrap();
    assert!(last.dist_to_pstar.unwrap() < 1e-4);
    assert!(!dir.path().join(".trace.csv.tmp").exists());
}

#[test]
fn trace_file_round_trips_bit_exact() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    assert_eq!(solve(&problem("circumcenter_h2.toml"), &out).status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let trace = Trace::parse(&text).unwrap();
    assert_eq!(trace.to_csv_string().unwrap(), text);

    // and the rows are the solver's own records
    let spec = load_problem(&problem("circumcenter_h2.toml")).unwrap();
    let (csv, run) = solve_to_csv(&spec).unwrap();
    assert_eq!(csv, text);
    let space = spec.space;
    for (row, rec) in trace.rows.iter().zip(&run.history) {
        let (p, q) = row.points(space).unwrap();
        assert_eq!(p, rec.p);
        assert_eq!(q, rec.q);
        assert_eq!(row.f_q.to_bits(), rec.f_q.to_bits());
        assert_eq!(row.norm_v.to_bits(), rec.v.norm().to_bits());
    }
}

#[test]
fn iteration_budget_exhaustion_exits_2() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(problem("half_squared_h2.toml"))
        .unwrap()
        .replace("max_outer_iters = 60", "max_outer_iters = 3");
    let spec = write_spec(&dir, "short.toml", &text);
    let res = solve(&spec, &dir.path().join("t.csv"));
    assert_eq!(res.status.code(), Some(EXIT_MAX_ITERS));
    assert_eq!(Trace::read(&dir.path().join("t.csv")).unwrap().rows.len(), 3);
}

#[test]
fn sum_of_distances_is_refused() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    let res = solve(&problem("sum_of_distances_h2.toml"), &out);
    assert_eq!(res.status.code(), Some(EXIT_INNER_FAILURE));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no certified B-subgradient"));
    assert!(res.stdout.is_empty());
    assert!(!out.exists());
}

#[test]
fn unwritable_output_exits_4() {
    let dir = TempDir::new().unwrap();
    let res = solve(&problem("midpoint_h2.toml"), &dir.path().join("missing/t.csv"));
    assert_eq!(res.status.code(), Some(EXIT_IO));
}

#[test]
fn missing_spec_exits_4() {
    let dir = TempDir::new().unwrap();
    let res = solve(&dir.path().join("nope.toml"), &dir.path().join("t.csv"));
    assert_eq!(res.status.code(), Some(EXIT_IO));
}

#[test]
fn invalid_spec_names_the_field() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(
        &dir,
        "bad.toml",
        r#"
        [manifold]
        kind = "hyperboloid"
        dim = 2
        [objective]
        kind = "weighted_cover"
        anchors = [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
        weights = [0.1, -0.2]
        "#,
    );
    let res = solve(&spec, &dir.path().join("t.csv"));
    assert_eq!(res.status.code(), Some(EXIT_INVALID));
    assert!(String::from_utf8_lossy(&res.stderr).contains("objective.weights"));
}

#[test]
fn compare_exact_exit_codes() {
    let ok = bhppm(&["compare-exact", problem("half_squared_h2.toml").to_str().unwrap()], None);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));

    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(problem("half_squared_h2.toml")).unwrap().replace("sigma = 0.0", "sigma = 0.5");
    let inexact = write_spec(&dir, "inexact.toml", &text);
    let res = bhppm(&["compare-exact", inexact.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(EXIT_INVALID));

    let text = std::fs::read_to_string(problem("midpoint_h2.toml")).unwrap() + "\n[solver]\nsigma = 0.0\n";
    let no_prox = write_spec(&dir, "noprox.toml", &text);
    let res = bhppm(&["compare-exact", no_prox.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(EXIT_UNSUPPORTED));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(bhppm(&[], None).status.code(), Some(EXIT_INVALID));
    assert_eq!(bhppm(&["check", "nonsense"], None).status.code(), Some(EXIT_INVALID));
    assert_eq!(bhppm(&["solve", "x.toml"], None).status.code(), Some(EXIT_INVALID));
    let v = bhppm(&["--version"], None);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("bhppm "));
}

#[test]
fn check_prints_a_table_and_exits_0() {
    let res = bhppm(&["check", "geometry", "--seed", "3"], None);
    assert_eq!(res.status.code(), Some(0));
    let out = String::from_utf8(res.stdout).unwrap();
    assert!(out.lines().all(|l| l.starts_with("PASS") || l.ends_with("0 failed")), "{out}");
}

#[test]
fn seed_variable_overrides_file_seed() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(&dir, "random.toml", RANDOM_START);
    let run = |seed: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let res = bhppm(&["solve", spec.to_str().unwrap(), "-o", out.to_str().unwrap()], seed);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
        std::fs::read(out).unwrap()
    };
    let from_file = run(None, "a.csv");
    assert_eq!(run(Some("11"), "b.csv"), from_file);
    assert_ne!(run(Some("12"), "c.csv"), from_file);

    let bad = bhppm(&["solve", spec.to_str().unwrap(), "-o", "/dev/null"], Some("minus one"));
    assert_eq!(bad.status.code(), Some(EXIT_INVALID));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("BHPPM_SEED"));
}

#[test]
fn random_start_depends_only_on_seed() {
    let a = parse_problem(RANDOM_START).unwrap();
    let b = parse_problem(RANDOM_START).unwrap();
    assert_eq!(a.initial_point, b.initial_point);
    let c = parse_problem(&RANDOM_START.replace("seed = 11", "seed = 12")).unwrap();
    assert_ne!(a.initial_point, c.initial_point);
}

#[test]
fn book_and_bundled_problems_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let chapter = std::fs::read_to_string(root.join("book/src/cli.md")).unwrap();
    let blocks: Vec<&str> = chapter.split("```toml\n").skip(1).map(|b| b.split("```").next().unwrap()).collect();
    assert!(!blocks.is_empty());
    for b in blocks {
        parse_problem(b).unwrap_or_else(|e| panic!("book snippet: {e}\n{b}"));
    }
    for entry in std::fs::read_dir(root.join("problems")).unwrap() {
        let path = entry.unwrap().path();
        load_problem(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
