use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sisdiag")).args(args).output().expect("binary runs")
}

fn value<'a>(stdout: &'a str, key: &str) -> Option<&'a str> {
    stdout.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
}

#[test]
fn identity_is_yes_with_one_eigenvalue() {
    let out = run(&["analyze", problem("identity.problem").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(value(&text, "verdict"), Some("YES"));
    assert_eq!(value(&text, "g"), Some("1"));
}

#[test]
fn jordan_is_no_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "diagonalize",
        problem("jordan.problem").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(value(&text, "verdict"), Some("NO"));
    assert_eq!(value(&text, "reason"), Some("defective fibers"));
    assert!(!dir.path().join("jordan.decomposition").exists());
    assert!(dir.path().join("jordan.diagonalize.report").exists());
}

#[test]
fn normal3_round_trip_through_the_decomposition_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem("normal3.problem");
    let out_dir = dir.path().to_str().unwrap();
    let out = run(&["diagonalize", p.to_str().unwrap(), "--out", out_dir]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    let residual: f64 = value(&text, "max_synthesis_residual").unwrap().parse().unwrap();
    assert!(residual < 1e-8);
    for f in ["normal3.decomposition", "normal3.cb.csv", "normal3.lambda_3.csv", "normal3.counts.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let out = run(&["verify", p.to_str().unwrap(), "--out", out_dir]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(value(&text, "valid"), Some("true"));
    assert_eq!(value(&text, "h_equals_k"), Some("true"));
    assert_eq!(value(&text, "signal_check"), Some("done"));

    let out = run(&["synthesize", p.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(value(&String::from_utf8(out.stdout).unwrap(), "synthesis"), Some("spectral"));
}

#[test]
fn coalescing_is_no_by_angle() {
    let out = run(&["analyze", problem("coalescing.problem").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(value(&text, "reason"), Some("angle degeneration"));
    let ess: f64 = value(&text, "ess_sup_cb").unwrap().parse().unwrap();
    assert!(ess >= 0.99);
}

#[test]
fn margin_override_changes_the_verdict() {
    // ess sup C_b = 1/√2 for the skewed field.
    let p = problem("skewed.problem");
    let out = run(&["analyze", p.to_str().unwrap(), "--margin", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["analyze", p.to_str().unwrap(), "--margin", "0.2", "--grid", "64"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(value(&text, "grid.n"), Some("64"));
    assert_eq!(value(&text, "tol.margin"), Some("0.2"));
}

#[test]
fn reports_are_deterministic() {
    let p = problem("riesz.problem");
    let a = run(&["analyze", p.to_str().unwrap()]).stdout;
    let b = run(&["analyze", p.to_str().unwrap()]).stdout;
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
    assert_eq!(&keys[..3], &["version", "command", "problem"]);
}

#[test]
fn errors_exit_with_one() {
    let out = run(&["analyze", "/nonexistent/missing.problem"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify",
        problem("identity.problem").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.problem");
    std::fs::write(&bad, "sisdiag-problem v1\ngrid 1 8\nwindow 0\ngenerators 1\ninclude nowhere.txt\n").unwrap();
    let out = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("nowhere.txt"));
}

#[test]
fn dependent_generators_skip_the_signal_check() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("frame.problem");
    std::fs::write(
        &p,
        "sisdiag-problem v1\ngrid 1 32\nwindow 1\ngenerators 3\n\
         fiber 1 0 0 1 0\nfiber 2 1 0 1 0\nfiber 3 0 0 1 0\nfiber 3 1 0 1 0\n\
         operator\nentry 1 1 0 2 0\nentry 2 2 0 2 0\nentry 3 3 0 2 0\n",
    )
    .unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = run(&["diagonalize", p.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["verify", p.to_str().unwrap(), "--out", out_dir]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(value(&text, "signal_check").unwrap().starts_with("skipped"));
}

#[test]
fn tampered_decomposition_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let p = problem("skewed.problem");
    let out_dir = dir.path().to_str().unwrap();
    assert_eq!(run(&["diagonalize", p.to_str().unwrap(), "--out", out_dir]).status.code(), Some(0));
    let file = dir.path().join("skewed.decomposition");
    let text = std::fs::read_to_string(&file).unwrap();
    let tampered: String = text
        .lines()
        .map(|l| if l.starts_with("lambda 0 ") { "lambda 0 0.25 0" } else { l })
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&file, tampered).unwrap();
    let out = run(&["verify", p.to_str().unwrap(), "--out", out_dir]);
    let report = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(2), "{report}");
    assert_eq!(value(&report, "valid"), Some("false"));
}
