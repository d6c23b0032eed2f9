use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lyapbounds"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn corpus(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let p = dir.path().join(name);
    let mut all = vec!["corpus"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", p.to_str().unwrap()]);
    let out = run(&all);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parsed CSV rows keyed by header name.
fn rows(csv: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .map(|h| h.to_string())
                .zip(l.split(',').map(str::to_string))
                .collect()
        })
        .collect()
}

fn num(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn corpus_round_trips_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = corpus(
        &dir,
        "a.json",
        &["random", "--dim", "60", "--density", "2/7", "--seed", "7"],
    );
    let b = corpus(
        &dir,
        "b.json",
        &["random", "--dim", "60", "--density", "2/7", "--seed", "7"],
    );
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(v["dim"], 60);

    let sigma = corpus(&dir, "s.json", &["sigma6"]);
    let derham = corpus(&dir, "d.json", &["derham", "--omega", "1/4"]);
    for p in [&sigma, &derham] {
        let out = run(&["classify", s(p)]);
        assert!(out.status.success());
    }
}

#[test]
fn classify_reports_structure() {
    let dir = TempDir::new().unwrap();
    let sigma = corpus(&dir, "s.json", &["sigma6"]);
    let v: Value = serde_json::from_str(&stdout(&run(&["classify", s(&sigma)]))).unwrap();
    assert_eq!(v["dim"], 6);
    assert_eq!(v["structure"]["condition_b"], false);
    assert_eq!(
        v["recommendation"],
        "beta finite; convergence not guaranteed (condition (b) fails)"
    );

    let tri = write(
        &dir,
        "tri.json",
        r#"{"dim":2,"matrices":[[[1,1],[0,2]],[[3,1],[0,1]]]}"#,
    );
    let v: Value = serde_json::from_str(&stdout(&run(&["classify", s(&tri)]))).unwrap();
    assert_eq!(v["structure"]["reducible"], true);
    assert_eq!(
        v["structure"]["block_order"]["blocks"],
        serde_json::json!([[0], [1]])
    );

    let signed = corpus(
        &dir,
        "g.json",
        &["random", "--dim", "4", "--signed", "--seed", "1"],
    );
    let v: Value = serde_json::from_str(&stdout(&run(&["classify", s(&signed)]))).unwrap();
    assert_eq!(v["nonnegative"], false);
    assert!(v["recommendation"]
        .as_str()
        .unwrap()
        .starts_with("gamma-sdp"));
}

#[test]
fn scalar_family_has_zero_gap() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "sc.json", r#"{"dim":1,"matrices":[[[2]],[[8]]]}"#);
    let out = run(&["bounds", s(&f), "--k", "1,2,3,4,5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(
        text.lines().next().unwrap(),
        "k,lower_kind,lower,upper_kind,upper,gap,rel_gap,mc_mean,mc_stderr,wall_ms"
    );
    let rs = rows(&text);
    assert_eq!(rs.len(), 5);
    for r in rs {
        assert!((num(&r, "lower") - 2.0 * 2f64.ln()).abs() <= 1e-12);
        assert!((num(&r, "upper") - 2.0 * 2f64.ln()).abs() <= 1e-12);
        assert!(num(&r, "gap").abs() <= 1e-12);
    }
}

#[test]
fn derham_gap_shrinks_with_k() {
    let dir = TempDir::new().unwrap();
    let f = corpus(&dir, "d.json", &["derham", "--omega", "1/3"]);
    let csv = dir.path().join("d.csv");
    let out = run(&[
        "bounds",
        s(&f),
        "--k",
        "1,2,3,4,5,6,7,8,9,10",
        "--optimize",
        "--seed",
        "1",
        "--mc-length",
        "2000",
        "--mc-trajectories",
        "20",
        "--out",
        s(&csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("d.json").exists());
    let rs = rows(&std::fs::read_to_string(&csv).unwrap());
    let gaps: Vec<f64> = rs.iter().map(|r| num(r, "gap")).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    for r in &rs {
        let mc = num(r, "mc_mean");
        let se = num(r, "mc_stderr");
        assert!(mc >= num(r, "lower") - 3.0 * se && mc <= num(r, "upper") + 3.0 * se);
    }
}

#[test]
fn random_dense_pair_reaches_two_percent() {
    let dir = TempDir::new().unwrap();
    let f = corpus(&dir, "r.json", &["random", "--dim", "10", "--seed", "3"]);
    let csv = dir.path().join("r.csv");
    let side = dir.path().join("side.json");
    let out = run(&[
        "bounds",
        s(&f),
        "--k",
        "12",
        "--optimize",
        "--out",
        s(&csv),
        "--sidecar",
        s(&side),
    ]);
    assert!(out.status.success());
    let r = &rows(&std::fs::read_to_string(&csv).unwrap())[0];
    assert!(num(r, "rel_gap") <= 0.02, "{}", num(r, "rel_gap"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    assert!(v["rows"].is_array());
}

#[test]
fn zero_column_lower_bound_exits_three() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "z.json",
        r#"{"dim":2,"matrices":[[[2,0],[1,0]],[[3,0],[1,0]]]}"#,
    );
    let out = run(&["bounds", s(&f)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("-inf"));

    let out = run(&["bounds", s(&f), "--lower", "beta-tilde"]);
    assert!(out.status.success());
    let r = &rows(&stdout(&out))[0];
    assert!((num(r, "lower") - 0.5 * 6f64.ln()).abs() <= 1e-12);
}

#[test]
fn invalid_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"dim":2,"matrices":[[[1,2],[3]]]}"#);
    assert_eq!(run(&["bounds", s(&bad)]).status.code(), Some(2));
    let probs = write(
        &dir,
        "p.json",
        r#"{"dim":1,"matrices":[[[1]],[[2]]],"probs":[0.5,0.6]}"#,
    );
    assert_eq!(run(&["classify", s(&probs)]).status.code(), Some(2));
    assert_eq!(
        run(&["bounds", s(&dir.path().join("missing.json"))])
            .status
            .code(),
        Some(2)
    );
    let signed = corpus(
        &dir,
        "g.json",
        &["random", "--dim", "3", "--signed", "--seed", "2"],
    );
    assert_eq!(run(&["bounds", s(&signed)]).status.code(), Some(2));
    let out = run(&[
        "bounds",
        s(&signed),
        "--lower",
        "none",
        "--upper",
        "gamma-sdp",
    ]);
    assert!(out.status.success());
}

#[test]
fn monte_carlo_on_a_scalar() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "two.json", r#"{"dim":1,"matrices":[[[2]]]}"#);
    let out = run(&["mc", s(&f), "-t", "100", "-n", "5", "--seed", "1"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["mean"].as_f64().unwrap() - 2f64.ln()).abs() <= 1e-12);
    assert!(v["stderr"].as_f64().unwrap().abs() <= 1e-12);

    let zero = write(&dir, "zero.json", r#"{"dim":1,"matrices":[[[0]]]}"#);
    assert_eq!(
        run(&["mc", s(&zero), "-t", "10", "-n", "2", "--seed", "1"])
            .status
            .code(),
        Some(3)
    );
}
