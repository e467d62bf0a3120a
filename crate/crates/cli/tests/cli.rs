use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use acquimech::analysis::expected_reward;
use acquimech::experiments::{Family, MechanismKind, SweepConfig};
use acquimech::io::{instance_to_json, MatrixFile};
use acquimech::registry;
use acquimech::single_item::solve_som;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acquimech"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn example1(dir: &Path, k: Option<usize>) -> PathBuf {
    write(
        dir,
        "example1.json",
        &instance_to_json(&registry::example1(), k),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_som_on_example1() {
    let dir = TempDir::new().unwrap();
    let inst = example1(dir.path(), None);
    let out = run(&["solve", "--instance", s(&inst), "--mechanism", "som"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    let reward = doc["summary"]["reward"].as_f64().unwrap();
    assert!((reward - 0.00488).abs() < 1e-5, "{reward}");
    assert_eq!(doc["summary"]["monotone"], false);
}

#[test]
fn solve_om1_on_example1() {
    let dir = TempDir::new().unwrap();
    let inst = example1(dir.path(), None);
    let out_path = dir.path().join("om1.json");
    let out = run(&[
        "solve",
        "--instance",
        s(&inst),
        "--mechanism",
        "om1",
        "--out",
        s(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let reward = doc["summary"]["reward"].as_f64().unwrap();
    let inst1 = registry::example1();
    let printed = expected_reward(&inst1, &registry::example1_printed_x()).unwrap();
    assert!((reward - printed).abs() < 1e-6, "{reward} vs {printed}");
    assert!((reward - 0.001709).abs() < 1e-5, "{reward}");
    assert_eq!(doc["summary"]["ic"], true);
    assert_eq!(doc["summary"]["monotone"], true);

    // The written file verifies with the same verdicts.
    let out = run(&["verify", "--instance", s(&inst), "--matrix", s(&out_path)]);
    assert_eq!(code(&out), 0);
    let report = json(&out);
    assert_eq!(report["ic"]["passed"], true);
    assert_eq!(report["monotone"]["passed"], true);
}

#[test]
fn multi_item_solve_roundtrips_through_verify() {
    let dir = TempDir::new().unwrap();
    let inst = example1(dir.path(), Some(2));
    for mechanism in ["um-om1", "um-tmm"] {
        let out_path = dir.path().join(format!("{mechanism}.json"));
        let out = run(&[
            "solve",
            "--instance",
            s(&inst),
            "--mechanism",
            mechanism,
            "--out",
            s(&out_path),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let doc: Value =
            serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
        let out = run(&["verify", "--instance", s(&inst), "--matrix", s(&out_path)]);
        let report = json(&out);
        assert_eq!(report["ic"]["passed"], doc["summary"]["ic"]);
        assert_eq!(report["monotone"]["passed"], doc["summary"]["monotone"]);
        let expected = if doc["summary"]["ic"] == true && doc["summary"]["monotone"] == true {
            0
        } else {
            1
        };
        assert_eq!(code(&out), expected);
    }
}

#[test]
fn solve_rm_needs_two_items() {
    let dir = TempDir::new().unwrap();
    let inst = example1(dir.path(), None);
    let out = run(&["solve", "--instance", s(&inst), "--mechanism", "rm"]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());

    let inst = example1(dir.path(), Some(2));
    let out = run(&["solve", "--instance", s(&inst), "--mechanism", "rm"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(&out)["rank_policy"].is_object());
}

#[test]
fn size_budget_refusal() {
    let dir = TempDir::new().unwrap();
    let inst = example1(dir.path(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_acquimech"))
        .args(["solve", "--instance", s(&inst), "--mechanism", "omk"])
        .env("ACQUIMECH_SIZE_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    let out = run(&["solve", "--instance", s(&missing), "--mechanism", "som"]);
    assert_eq!(code(&out), 2);
    let garbage = write(dir.path(), "garbage.json", "{\"V\": [0, 1]");
    let out = run(&["solve", "--instance", s(&garbage), "--mechanism", "som"]);
    assert_eq!(code(&out), 2);
    let inst = example1(dir.path(), None);
    let out = run(&["solve", "--instance", s(&inst), "--mechanism", "nope"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_example1() {
    let dir = TempDir::new().unwrap();
    let inst = example1(dir.path(), None);
    let printed = MatrixFile::from(&registry::example1_printed_x());
    let printed = write(
        dir.path(),
        "printed.json",
        &serde_json::to_string(&printed).unwrap(),
    );
    assert_eq!(
        code(&run(&[
            "verify",
            "--instance",
            s(&inst),
            "--matrix",
            s(&printed)
        ])),
        0
    );

    let som = MatrixFile::from(&solve_som(&registry::example1()));
    let som = write(
        dir.path(),
        "som.json",
        &serde_json::to_string(&som).unwrap(),
    );
    let out = run(&["verify", "--instance", s(&inst), "--matrix", s(&som)]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["monotone"]["passed"], false);

    let small = write(dir.path(), "small.json", "[[0, 1], [1, 1]]");
    let out = run(&["verify", "--instance", s(&inst), "--matrix", s(&small)]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn rate_reports_per_quality_rates() {
    let dir = TempDir::new().unwrap();
    let inst = example1(dir.path(), None);
    let printed = MatrixFile::from(&registry::example1_printed_x());
    let printed = write(
        dir.path(),
        "printed.json",
        &serde_json::to_string(&printed).unwrap(),
    );
    let out = run(&["rate", "--instance", s(&inst), "--matrix", s(&printed)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let _: Value = serde_json::from_str(&text).unwrap();
}

#[test]
fn paper_reproductions() {
    let out = run(&["paper", "thm7"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("reproduction,check,expected,actual,tolerance,result"));
    assert!(stdout.lines().skip(1).all(|l| l.ends_with(",pass")));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("violation (2/3, 0): 0.782 < 0.832"),
        "{stderr}"
    );

    let out = run(&["paper", "example1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&run(&["paper", "nonexistent"])), 2);
}

fn coarse(family: Family) -> SweepConfig {
    let mut config = SweepConfig::standard(family, 0.3);
    config.mechanisms = vec![MechanismKind::Som, MechanismKind::Tmm, MechanismKind::Om1];
    config
}

fn sweep(dir: &Path, config: &str) -> (Output, PathBuf) {
    let config = write(dir, "config.json", config);
    let out_path = dir.join("sweep.csv");
    let out = run(&["sweep", "--config", s(&config), "--out", s(&out_path)]);
    (out, out_path)
}

#[test]
fn sweep_writes_one_row_per_point_and_mechanism() {
    let dir = TempDir::new().unwrap();
    let config = coarse(Family::Normal);
    let (out, path) = sweep(dir.path(), &serde_json::to_string(&config).unwrap());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("family,variance,mechanism,per_item_reward,overall_rate,rate_v0"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3 * 3);
    let columns = header.split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == columns));
    assert!(rows.iter().all(|r| r.starts_with("normal,")));
}

#[test]
fn sweep_lognormal_family_passes_through() {
    let dir = TempDir::new().unwrap();
    let config = coarse(Family::Lognormal);
    let (out, path) = sweep(dir.path(), &serde_json::to_string(&config).unwrap());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.lines().skip(1).all(|r| r.starts_with("lognormal,")));
}

#[test]
fn sweep_rejects_bad_configs() {
    let dir = TempDir::new().unwrap();
    let mut config = coarse(Family::Normal);
    config.mechanisms.clear();
    let (out, path) = sweep(dir.path(), &serde_json::to_string(&config).unwrap());
    assert_eq!(code(&out), 2);
    assert!(!path.exists());

    let mut config = coarse(Family::Normal);
    config.variance_grid.clear();
    let (out, _) = sweep(dir.path(), &serde_json::to_string(&config).unwrap());
    assert_eq!(code(&out), 2);

    let (out, _) = sweep(dir.path(), "{\"family\": \"normal\"}");
    assert_eq!(code(&out), 2);
}

#[test]
fn gen_is_seeded() {
    let a = run(&["gen", "--seed", "7", "--n", "3", "--m", "4", "--k", "2"]);
    let b = run(&["gen", "--seed", "7", "--n", "3", "--m", "4", "--k", "2"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let doc = json(&a);
    assert_eq!(doc["V"].as_array().unwrap().len(), 3);
    assert_eq!(doc["S"].as_array().unwrap().len(), 4);
    assert_eq!(doc["k"], 2);

    let dir = TempDir::new().unwrap();
    let inst = write(
        dir.path(),
        "gen.json",
        &String::from_utf8(a.stdout).unwrap(),
    );
    let out = run(&["solve", "--instance", s(&inst), "--mechanism", "om1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&run(&["gen", "--n", "0"])), 2);
}
