use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nephro-xai"));
    c.env_remove("NEPHRO_XAI_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/reference_scorecard.toml")
        .display()
        .to_string()
}

#[test]
fn explain_without_training_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["explain", "--row", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train required first"));
}

#[test]
fn config_and_data_errors_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[models]\nfolds = 1\n").unwrap();
    let out = run(&["profile", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.csv");
    let out = run(&["profile", "--data", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let out = bin()
        .args(["profile", "--out", dir.path().to_str().unwrap()])
        .env("NEPHRO_XAI_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixture_scorecard_matches_reference_within_a_hundredth() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["metrics", "--fixture", &fixture(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("scorecard.txt")).unwrap();
    let expected = [
        ("AdaBoost", [0.87, 0.80, 0.70, 0.77]),
        ("Random Forest", [0.91, 0.67, 0.61, 0.66]),
        ("XGBoost", [0.83, 0.67, 0.55, 0.66]),
    ];
    for (name, cells) in expected {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        let nums: Vec<f64> = line[name.len()..]
            .split_whitespace()
            .take(4)
            .map(|t| t.parse().unwrap())
            .collect();
        for (got, want) in nums.iter().zip(cells) {
            assert!((got - want).abs() <= 0.01 + 1e-9, "{name}: {got} vs {want}");
        }
    }
}

#[test]
fn canonical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(&["all", "--canonical", "--seed", "7", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in nephro_xai::pipeline::REPORT_ARTIFACTS {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("profile.json")).unwrap()).unwrap();
    assert!(report.get("generated_at").is_none());
    assert_eq!(report["seed"], 7);
}
