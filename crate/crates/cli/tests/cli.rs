use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn faithful(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faithful"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn faithful")
}

fn ok(args: &[&str]) -> String {
    let out = faithful(args);
    assert!(
        out.status.success(),
        "faithful {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic data on disk plus a config pointing at it.
fn setup(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&[
        "synth",
        "--seed",
        "4",
        "--output",
        s(&data),
        "--set",
        "n=400",
        "--set",
        "p=5",
    ]);
    for f in ["schema.toml", "train.csv", "test.csv", "model.json"] {
        assert!(data.join(f).exists(), "missing {f}");
    }
    let cfg = dir.join("exp.toml");
    fs::write(
        &cfg,
        "max_queries = 150\ncadence = 30\n\n[data]\nschema = \"data/schema.toml\"\ntrain = \"data/train.csv\"\ntest = \"data/test.csv\"\n\n[model]\nfile = \"data/model.json\"\n",
    )
    .unwrap();
    cfg
}

#[test]
fn synth_run_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = dir.path().join("out");
    let summary = ok(&[
        "run",
        "--config",
        s(&cfg),
        "--seed",
        "2",
        "--output",
        s(&out),
        "--defense",
        "exact",
        "--strategy",
        "committee",
    ]);
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["defense"], "exact");
    assert_eq!(summary["strategy"], "committee");
    assert_eq!(summary["queries"], 150);
    assert_eq!(summary["explanation_fpr"], 0.0);
    for f in [
        "config.json",
        "queries.jsonl",
        "curves.csv",
        "timing.csv",
        "summary.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let lines = fs::read_to_string(out.join("queries.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 150);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["query_id"], 0);

    let recomputed = dir.path().join("again.csv");
    ok(&["metrics", "--run", s(&out), "--output", s(&recomputed)]);
    assert_eq!(
        fs::read(&recomputed).unwrap(),
        fs::read(out.join("curves.csv")).unwrap()
    );
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "run",
            "--config",
            s(&cfg),
            "--seed",
            "9",
            "--output",
            s(out),
            "--set",
            "attacker.strategy=random",
        ]);
    }
    for f in ["curves.csv", "queries.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    ok(&[
        "run",
        "--config",
        s(&cfg),
        "--seed",
        "10",
        "--output",
        s(&c),
        "--set",
        "attacker.strategy=random",
    ]);
    assert_ne!(
        fs::read(a.join("queries.jsonl")).unwrap(),
        fs::read(c.join("queries.jsonl")).unwrap()
    );
}

#[test]
fn sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = dir.path().join("sweep");
    let table = ok(&[
        "sweep",
        "--config",
        s(&cfg),
        "--defenses",
        "exact,base_rule",
        "--strategies",
        "random,perturbation",
        "--seeds",
        "1,2",
        "--output",
        s(&out),
        "--set",
        "max_queries=60",
    ]);
    assert_eq!(table.lines().count(), 1 + 2 * 2 * 2);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(out.join("perturbation/exact/seed-2/curves.csv").exists());
}

#[test]
fn convert_gam_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds.json");
    ok(&[
        "convert-gam",
        "--gam",
        s(&core_fixture("gam.json")),
        "--schema",
        s(&core_fixture("schema.toml")),
        "--output",
        s(&out),
    ]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["kind"], "decision_set");
    assert!(!doc["rules"].as_array().unwrap().is_empty());

    let full = dir.path().join("full.json");
    ok(&[
        "convert-gam",
        "--gam",
        s(&core_fixture("gam.json")),
        "--schema",
        s(&core_fixture("schema.toml")),
        "--no-early-stop",
        "--output",
        s(&full),
    ]);
    assert!(full.exists());
}

#[test]
fn bad_invocations_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    // the seed is never implicit
    assert!(!faithful(&["run", "--config", s(&cfg)]).status.success());
    assert!(
        !faithful(&["run", "--config", s(&cfg), "--seed", "1", "--set", "nonsense"])
            .status
            .success()
    );
    assert!(!faithful(&[
        "run",
        "--config",
        s(&cfg),
        "--seed",
        "1",
        "--set",
        "defense.method=lime"
    ])
    .status
    .success());
    assert!(!faithful(&["synth", "--output", s(&dir.path().join("x"))])
        .status
        .success());
}
