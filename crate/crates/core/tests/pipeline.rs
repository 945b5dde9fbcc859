use std::path::{Path, PathBuf};

use faithful_core::dataset::{load_csv, DatasetConfig};
use faithful_core::defense::{verify_faithful, DefenseMethod};
use faithful_core::harness::{
    emit_results, prepare, read_config_echo, read_curves, read_query_log, recompute_curves, run_prepared,
    ExperimentConfig, CONFIG_FILE, CURVES_FILE, QUERIES_FILE,
};
use faithful_core::models::{gam_to_decision_set, load_model, ConversionOptions, Model};
use faithful_core::{AttackStrategy, BinarizedDataset, Condition};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn config() -> ExperimentConfig {
    ExperimentConfig::load(&fixture("experiment.toml"), &[]).unwrap()
}

#[test]
fn fixture_labels_match_the_model() {
    let schema = DatasetConfig::load(&fixture("schema.toml")).unwrap().schema().unwrap();
    let Model::DecisionSet(f) = load_model(&fixture("model.json"), &schema).unwrap() else {
        panic!("expected a decision set");
    };
    assert_eq!(f.rules().len(), 3);
    for csv in ["train.csv", "test.csv"] {
        let raw = load_csv(&fixture(csv), &schema).unwrap();
        for (x, &y) in raw.rows.iter().zip(&raw.labels) {
            assert_eq!(f.predict_raw(x), y, "{csv}: {x:?}");
        }
    }
}

#[test]
fn gam_fixture_converts_exactly() {
    let schema = DatasetConfig::load(&fixture("schema.toml")).unwrap().schema().unwrap();
    let Model::Gam(g) = load_model(&fixture("gam.json"), &schema).unwrap() else {
        panic!("expected a GAM");
    };
    let f = gam_to_decision_set(&g, g.threshold, ConversionOptions::default()).unwrap();
    let raw = load_csv(&fixture("train.csv"), &schema).unwrap();
    for x in &raw.rows {
        assert_eq!(f.predict_raw(x), g.predict(x, g.threshold));
    }
}

#[test]
fn csv_run_is_faithful_and_curves_recompute() {
    let cfg = config();
    let prepared = prepare(&cfg).unwrap();
    let run = run_prepared(&cfg, &prepared).unwrap();
    assert_eq!(run.queries.len(), 200);
    assert_eq!(run.curves.len(), 1 + 200 / 25);
    assert_eq!(run.summary.explanation_fpr, Some(0.0));
    assert!(!run.explanations.is_empty());
    for e in &run.explanations {
        let row = prepared.train.binarize_query(&run.queries[e.query_id].query);
        assert!(verify_faithful(&e.conditions(), &prepared.model, &row));
        assert_eq!(e.supp, prepared.train.support(&e.conditions(), None).count);
    }
    assert_eq!(recompute_curves(&cfg, &prepared, &run.queries).unwrap(), run.curves);
}

#[test]
fn emitted_files_read_back() {
    let cfg = config();
    let prepared = prepare(&cfg).unwrap();
    let run = run_prepared(&cfg, &prepared).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run, dir.path()).unwrap();
    assert_eq!(read_query_log(&dir.path().join(QUERIES_FILE)).unwrap(), run.queries);
    assert_eq!(read_curves(&dir.path().join(CURVES_FILE)).unwrap(), run.curves);
    assert_eq!(read_config_echo(&dir.path().join(CONFIG_FILE)).unwrap(), cfg);
}

#[test]
fn replay_reproduces_the_recorded_game() {
    let cfg = config();
    let prepared = prepare(&cfg).unwrap();
    let run = run_prepared(&cfg, &prepared).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run, dir.path()).unwrap();

    let mut replay = cfg.clone();
    replay.attacker.strategy = AttackStrategy::Replay;
    replay.attacker.replay = Some(dir.path().join(QUERIES_FILE));
    let again = run_prepared(&replay, &prepared).unwrap();
    assert_eq!(again.explanations, run.explanations);
    assert_eq!(
        again.curves.iter().map(|c| c.coverage_test).collect::<Vec<_>>(),
        run.curves.iter().map(|c| c.coverage_test).collect::<Vec<_>>()
    );

    // every defense sees the same queries; base-rule leaks at least as much
    replay.defense.method = DefenseMethod::BaseRule;
    let base = run_prepared(&replay, &prepared).unwrap();
    for (a, b) in run.curves.iter().zip(&base.curves) {
        assert!(a.coverage_test.unwrap_or(0.0) <= b.coverage_test.unwrap_or(0.0));
    }
}

#[test]
fn short_replay_log_is_rejected() {
    let mut cfg = config();
    cfg.max_queries = 10;
    let prepared = prepare(&cfg).unwrap();
    let run = run_prepared(&cfg, &prepared).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run, dir.path()).unwrap();
    let mut replay = cfg.clone();
    replay.max_queries = 11;
    replay.attacker.strategy = AttackStrategy::Replay;
    replay.attacker.replay = Some(dir.path().join(QUERIES_FILE));
    assert!(run_prepared(&replay, &prepared).is_err());
}

fn fixture_data() -> (faithful_core::RawDataset, BinarizedDataset) {
    let ds = DatasetConfig::load(&fixture("schema.toml")).unwrap();
    let raw = load_csv(&fixture("train.csv"), &ds.schema().unwrap()).unwrap();
    let data = BinarizedDataset::binarize(&raw, &ds.binarization, &[]).unwrap();
    (raw, data)
}

proptest! {
    #[test]
    fn support_counts_raw_rows(picks in proptest::collection::vec(0usize..1000, 0..5)) {
        let (raw, data) = fixture_data();
        let beta: Vec<usize> = picks.iter().map(|p| p % data.m()).collect();
        let conds: Vec<Condition> = beta.iter().map(|&j| data.conditions()[j]).collect();
        let oracle = raw.rows.iter().filter(|x| conds.iter().all(|c| c.holds_on(x))).count();
        prop_assert_eq!(data.support(&beta, None).count, oracle);
    }
}
