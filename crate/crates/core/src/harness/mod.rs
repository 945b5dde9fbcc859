//! The extraction game: an attacker queries, the defender answers, and the
//! harness records queries, explanations, timings and metric curves.

mod config;
mod metrics;
mod synth;

pub use config::{set_dotted, AttackerSection, DataSection, DefenseSection, ExperimentConfig, ModelSection};
pub use metrics::{agreement_metric, coverage_metric, covered_rows, explanation_fpr, timing_summary, TimingSummary};
pub use synth::{generate_synthetic, Synthetic, SyntheticSpec};

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacker::{train_cart, AttackStrategy, Attacker, MarginalModel, QuerySource, SurrogateTree};
use crate::bitset::Bitset;
use crate::dataset::{load_csv, BinarizedDataset, DatasetConfig, FeatureSchema, RawDataset};
use crate::defense::{Defender, DefenseMethod, Explanation, ExplanationHistory, ExplanationRecord};
use crate::error::{Error, Result};
use crate::models::{gam_to_decision_set, load_model, ConversionOptions, DecisionSet, Model};

pub const CONFIG_FILE: &str = "config.json";
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const CURVES_FILE: &str = "curves.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Loaded data and model for one experiment.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub schema: FeatureSchema,
    pub train_raw: RawDataset,
    pub test_raw: RawDataset,
    pub train: BinarizedDataset,
    /// Binarized over the training vocabulary.
    pub test: BinarizedDataset,
    /// The protected model over the training vocabulary.
    pub model: DecisionSet,
    /// Model predictions on the training and test rows.
    pub train_truth: Vec<u8>,
    pub test_truth: Vec<u8>,
    pub marginals: MarginalModel,
}

impl Prepared {
    pub fn from_parts(
        train_raw: RawDataset,
        test_raw: RawDataset,
        model: &DecisionSet,
        policy: &crate::dataset::BinarizationPolicy,
        marginals: Option<MarginalModel>,
    ) -> Result<Self> {
        let schema = train_raw.schema.clone();
        let train = BinarizedDataset::binarize(&train_raw, policy, &model.used_conditions())?;
        let test = BinarizedDataset::with_vocabulary(&test_raw, train.conditions().to_vec())?;
        let model = model.rebase(train.conditions())?;
        let train_truth = train.rows().iter().map(|r| model.predict_label(r)).collect();
        let test_truth = test.rows().iter().map(|r| model.predict_label(r)).collect();
        let marginals = match marginals {
            Some(m) => m,
            None => MarginalModel::estimate(&train_raw)?,
        };
        Ok(Prepared {
            schema,
            train_raw,
            test_raw,
            train,
            test,
            model,
            train_truth,
            test_truth,
            marginals,
        })
    }
}

fn load_protected_model(path: &Path, schema: &FeatureSchema, threshold: Option<f64>) -> Result<DecisionSet> {
    match load_model(path, schema)? {
        Model::DecisionSet(f) => Ok(f),
        Model::Gam(g) => {
            let tau = threshold.unwrap_or(g.threshold);
            gam_to_decision_set(&g, tau, ConversionOptions::default())
        }
    }
}

/// Loads or generates data, the protected model and attacker marginals.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let (train_raw, test_raw, model, policy) = match &config.data.synthetic {
        Some(spec) => {
            let s = generate_synthetic(spec, config.data_seed())?;
            let model = match &config.model.file {
                Some(path) => load_protected_model(path, &s.schema, config.model.threshold)?,
                None => s.model,
            };
            (s.train, s.test, model, Default::default())
        }
        None => {
            let (Some(schema_path), Some(train), Some(test)) =
                (&config.data.schema, &config.data.train, &config.data.test)
            else {
                unreachable!("validated");
            };
            let ds = DatasetConfig::load(schema_path)?;
            let schema = ds.schema()?;
            let model_path = config.model.file.as_ref().expect("validated");
            let model = load_protected_model(model_path, &schema, config.model.threshold)?;
            (
                load_csv(train, &schema)?,
                load_csv(test, &schema)?,
                model,
                ds.binarization,
            )
        }
    };
    let marginals = match &config.attacker.marginals {
        Some(path) => Some(MarginalModel::load(path, &train_raw.schema)?),
        None => None,
    };
    Prepared::from_parts(train_raw, test_raw, &model, &policy, marginals)
}

/// One line of `queries.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: usize,
    pub query: Vec<f64>,
    pub source: QuerySource,
    pub label: u8,
    pub method: DefenseMethod,
    /// Index of the shown explanation in release order.
    pub explanation: Option<usize>,
    pub e_base: Option<Vec<usize>>,
    pub e_add: Option<Vec<usize>>,
    pub supp: Option<usize>,
    pub reused: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub query_count: usize,
    pub coverage_train: Option<f64>,
    pub coverage_test: Option<f64>,
    pub agreement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub query_id: usize,
    pub method: DefenseMethod,
    pub seconds: f64,
    pub optimal: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub defense: DefenseMethod,
    pub strategy: AttackStrategy,
    pub seed: u64,
    pub queries: usize,
    pub positive_answers: usize,
    pub explanations: usize,
    pub reused_answers: usize,
    pub fallback_queries: usize,
    /// Exact searches that stopped at the node limit.
    pub incomplete_searches: usize,
    pub train_positives: usize,
    pub test_positives: usize,
    pub final_coverage_train: Option<f64>,
    pub final_coverage_test: Option<f64>,
    pub final_agreement: Option<f64>,
    pub explanation_fpr: Option<f64>,
    pub timing: TimingSummary,
}

#[derive(Clone, Debug)]
pub struct ExtractionRun {
    pub config: ExperimentConfig,
    pub queries: Vec<QueryRecord>,
    pub explanations: Vec<Explanation>,
    pub curves: Vec<CurvePoint>,
    pub timing: Vec<TimingRecord>,
    pub surrogate: SurrogateTree,
    pub summary: Summary,
}

fn fraction(hit: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hit as f64 / total as f64)
}

fn truth_bits(truth: &[u8], label: u8) -> Bitset {
    Bitset::from_indices(
        truth.len(),
        truth.iter().enumerate().filter(|(_, &y)| y == label).map(|(i, _)| i),
    )
}

/// Query values from a saved query log.
pub fn read_query_log(path: &Path) -> Result<Vec<QueryRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Runs the full game for `config`.
pub fn run_extraction(config: &ExperimentConfig) -> Result<ExtractionRun> {
    let prepared = prepare(config)?;
    run_prepared(config, &prepared)
}

fn agreement_now(prepared: &Prepared, covered_test: &Bitset, tree: &SurrogateTree) -> Option<f64> {
    let rows = &prepared.test_raw.rows;
    let agree = rows
        .iter()
        .enumerate()
        .filter(|&(i, x)| u8::from(covered_test.contains(i) || tree.predict(x) == 1) == prepared.test_truth[i])
        .count();
    fraction(agree, rows.len())
}

/// Runs the game on already prepared data.
pub fn run_prepared(config: &ExperimentConfig, prepared: &Prepared) -> Result<ExtractionRun> {
    config.validate()?;
    let defense = config.defense_config();
    let attack = config.attacker_config();
    let mut defender = Defender::new(&prepared.model, &prepared.train, defense.clone())?;
    let mut attacker = Attacker::new(
        attack.clone(),
        prepared.schema.clone(),
        prepared.marginals.clone(),
        config.cadence,
    )?;
    if let Some(path) = &config.attacker.replay {
        let log = read_query_log(path)?;
        if log.len() < config.max_queries {
            return Err(Error::Config(format!(
                "replay log {} has {} queries, fewer than max_queries {}",
                path.display(),
                log.len(),
                config.max_queries
            )));
        }
        attacker = attacker.with_replay(log.into_iter().map(|r| r.query).collect());
    }

    let train_pos = truth_bits(&prepared.train_truth, 1);
    let test_pos = truth_bits(&prepared.test_truth, 1);
    let mut covered_train = Bitset::new(prepared.train.n());
    let mut covered_test = Bitset::new(prepared.test.n());
    let coverage = |covered: &Bitset, pos: &Bitset| fraction(covered.intersection_count(pos), pos.count());

    let mut surrogate = SurrogateTree::constant(0);
    let mut curves = vec![CurvePoint {
        query_count: 0,
        coverage_train: coverage(&covered_train, &train_pos),
        coverage_test: coverage(&covered_test, &test_pos),
        agreement: agreement_now(prepared, &covered_test, &surrogate),
    }];
    let mut queries = Vec::with_capacity(config.max_queries);
    let mut timing = Vec::new();
    let conditions = prepared.train.conditions();

    for t in 0..config.max_queries {
        let step = |e: Error| Error::Step {
            step: t,
            source: Box::new(e),
        };
        let q = attacker.next_query(&prepared.train, defender.history()).map_err(step)?;
        if q.values.len() != prepared.schema.len() {
            return Err(step(Error::Config(format!(
                "query has {} values, schema has {}",
                q.values.len(),
                prepared.schema.len()
            ))));
        }
        let before = defender.history().len();
        let answer = defender.answer(t, &q.values);
        let history = defender.history();
        let new = history.len() > before;
        if new {
            let ids = history.conditions(history.len() - 1);
            covered_train.union_with(&prepared.train.support(ids, None).bits);
            covered_test.union_with(&prepared.test.support(ids, None).bits);
        }
        if let Some(seconds) = answer.elapsed {
            timing.push(TimingRecord {
                query_id: t,
                method: defense.method,
                seconds,
                optimal: answer.optimal,
            });
        }
        let shown = answer.explanation.map(|i| history.get(i));
        attacker.observe(t, &q.values, answer.label, shown, new, conditions);
        let rec = ExplanationRecord::new(t, &answer, defense.method, history);
        queries.push(QueryRecord {
            query_id: t,
            query: q.values,
            source: q.source,
            label: rec.label,
            method: rec.method,
            explanation: answer.explanation,
            e_base: rec.e_base,
            e_add: rec.e_add,
            supp: rec.supp,
            reused: rec.reused,
        });
        if (t + 1) % config.cadence == 0 {
            surrogate = attacker.train_surrogate();
            curves.push(CurvePoint {
                query_count: t + 1,
                coverage_train: coverage(&covered_train, &train_pos),
                coverage_test: coverage(&covered_test, &test_pos),
                agreement: agreement_now(prepared, &covered_test, &surrogate),
            });
        }
    }

    let history = defender.history();
    let test_neg = truth_bits(&prepared.test_truth, 0);
    let last = curves.last().expect("t = 0 point");
    let final_surrogate = attacker.train_surrogate();
    let seconds: Vec<f64> = timing.iter().map(|r| r.seconds).collect();
    let summary = Summary {
        defense: defense.method,
        strategy: attack.strategy,
        seed: config.seed,
        queries: queries.len(),
        positive_answers: queries.iter().filter(|r| r.label == 1).count(),
        explanations: history.len(),
        reused_answers: queries.iter().filter(|r| r.reused).count(),
        fallback_queries: queries
            .iter()
            .filter(|r| r.source == QuerySource::Random { fallback: true })
            .count(),
        incomplete_searches: timing.iter().filter(|r| r.optimal == Some(false)).count(),
        train_positives: train_pos.count(),
        test_positives: test_pos.count(),
        final_coverage_train: coverage(&covered_train, &train_pos),
        final_coverage_test: coverage(&covered_test, &test_pos),
        final_agreement: if last.query_count == config.max_queries {
            last.agreement
        } else {
            agreement_now(prepared, &covered_test, &final_surrogate)
        },
        explanation_fpr: fraction(covered_test.intersection_count(&test_neg), test_neg.count()),
        timing: timing_summary(&seconds),
    };
    Ok(ExtractionRun {
        config: config.clone(),
        queries,
        explanations: history.entries().to_vec(),
        curves,
        timing,
        surrogate: final_surrogate,
        summary,
    })
}

/// Rebuilds the metric curves from a query log with the row-by-row metric
/// definitions (no incremental state).
pub fn recompute_curves(
    config: &ExperimentConfig,
    prepared: &Prepared,
    queries: &[QueryRecord],
) -> Result<Vec<CurvePoint>> {
    let attack = config.attacker_config();
    let mut history = ExplanationHistory::new();
    let train_pos = truth_bits(&prepared.train_truth, 1);
    let test_pos = truth_bits(&prepared.test_truth, 1);
    let point = |t: usize, history: &ExplanationHistory, tree: &SurrogateTree| CurvePoint {
        query_count: t,
        coverage_train: coverage_metric(history, &prepared.train, &train_pos),
        coverage_test: coverage_metric(history, &prepared.test, &test_pos),
        agreement: agreement_metric(
            &prepared.test_truth,
            history,
            tree,
            &prepared.test_raw.rows,
            &prepared.test,
        ),
    };
    let mut curves = vec![point(0, &history, &SurrogateTree::constant(0))];
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (t, r) in queries.iter().enumerate() {
        if r.query_id != t {
            return Err(Error::Config(format!("query log out of order at line {}", t + 1)));
        }
        if let (Some(i), false) = (r.explanation, r.reused) {
            if i != history.len() {
                return Err(Error::Config(format!(
                    "query {t}: explanation {i} released out of order"
                )));
            }
            let (Some(e_base), Some(e_add), Some(supp)) = (r.e_base.clone(), r.e_add.clone(), r.supp) else {
                return Err(Error::Config(format!("query {t}: explanation fields missing")));
            };
            history.push(Explanation {
                e_base,
                e_add,
                method: r.method,
                query_id: t,
                supp,
            });
        }
        records.push(r.query.clone());
        labels.push(r.label);
        if (t + 1) % config.cadence == 0 {
            let tree = train_cart(&records, &labels, &prepared.schema, attack.max_depth, attack.min_leaf);
            curves.push(point(t + 1, &history, &tree));
        }
    }
    Ok(curves)
}

fn json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_rows<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for item in items {
        w.serialize(item)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header-only CSV for an empty timing table.
fn csv_header(path: &Path, header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the config echo, query log, curves, timings and summary into
/// `dir`, creating it if needed. Returns the written paths.
pub fn emit_results(run: &ExtractionRun, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = [CONFIG_FILE, QUERIES_FILE, CURVES_FILE, TIMING_FILE, SUMMARY_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    json_file(&paths[0], &run.config)?;
    json_lines(&paths[1], &run.queries)?;
    csv_rows(&paths[2], &run.curves)?;
    if run.timing.is_empty() {
        csv_header(&paths[3], &["query_id", "method", "seconds", "optimal"])?;
    } else {
        csv_rows(&paths[3], &run.timing)?;
    }
    json_file(&paths[4], &run.summary)?;
    Ok(paths)
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_curves(path: &Path, curves: &[CurvePoint]) -> Result<()> {
    csv_rows(path, curves)
}

pub fn read_config_echo(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: AttackStrategy,
    pub defense: DefenseMethod,
    pub seed: u64,
    pub explanations: usize,
    pub final_coverage_train: Option<f64>,
    pub final_coverage_test: Option<f64>,
    pub final_agreement: Option<f64>,
    pub explanation_fpr: Option<f64>,
}

/// Every (strategy, defense, seed) combination of `base`, run in parallel.
/// With `out`, each run is written to `out/<strategy>/<defense>/seed-<seed>`
/// and the rows to `out/sweep.csv`.
pub fn sweep(
    base: &ExperimentConfig,
    defenses: &[DefenseMethod],
    strategies: &[AttackStrategy],
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    let mut jobs = Vec::new();
    for &strategy in strategies {
        for &defense in defenses {
            for &seed in seeds {
                let mut c = base.clone();
                c.seed = seed;
                c.defense.method = defense;
                c.attacker.strategy = strategy;
                c.output = out.map(|o| {
                    o.join(strategy.as_str())
                        .join(defense.as_str())
                        .join(format!("seed-{seed}"))
                });
                jobs.push(c);
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|c| {
            let run = run_extraction(c)?;
            if let Some(dir) = &c.output {
                emit_results(&run, dir)?;
            }
            let s = run.summary;
            Ok(SweepRow {
                strategy: s.strategy,
                defense: s.defense,
                seed: s.seed,
                explanations: s.explanations,
                final_coverage_train: s.final_coverage_train,
                final_coverage_test: s.final_coverage_test,
                final_agreement: s.final_agreement,
                explanation_fpr: s.explanation_fpr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        csv_rows(&dir.join("sweep.csv"), &rows)?;
    }
    Ok(rows)
}

/// Writes a synthetic dataset as `schema.toml`, `train.csv`, `test.csv` and
/// `model.json` in `dir`.
pub fn write_synthetic(s: &Synthetic, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema_path = dir.join("schema.toml");
    DatasetConfig {
        features: s.schema.features.clone(),
        binarization: Default::default(),
    }
    .save(&schema_path)?;
    let train = dir.join("train.csv");
    let test = dir.join("test.csv");
    s.train.write_csv(&train, "label")?;
    s.test.write_csv(&test, "label")?;
    let model = dir.join("model.json");
    crate::models::save_model(&Model::DecisionSet(s.model.clone()), &s.schema, &model)?;
    Ok(vec![schema_path, train, test, model])
}
