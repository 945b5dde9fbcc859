//! Tabular data, its binarization into a condition vocabulary, and the
//! coverage primitives (`cap`, `support`) everything else is built on.

mod raw;
mod schema;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use raw::{load_csv, read_csv, RawDataset};
pub use schema::{contradictory, Condition, Feature, FeatureKind, FeatureSchema, Op};

use crate::bitset::Bitset;
use crate::error::{Error, Result};

/// Non-fatal events recorded while building or querying a dataset.
#[derive(Clone, Debug, PartialEq)]
pub enum DataWarning {
    /// The feature has a single distinct value; no conditions were emitted.
    DegenerateFeature { feature: usize },
    /// A query value fell outside the schema bounds and was clamped.
    Clamped { feature: usize, value: f64, to: f64 },
}

/// How continuous features are cut into threshold conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinarizationPolicy {
    /// Maximum thresholds per continuous feature when picked from data.
    pub quantiles: usize,
    /// Explicit thresholds by feature name; these replace the quantile rule.
    pub thresholds: BTreeMap<String, Vec<f64>>,
    /// Also materialize `!=` conditions for categorical features.
    pub not_equal: bool,
}

impl Default for BinarizationPolicy {
    fn default() -> Self {
        BinarizationPolicy {
            quantiles: 8,
            thresholds: BTreeMap::new(),
            not_equal: false,
        }
    }
}

/// Schema plus binarization policy, as stored in a dataset TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub features: Vec<Feature>,
    #[serde(default)]
    pub binarization: BinarizationPolicy,
}

impl DatasetConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: DatasetConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.schema()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::new(self.features.clone())
    }
}

/// A set of row indices with its cardinality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageSet {
    pub bits: Bitset,
    pub count: usize,
}

impl CoverageSet {
    pub fn new(bits: Bitset) -> Self {
        let count = bits.count();
        CoverageSet { bits, count }
    }

    pub fn all(n: usize) -> Self {
        CoverageSet {
            bits: Bitset::full(n),
            count: n,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter()
    }
}

/// `cap(β, x̃)`: every condition id in `beta` is set in `row`.
#[inline]
pub fn cap(beta: &[usize], row: &Bitset) -> bool {
    beta.iter().all(|&j| row.contains(j))
}

/// Condition ids of `conditions` that hold on `query`, after clamping the
/// query into the schema bounds.
pub fn satisfied_conditions(
    query: &[f64],
    conditions: &[Condition],
    schema: &FeatureSchema,
) -> (Vec<usize>, Vec<DataWarning>) {
    let (q, warnings) = clamp_query(query, schema);
    let ids = conditions
        .iter()
        .enumerate()
        .filter(|(_, c)| c.holds_on(&q))
        .map(|(j, _)| j)
        .collect();
    (ids, warnings)
}

/// Clamps each value into its feature bounds; categorical indices are also
/// rounded to the nearest category.
pub fn clamp_query(query: &[f64], schema: &FeatureSchema) -> (Vec<f64>, Vec<DataWarning>) {
    let mut warnings = Vec::new();
    let q = query
        .iter()
        .zip(&schema.features)
        .enumerate()
        .map(|(j, (&v, f))| {
            let (lo, hi) = f.bounds();
            let mut to = v.clamp(lo, hi);
            if f.is_categorical() {
                to = to.round();
            }
            if to != v {
                log::warn!("query value {v} for {:?} clamped to {to}", f.name);
                warnings.push(DataWarning::Clamped {
                    feature: j,
                    value: v,
                    to,
                });
            }
            to
        })
        .collect();
    (q, warnings)
}

/// The binarized matrix `X̃` stored both column-wise (one row bitset per
/// condition) and row-wise (one condition bitset per row).
#[derive(Clone, Debug)]
pub struct BinarizedDataset {
    schema: FeatureSchema,
    conditions: Vec<Condition>,
    cols: Vec<Bitset>,
    rows: Vec<Bitset>,
    labels: Vec<u8>,
    warnings: Vec<DataWarning>,
}

impl BinarizedDataset {
    /// Builds `C` from `raw` under `policy`. Conditions in `required` (for
    /// example, those a protected model uses) are always included.
    pub fn binarize(raw: &RawDataset, policy: &BinarizationPolicy, required: &[Condition]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Policy("cannot binarize an empty dataset".into()));
        }
        let schema = &raw.schema;
        for name in policy.thresholds.keys() {
            match schema.index_of(name) {
                Some(j) if !schema.features[j].is_categorical() => {}
                Some(_) => {
                    return Err(Error::Policy(format!(
                        "explicit thresholds given for categorical feature {name:?}"
                    )))
                }
                None => return Err(Error::Policy(format!("unknown feature {name:?}"))),
            }
        }
        for c in required {
            c.validate(schema)?;
        }

        let mut conditions = Vec::new();
        let mut warnings = Vec::new();
        for (j, feature) in schema.features.iter().enumerate() {
            let req: Vec<&Condition> = required.iter().filter(|c| c.feature == j).collect();
            let distinct = {
                let mut vals: Vec<f64> = raw.rows.iter().map(|r| r[j]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                vals.len()
            };
            match &feature.kind {
                FeatureKind::Continuous { min, max } => {
                    let mut thresholds: Vec<f64> = match policy.thresholds.get(&feature.name) {
                        Some(explicit) => {
                            for &t in explicit {
                                if !(t > *min && t < *max) {
                                    return Err(Error::Policy(format!(
                                        "threshold {t} for {:?} is not strictly inside ({min}, {max})",
                                        feature.name
                                    )));
                                }
                            }
                            explicit.clone()
                        }
                        None if distinct <= 1 => {
                            log::warn!("feature {:?} is constant; skipped", feature.name);
                            warnings.push(DataWarning::DegenerateFeature { feature: j });
                            Vec::new()
                        }
                        None => {
                            let mut col: Vec<f64> = raw.rows.iter().map(|r| r[j]).collect();
                            col.sort_by(f64::total_cmp);
                            quantile_thresholds(&col, policy.quantiles)
                                .into_iter()
                                .filter(|t| t > min && t < max)
                                .collect()
                        }
                    };
                    thresholds.extend(req.iter().map(|c| c.value));
                    thresholds.sort_by(f64::total_cmp);
                    thresholds.dedup();
                    for t in thresholds {
                        conditions.push(Condition::new(j, Op::Le, t));
                        conditions.push(Condition::new(j, Op::Gt, t));
                    }
                }
                FeatureKind::Categorical { categories } => {
                    if distinct <= 1 && req.is_empty() {
                        log::warn!("feature {:?} is constant; skipped", feature.name);
                        warnings.push(DataWarning::DegenerateFeature { feature: j });
                        continue;
                    }
                    for k in 0..categories.len() {
                        let v = k as f64;
                        conditions.push(Condition::new(j, Op::Eq, v));
                        let ne_required = req.iter().any(|c| c.op == Op::Ne && c.value == v);
                        if policy.not_equal || ne_required {
                            conditions.push(Condition::new(j, Op::Ne, v));
                        }
                    }
                }
            }
        }
        let mut ds = Self::with_vocabulary(raw, conditions)?;
        ds.warnings = warnings;
        Ok(ds)
    }

    /// Evaluates a fixed vocabulary over `raw` (used for test sets, which
    /// must share the training vocabulary).
    pub fn with_vocabulary(raw: &RawDataset, conditions: Vec<Condition>) -> Result<Self> {
        for c in &conditions {
            if c.feature >= raw.schema.len() {
                return Err(Error::Schema(format!(
                    "condition references feature {} but schema has {}",
                    c.feature,
                    raw.schema.len()
                )));
            }
        }
        let n = raw.len();
        let m = conditions.len();
        let mut cols = vec![Bitset::new(n); m];
        let mut rows = vec![Bitset::new(m); n];
        for (i, row) in raw.rows.iter().enumerate() {
            for (j, c) in conditions.iter().enumerate() {
                if c.holds_on(row) {
                    cols[j].insert(i);
                    rows[i].insert(j);
                }
            }
        }
        Ok(BinarizedDataset {
            schema: raw.schema.clone(),
            conditions,
            cols,
            rows,
            labels: raw.labels.clone(),
            warnings: Vec::new(),
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.conditions.len()
    }

    pub fn col(&self, j: usize) -> &Bitset {
        &self.cols[j]
    }

    pub fn row(&self, i: usize) -> &Bitset {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Bitset] {
        &self.rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn warnings(&self) -> &[DataWarning] {
        &self.warnings
    }

    /// Id of the vocabulary entry identical to `c`, if present.
    pub fn find_condition(&self, c: &Condition) -> Option<usize> {
        self.conditions.iter().position(|v| v.same_as(c))
    }

    /// `S_β` restricted to `view` (all rows when `None`).
    pub fn support(&self, beta: &[usize], view: Option<&Bitset>) -> CoverageSet {
        let mut bits = match view {
            Some(v) => v.clone(),
            None => Bitset::full(self.n()),
        };
        let count = self.support_into(beta, &mut bits);
        CoverageSet { bits, count }
    }

    /// Intersects `acc` in place with every column in `beta` and returns
    /// the resulting cardinality.
    pub fn support_into(&self, beta: &[usize], acc: &mut Bitset) -> usize {
        for &j in beta {
            acc.intersect_with(&self.cols[j]);
        }
        acc.count()
    }

    pub fn satisfied_conditions(&self, query: &[f64]) -> Vec<usize> {
        satisfied_conditions(query, &self.conditions, &self.schema).0
    }

    pub fn satisfied_conditions_checked(&self, query: &[f64]) -> (Vec<usize>, Vec<DataWarning>) {
        satisfied_conditions(query, &self.conditions, &self.schema)
    }

    /// `q̃` as a bitset over the vocabulary.
    pub fn binarize_query(&self, query: &[f64]) -> Bitset {
        Bitset::from_indices(self.m(), self.satisfied_conditions(query))
    }
}

/// Midpoints between consecutive distinct values, thinned to at most `q`
/// by taking them at evenly spaced quantiles of `sorted`.
fn quantile_thresholds(sorted: &[f64], q: usize) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    if distinct.len() < 2 || q == 0 {
        return Vec::new();
    }
    let midpoints: Vec<f64> = distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    if midpoints.len() <= q {
        return midpoints;
    }
    let n = sorted.len();
    let mut out = Vec::with_capacity(q);
    for i in 1..=q {
        let pos = ((i * n) / (q + 1)).min(n - 1);
        let v = sorted[pos];
        // the midpoint just above v, or just below if v is the maximum
        let k = distinct.partition_point(|&d| d <= v);
        let t = if k < distinct.len() {
            midpoints[k - 1]
        } else {
            midpoints[midpoints.len() - 1]
        };
        out.push(t);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}
