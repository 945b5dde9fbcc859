use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{FeatureKind, FeatureSchema, RawDataset};
use crate::error::{Error, Result};

/// Discrete marginal of one feature. Categorical values are category
/// indices.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMarginal {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Independent per-feature marginals the attacker samples queries from.
#[derive(Clone, Debug)]
pub struct MarginalModel {
    features: Vec<FeatureMarginal>,
    samplers: Vec<WeightedIndex<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarginalDoc {
    feature: String,
    values: Vec<Value>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarginalsDoc {
    features: Vec<MarginalDoc>,
}

impl MarginalModel {
    pub fn new(features: Vec<FeatureMarginal>) -> Result<Self> {
        let mut samplers = Vec::with_capacity(features.len());
        for (j, f) in features.iter().enumerate() {
            if f.values.is_empty() || f.values.len() != f.probs.len() {
                return Err(Error::Config(format!(
                    "marginal {j}: values and probs must be non-empty and equal length"
                )));
            }
            let total: f64 = f.probs.iter().sum();
            if f.probs.iter().any(|p| p.is_nan() || *p < 0.0) || (total - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "marginal {j}: probabilities must be non-negative and sum to 1"
                )));
            }
            samplers.push(WeightedIndex::new(&f.probs).map_err(|e| Error::Config(format!("marginal {j}: {e}")))?);
        }
        Ok(MarginalModel { features, samplers })
    }

    /// Empirical marginals: each distinct value with its relative frequency.
    pub fn estimate(raw: &RawDataset) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Config("cannot estimate marginals from an empty sample".into()));
        }
        let n = raw.len() as f64;
        let features = (0..raw.schema.len())
            .map(|j| {
                let mut col: Vec<f64> = raw.rows.iter().map(|r| r[j]).collect();
                col.sort_by(f64::total_cmp);
                let mut values = Vec::new();
                let mut probs = Vec::new();
                for v in col {
                    if values.last() == Some(&v) {
                        *probs.last_mut().unwrap() += 1.0;
                    } else {
                        values.push(v);
                        probs.push(1.0);
                    }
                }
                probs.iter_mut().for_each(|p| *p /= n);
                FeatureMarginal { values, probs }
            })
            .collect();
        Self::new(features)
    }

    /// Reads `{"features": [{"feature", "values", "probs"}]}`, one entry per
    /// schema feature in any order. Categorical values are category labels.
    pub fn parse(text: &str, schema: &FeatureSchema) -> Result<Self> {
        let doc: MarginalsDoc = serde_json::from_str(text)?;
        let mut slots: Vec<Option<FeatureMarginal>> = vec![None; schema.len()];
        for m in doc.features {
            let j = schema
                .index_of(&m.feature)
                .ok_or_else(|| Error::Config(format!("marginals: unknown feature {:?}", m.feature)))?;
            let feature = &schema.features[j];
            let values = m
                .values
                .iter()
                .map(|v| match (&feature.kind, v) {
                    (FeatureKind::Continuous { .. }, Value::Number(x)) => x.as_f64().ok_or(()),
                    (FeatureKind::Categorical { .. }, Value::String(s)) => {
                        feature.category_index(s).map(|k| k as f64).ok_or(())
                    }
                    _ => Err(()),
                })
                .collect::<std::result::Result<Vec<f64>, ()>>()
                .map_err(|_| Error::Config(format!("marginals: bad value for feature {:?}", m.feature)))?;
            slots[j] = Some(FeatureMarginal { values, probs: m.probs });
        }
        let features = slots
            .into_iter()
            .enumerate()
            .map(|(j, s)| {
                s.ok_or_else(|| Error::Config(format!("marginals: missing feature {:?}", schema.features[j].name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(features)
    }

    pub fn load(path: &Path, schema: &FeatureSchema) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, schema)
    }

    pub fn to_json(&self, schema: &FeatureSchema) -> Result<String> {
        let features = self
            .features
            .iter()
            .zip(&schema.features)
            .map(|(m, f)| MarginalDoc {
                feature: f.name.clone(),
                values: m
                    .values
                    .iter()
                    .map(|&v| match &f.kind {
                        FeatureKind::Categorical { categories } => Value::String(categories[v as usize].clone()),
                        FeatureKind::Continuous { .. } => serde_json::json!(v),
                    })
                    .collect(),
                probs: m.probs.clone(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&MarginalsDoc { features })?)
    }

    pub fn features(&self) -> &[FeatureMarginal] {
        &self.features
    }

    /// One query with every feature drawn independently.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.samplers)
            .map(|(f, s)| f.values[s.sample(rng)])
            .collect()
    }

    /// Smallest positive gap between distinct values of each feature, 1 for
    /// single-valued features.
    pub fn precision(&self) -> Vec<f64> {
        self.features
            .iter()
            .map(|f| {
                let mut v = f.values.clone();
                v.sort_by(f64::total_cmp);
                v.windows(2)
                    .map(|w| w[1] - w[0])
                    .filter(|&d| d > 0.0)
                    .fold(f64::INFINITY, f64::min)
            })
            .map(|d| if d.is_finite() { d } else { 1.0 })
            .collect()
    }
}
