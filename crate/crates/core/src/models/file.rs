//! JSON model files.
//!
//! ```json
//! { "kind": "decision_set", "version": 1, "metadata": {},
//!   "conditions": [ {"feature": "income", "op": "<=", "value": 5000},
//!                   {"feature": "purpose", "op": "==", "value": "car"} ],
//!   "rules": [[0], [1]] }
//!
//! { "kind": "gam", "version": 1, "metadata": {},
//!   "intercept": -0.5, "link": "inverse_logistic", "threshold": 0.0,
//!   "shapes": [ {"feature": "income", "cuts": [5000], "weights": [1.0, -1.0]} ] }
//! ```
//!
//! Features are referenced by name and categories by label, so a file is
//! resolved against a [`FeatureSchema`] when loaded.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::decision_set::{DecisionSet, ModelMetadata};
use super::gam::{GamModel, Link, ShapeFunction};
use crate::dataset::{Condition, FeatureKind, FeatureSchema, Op};
use crate::error::{Error, Result};

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    DecisionSet(DecisionSet),
    Gam(GamModel),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionDoc {
    feature: String,
    op: Op,
    value: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionSetDoc {
    kind: String,
    version: u32,
    #[serde(default)]
    metadata: ModelMetadata,
    conditions: Vec<ConditionDoc>,
    rules: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeDoc {
    feature: String,
    cuts: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GamDoc {
    kind: String,
    version: u32,
    #[serde(default)]
    metadata: ModelMetadata,
    intercept: f64,
    #[serde(default)]
    link: Link,
    threshold: f64,
    shapes: Vec<ShapeDoc>,
}

fn resolve_feature(schema: &FeatureSchema, name: &str) -> Result<usize> {
    schema
        .index_of(name)
        .ok_or_else(|| Error::Model(format!("unknown feature {name:?}")))
}

fn condition_from_doc(doc: &ConditionDoc, schema: &FeatureSchema) -> Result<Condition> {
    let j = resolve_feature(schema, &doc.feature)?;
    let feature = &schema.features[j];
    let value = match (&feature.kind, &doc.value) {
        (FeatureKind::Continuous { .. }, Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| Error::Model(format!("bad threshold for {:?}", doc.feature)))?,
        (FeatureKind::Categorical { .. }, Value::String(s)) => feature
            .category_index(s)
            .ok_or_else(|| Error::Model(format!("unknown category {s:?} for {:?}", doc.feature)))?
            as f64,
        _ => {
            return Err(Error::Model(format!(
                "condition value {} does not fit feature {:?}",
                doc.value, doc.feature
            )))
        }
    };
    let c = Condition::new(j, doc.op, value);
    c.validate(schema)?;
    Ok(c)
}

fn condition_to_doc(c: &Condition, schema: &FeatureSchema) -> ConditionDoc {
    let feature = &schema.features[c.feature];
    let value = match &feature.kind {
        FeatureKind::Categorical { categories } => Value::String(categories[c.value as usize].clone()),
        FeatureKind::Continuous { .. } => serde_json::json!(c.value),
    };
    ConditionDoc {
        feature: feature.name.clone(),
        op: c.op,
        value,
    }
}

pub fn parse_model(text: &str, schema: &FeatureSchema) -> Result<Model> {
    let raw: Value = serde_json::from_str(text)?;
    let kind = raw
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Model("missing \"kind\" tag".into()))?
        .to_string();
    let version = raw.get("version").and_then(Value::as_u64).unwrap_or(0) as u32;
    if version != MODEL_FILE_VERSION {
        return Err(Error::Version(version));
    }
    match kind.as_str() {
        "decision_set" => {
            let doc: DecisionSetDoc = serde_json::from_value(raw)?;
            let vocabulary = doc
                .conditions
                .iter()
                .map(|c| condition_from_doc(c, schema))
                .collect::<Result<Vec<_>>>()?;
            Ok(Model::DecisionSet(
                DecisionSet::new(vocabulary, doc.rules)?.with_metadata(doc.metadata),
            ))
        }
        "gam" => {
            let doc: GamDoc = serde_json::from_value(raw)?;
            let shapes = doc
                .shapes
                .into_iter()
                .map(|s| {
                    Ok(ShapeFunction {
                        feature: resolve_feature(schema, &s.feature)?,
                        cuts: s.cuts,
                        weights: s.weights,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut g = GamModel::new(doc.intercept, shapes, doc.link, doc.threshold)?;
            g.metadata = doc.metadata;
            Ok(Model::Gam(g))
        }
        other => Err(Error::Model(format!("unknown model kind {other:?}"))),
    }
}

pub fn model_to_json(model: &Model, schema: &FeatureSchema) -> Result<String> {
    let text = match model {
        Model::DecisionSet(f) => serde_json::to_string_pretty(&DecisionSetDoc {
            kind: "decision_set".into(),
            version: MODEL_FILE_VERSION,
            metadata: f.metadata.clone(),
            conditions: f.vocabulary().iter().map(|c| condition_to_doc(c, schema)).collect(),
            rules: f.rules().iter().map(|r| r.conditions().to_vec()).collect(),
        })?,
        Model::Gam(g) => serde_json::to_string_pretty(&GamDoc {
            kind: "gam".into(),
            version: MODEL_FILE_VERSION,
            metadata: g.metadata.clone(),
            intercept: g.intercept,
            link: g.link,
            threshold: g.threshold,
            shapes: g
                .shapes
                .iter()
                .map(|s| ShapeDoc {
                    feature: schema.features[s.feature].name.clone(),
                    cuts: s.cuts.clone(),
                    weights: s.weights.clone(),
                })
                .collect(),
        })?,
    };
    Ok(text)
}

pub fn load_model(path: &Path, schema: &FeatureSchema) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, schema)
}

pub fn save_model(model: &Model, schema: &FeatureSchema, path: &Path) -> Result<()> {
    let mut text = model_to_json(model, schema)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Feature;
    use proptest::prelude::*;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::continuous("income", 0.0, 100_000.0),
            Feature::continuous("age", 18.0, 100.0),
            Feature::categorical("purpose", ["car", "tv", "education"]),
        ])
        .unwrap()
    }

    #[test]
    fn undefined_condition_is_reported() {
        let text = r#"{"kind":"decision_set","version":1,
            "conditions":[{"feature":"income","op":"<=","value":5000}],
            "rules":[[0],[4]]}"#;
        let err = parse_model(text, &schema()).unwrap_err();
        assert!(matches!(err, Error::UndefinedCondition { id: 4, .. }), "{err}");
    }

    #[test]
    fn unknown_kind_and_version() {
        assert!(matches!(
            parse_model(r#"{"kind":"forest","version":1}"#, &schema()),
            Err(Error::Model(_))
        ));
        assert!(matches!(
            parse_model(r#"{"kind":"gam","version":7}"#, &schema()),
            Err(Error::Version(7))
        ));
        assert!(matches!(parse_model("{not json", &schema()), Err(Error::Json(_))));
    }

    #[test]
    fn categorical_values_by_label() {
        let text = r#"{"kind":"decision_set","version":1,
            "conditions":[{"feature":"purpose","op":"==","value":"tv"}],
            "rules":[[0]]}"#;
        let Model::DecisionSet(f) = parse_model(text, &schema()).unwrap() else {
            panic!()
        };
        assert_eq!(f.vocabulary()[0], Condition::new(2, Op::Eq, 1.0));
        let bad = text.replace("\"tv\"", "\"boat\"");
        assert!(parse_model(&bad, &schema()).is_err());
    }

    #[test]
    fn gam_round_trip() {
        let g = GamModel::new(
            -0.25,
            vec![ShapeFunction {
                feature: 1,
                cuts: vec![30.0, 50.5],
                weights: vec![0.1, -0.2, 0.3],
            }],
            Link::InverseLogistic,
            0.05,
        )
        .unwrap();
        let m = Model::Gam(g);
        let back = parse_model(&model_to_json(&m, &schema()).unwrap(), &schema()).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn decision_set_round_trip(
            thresholds in proptest::collection::vec(1.0f64..99_999.0, 1..6),
            cats in proptest::collection::vec(0usize..3, 0..3),
            rule_seed in proptest::collection::vec(proptest::collection::vec(0usize..64, 1..4), 1..5),
        ) {
            let mut vocab: Vec<Condition> = thresholds.iter().map(|&t| Condition::new(0, Op::Le, t)).collect();
            vocab.extend(cats.iter().map(|&k| Condition::new(2, Op::Eq, k as f64)));
            let m = vocab.len();
            let rules: Vec<Vec<usize>> = rule_seed.iter().map(|r| vec![r[0] % m]).collect();
            let f = DecisionSet::new(vocab, rules).unwrap().with_metadata(ModelMetadata {
                name: Some("t".into()), seed: Some(3), provenance: None });
            let model = Model::DecisionSet(f);
            let text = model_to_json(&model, &schema()).unwrap();
            prop_assert_eq!(parse_model(&text, &schema()).unwrap(), model);
        }
    }
}
