use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::dataset::{cap, contradictory, BinarizedDataset, Condition, CoverageSet};
use crate::error::{Error, Result};

/// Free-form provenance carried through model files.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// A conjunction of condition ids (sorted, non-empty, non-contradictory).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    conditions: Vec<usize>,
}

impl Rule {
    pub fn conditions(&self) -> &[usize] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// `self ⊆ other` for a sorted id slice.
    pub fn is_subset_of(&self, other: &[usize]) -> bool {
        self.conditions.iter().all(|c| other.binary_search(c).is_ok())
    }
}

/// An OR of ANDs over its own condition vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionSet {
    vocabulary: Vec<Condition>,
    rules: Vec<Rule>,
    pub metadata: ModelMetadata,
}

impl DecisionSet {
    pub fn new(vocabulary: Vec<Condition>, rules: Vec<Vec<usize>>) -> Result<Self> {
        let m = vocabulary.len();
        let mut built = Vec::with_capacity(rules.len());
        for (r, mut ids) in rules.into_iter().enumerate() {
            if let Some(&id) = ids.iter().find(|&&id| id >= m) {
                return Err(Error::UndefinedCondition { rule: r, id, len: m });
            }
            ids.sort_unstable();
            ids.dedup();
            if ids.is_empty() {
                return Err(Error::Model(format!("rule {r} has no conditions")));
            }
            if contradictory(ids.iter().map(|&j| &vocabulary[j])) {
                return Err(Error::Model(format!("rule {r} contains contradictory conditions")));
            }
            built.push(Rule { conditions: ids });
        }
        Ok(DecisionSet {
            vocabulary,
            rules: built,
            metadata: ModelMetadata::default(),
        })
    }

    pub fn with_metadata(mut self, metadata: ModelMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn vocabulary(&self) -> &[Condition] {
        &self.vocabulary
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, r: usize) -> &Rule {
        &self.rules[r]
    }

    /// Label and the ids of every rule `row` satisfies.
    pub fn predict(&self, row: &Bitset) -> (u8, Vec<usize>) {
        let fired: Vec<usize> = self
            .rules
            .iter()
            .enumerate()
            .filter(|(_, r)| cap(&r.conditions, row))
            .map(|(i, _)| i)
            .collect();
        (u8::from(!fired.is_empty()), fired)
    }

    pub fn predict_label(&self, row: &Bitset) -> u8 {
        u8::from(self.rules.iter().any(|r| cap(&r.conditions, row)))
    }

    /// Prediction straight from raw feature values.
    pub fn predict_raw(&self, x: &[f64]) -> u8 {
        let hit = self
            .rules
            .iter()
            .any(|r| r.conditions.iter().all(|&j| self.vocabulary[j].holds_on(x)));
        u8::from(hit)
    }

    /// Conditions referenced by at least one rule.
    pub fn used_conditions(&self) -> Vec<Condition> {
        let mut ids: Vec<usize> = self.rules.iter().flat_map(|r| r.conditions.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(|j| self.vocabulary[j]).collect()
    }

    /// Re-expresses every rule over `vocabulary`, which must contain each
    /// condition the rules use.
    pub fn rebase(&self, vocabulary: &[Condition]) -> Result<DecisionSet> {
        let mut rules = Vec::with_capacity(self.rules.len());
        for (r, rule) in self.rules.iter().enumerate() {
            let mut ids = Vec::with_capacity(rule.len());
            for &j in &rule.conditions {
                let c = &self.vocabulary[j];
                let k = vocabulary
                    .iter()
                    .position(|v| v.same_as(c))
                    .ok_or_else(|| Error::Model(format!("rule {r}: condition {c:?} missing from target vocabulary")))?;
                ids.push(k);
            }
            rules.push(ids);
        }
        Ok(DecisionSet::new(vocabulary.to_vec(), rules)?.with_metadata(self.metadata.clone()))
    }

    /// Coverage of every rule over a dataset sharing this vocabulary.
    pub fn rule_coverage(&self, data: &BinarizedDataset) -> Vec<CoverageSet> {
        self.rules.iter().map(|r| data.support(&r.conditions, None)).collect()
    }
}
