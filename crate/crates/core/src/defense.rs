//! The defender: labels queries and releases faithful explanations.
//!
//! A positive query is answered with the earliest released explanation that
//! already covers it, or with a new one built from the satisfied rule
//! (`e_base`) plus up to `l` extra conditions true of the query (`e_add`)
//! picked to capture as few training rows as possible.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::dataset::{cap, BinarizedDataset};
use crate::error::{Error, Result};
use crate::models::DecisionSet;
use crate::solver::{exact, greedy, CoverageInstance, DEFAULT_NODE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseMethod {
    Greedy,
    Exact,
    ExactRa,
    BaseRule,
    Random,
    None,
}

impl DefenseMethod {
    pub const ALL: [DefenseMethod; 6] = [
        DefenseMethod::Greedy,
        DefenseMethod::Exact,
        DefenseMethod::ExactRa,
        DefenseMethod::BaseRule,
        DefenseMethod::Random,
        DefenseMethod::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefenseMethod::Greedy => "greedy",
            DefenseMethod::Exact => "exact",
            DefenseMethod::ExactRa => "exact_ra",
            DefenseMethod::BaseRule => "base_rule",
            DefenseMethod::Random => "random",
            DefenseMethod::None => "none",
        }
    }

    /// Methods that solve the coverage problem and reuse past explanations.
    pub fn is_optimizing(self) -> bool {
        matches!(
            self,
            DefenseMethod::Greedy | DefenseMethod::Exact | DefenseMethod::ExactRa
        )
    }
}

impl fmt::Display for DefenseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefenseMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DefenseMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown defense method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub method: DefenseMethod,
    /// Budget on the number of appended conditions.
    pub max_len: usize,
    pub seed: u64,
    pub node_limit: u64,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            method: DefenseMethod::Greedy,
            max_len: 3,
            seed: 0,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub e_base: Vec<usize>,
    pub e_add: Vec<usize>,
    pub method: DefenseMethod,
    pub query_id: usize,
    /// Training rows captured by `e_base ∪ e_add`.
    pub supp: usize,
}

impl Explanation {
    /// `e_base ∪ e_add`, ascending.
    pub fn conditions(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.e_base.iter().chain(&self.e_add).copied().collect();
        all.sort_unstable();
        all
    }

    pub fn len(&self) -> usize {
        self.e_base.len() + self.e_add.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Released explanations, in release order.
#[derive(Clone, Debug, Default)]
pub struct ExplanationHistory {
    entries: Vec<Explanation>,
    full: Vec<Vec<usize>>,
}

impl ExplanationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: Explanation) -> usize {
        self.full.push(e.conditions());
        self.entries.push(e);
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Explanation {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[Explanation] {
        &self.entries
    }

    /// Condition ids of entry `i`, ascending.
    pub fn conditions(&self, i: usize) -> &[usize] {
        &self.full[i]
    }

    /// Earliest entry whose conditions all hold on `row`.
    pub fn find_covering(&self, row: &Bitset) -> Option<usize> {
        self.full.iter().position(|c| cap(c, row))
    }

    /// `cap(E, x̃)`.
    pub fn covers(&self, row: &Bitset) -> bool {
        self.find_covering(row).is_some()
    }

    fn find_identical(&self, conditions: &[usize]) -> Option<usize> {
        self.full.iter().position(|c| c == conditions)
    }
}

/// Extends `selected` with conditions drawn uniformly without replacement
/// from `candidates \ selected` until it has `min(l, |candidates|)` entries.
/// Output is ascending.
pub fn random_append(selected: &[usize], candidates: &[usize], l: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = selected.to_vec();
    let target = l.min(candidates.len());
    if out.len() < target {
        let pool: Vec<usize> = candidates.iter().copied().filter(|c| !selected.contains(c)).collect();
        out.extend(pool.choose_multiple(rng, target - out.len()).copied());
    }
    out.sort_unstable();
    out
}

/// True iff some rule of `model` is contained in `conditions` and every
/// condition holds on `row`.
pub fn verify_faithful(conditions: &[usize], model: &DecisionSet, row: &Bitset) -> bool {
    let mut sorted = conditions.to_vec();
    sorted.sort_unstable();
    cap(&sorted, row) && model.rules().iter().any(|r| r.is_subset_of(&sorted))
}

/// A freshly built explanation together with the support it had straight
/// out of the solver, before any random fill.
#[derive(Clone, Debug)]
pub struct Generated {
    pub explanation: Explanation,
    pub solver_supp: usize,
    /// Whether the coverage search proved optimality (exact methods only).
    pub optimal: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub label: u8,
    /// Index into the defender's history.
    pub explanation: Option<usize>,
    pub reused: bool,
    /// Seconds spent building a new explanation.
    pub elapsed: Option<f64>,
    /// For exact methods, whether the coverage search proved optimality.
    pub optimal: Option<bool>,
}

/// Owns the released history for one run. `model` must be expressed over
/// `data`'s vocabulary (see [`DecisionSet::rebase`]).
#[derive(Debug)]
pub struct Defender<'a> {
    model: &'a DecisionSet,
    data: &'a BinarizedDataset,
    rule_supp: Vec<usize>,
    config: DefenseConfig,
    rng: ChaCha8Rng,
    history: ExplanationHistory,
}

impl<'a> Defender<'a> {
    pub fn new(model: &'a DecisionSet, data: &'a BinarizedDataset, config: DefenseConfig) -> Result<Self> {
        if model.vocabulary().len() != data.m()
            || model
                .vocabulary()
                .iter()
                .zip(data.conditions())
                .any(|(a, b)| !a.same_as(b))
        {
            return Err(Error::Model(
                "model vocabulary differs from the dataset vocabulary".into(),
            ));
        }
        let rule_supp = model.rule_coverage(data).iter().map(|c| c.count).collect();
        Ok(Defender {
            model,
            data,
            rule_supp,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            history: ExplanationHistory::new(),
        })
    }

    pub fn config(&self) -> &DefenseConfig {
        &self.config
    }

    pub fn history(&self) -> &ExplanationHistory {
        &self.history
    }

    pub fn model(&self) -> &DecisionSet {
        self.model
    }

    pub fn data(&self) -> &BinarizedDataset {
        self.data
    }

    /// Satisfied rule with the smallest training support, ties by index.
    pub fn base_rule(&self, row: &Bitset) -> Option<usize> {
        let (_, fired) = self.model.predict(row);
        fired.into_iter().min_by_key(|&r| (self.rule_supp[r], r))
    }

    /// Labels `query` and releases (or reuses) an explanation for positives.
    pub fn answer(&mut self, query_id: usize, query: &[f64]) -> Answer {
        let row = self.data.binarize_query(query);
        let Some(rule) = self.base_rule(&row) else {
            return Answer {
                label: 0,
                explanation: None,
                reused: false,
                elapsed: None,
                optimal: None,
            };
        };
        let method = self.config.method;
        if method == DefenseMethod::None {
            return Answer {
                label: 1,
                explanation: None,
                reused: false,
                elapsed: None,
                optimal: None,
            };
        }
        if method.is_optimizing() {
            if let Some(i) = self.history.find_covering(&row) {
                return Answer {
                    label: 1,
                    explanation: Some(i),
                    reused: true,
                    elapsed: None,
                    optimal: None,
                };
            }
        }
        let start = Instant::now();
        let generated = self.generate(query_id, &row, rule);
        let elapsed = start.elapsed().as_secs_f64();
        let optimal = generated.optimal;
        let e = generated.explanation;
        // baselines may hand out the same condition set again; keep E a set
        if let Some(i) = self.history.find_identical(&e.conditions()) {
            return Answer {
                label: 1,
                explanation: Some(i),
                reused: true,
                elapsed: Some(elapsed),
                optimal,
            };
        }
        let i = self.history.push(e);
        Answer {
            label: 1,
            explanation: Some(i),
            reused: false,
            elapsed: Some(elapsed),
            optimal,
        }
    }

    /// Builds a new explanation for a query whose binarized form is `row`,
    /// using satisfied rule `rule` as the base. Does not touch the history.
    pub fn generate(&mut self, query_id: usize, row: &Bitset, rule: usize) -> Generated {
        let e_base = self.model.rule(rule).conditions().to_vec();
        let l = self.config.max_len;
        let method = self.config.method;
        let candidates: Vec<usize> = row.iter().filter(|j| !e_base.contains(j)).collect();
        let base = self.data.support(&e_base, None);

        let (e_add, solver_supp, optimal) = match method {
            DefenseMethod::Greedy | DefenseMethod::Exact | DefenseMethod::ExactRa if l > 0 => {
                let inst = CoverageInstance::build(&base, &candidates, self.data);
                let (sol, optimal) = if method == DefenseMethod::Greedy {
                    (greedy(&inst, l), None)
                } else {
                    let s = exact(&inst, l, self.config.node_limit);
                    let opt = s.optimal;
                    (s, Some(opt))
                };
                let chosen = sol.condition_ids(&inst);
                let solver_supp = base.count - sol.covered;
                let e_add = if method == DefenseMethod::Exact {
                    chosen
                } else {
                    random_append(&chosen, &candidates, l, &mut self.rng)
                };
                (e_add, solver_supp, optimal)
            }
            DefenseMethod::Random => (random_append(&[], &candidates, l, &mut self.rng), base.count, None),
            _ => (Vec::new(), base.count, None),
        };

        let supp = if e_add.is_empty() {
            base.count
        } else {
            self.data.support(&e_add, Some(&base.bits)).count
        };
        Generated {
            explanation: Explanation {
                e_base,
                e_add,
                method,
                query_id,
                supp,
            },
            solver_supp,
            optimal,
        }
    }
}

/// One line of the explanation stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub query_id: usize,
    pub label: u8,
    pub method: DefenseMethod,
    pub e_base: Option<Vec<usize>>,
    pub e_add: Option<Vec<usize>>,
    pub supp: Option<usize>,
    pub reused: bool,
}

impl ExplanationRecord {
    pub fn new(query_id: usize, answer: &Answer, method: DefenseMethod, history: &ExplanationHistory) -> Self {
        let e = answer.explanation.map(|i| history.get(i));
        ExplanationRecord {
            query_id,
            label: answer.label,
            method,
            e_base: e.map(|e| e.e_base.clone()),
            e_add: e.map(|e| e.e_add.clone()),
            supp: e.map(|e| e.supp),
            reused: answer.reused,
        }
    }
}
