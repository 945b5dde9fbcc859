//! The extraction attacker: query strategies, importance tracking, and the
//! CART surrogate combined with released explanations.

mod cart;
mod marginals;

pub use cart::{train_cart, Node, SplitTest, SurrogateTree, DEFAULT_MAX_DEPTH};
pub use marginals::{FeatureMarginal, MarginalModel};

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[cfg(test)]
use crate::dataset::cap;
use crate::dataset::{BinarizedDataset, Condition, FeatureKind, FeatureSchema, Op};
use crate::defense::{Explanation, ExplanationHistory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackStrategy {
    Random,
    Committee,
    Perturbation,
    Replay,
}

impl AttackStrategy {
    pub const ADAPTIVE: [AttackStrategy; 3] = [
        AttackStrategy::Random,
        AttackStrategy::Committee,
        AttackStrategy::Perturbation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackStrategy::Random => "random",
            AttackStrategy::Committee => "committee",
            AttackStrategy::Perturbation => "perturbation",
            AttackStrategy::Replay => "replay",
        }
    }
}

impl fmt::Display for AttackStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [AttackStrategy::Replay]
            .into_iter()
            .chain(AttackStrategy::ADAPTIVE)
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown attack strategy {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackerConfig {
    pub strategy: AttackStrategy,
    pub seed: u64,
    /// Features perturbed per explanation.
    pub k: usize,
    /// Step past a boundary; per-feature value precision when unset.
    pub delta: Option<f64>,
    pub committee_size: usize,
    pub committee_candidates: usize,
    pub retry_cap: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            strategy: AttackStrategy::Perturbation,
            seed: 0,
            k: 2,
            delta: None,
            committee_size: 5,
            committee_candidates: 32,
            retry_cap: 10_000,
            max_depth: DEFAULT_MAX_DEPTH,
            min_leaf: 1,
        }
    }
}

/// Where a query came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum QuerySource {
    Random { fallback: bool },
    Committee { disagreement_pairs: usize },
    Perturbation { feature: usize, parent: usize },
    Replay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub values: Vec<f64>,
    pub source: QuerySource,
}

fn key(q: &[f64]) -> Vec<u64> {
    q.iter().map(|v| v.to_bits()).collect()
}

/// Queries already asked, for dedup.
#[derive(Clone, Debug, Default)]
pub struct AskedSet(HashSet<Vec<u64>>);

impl AskedSet {
    pub fn contains(&self, q: &[f64]) -> bool {
        self.0.contains(&key(q))
    }

    pub fn insert(&mut self, q: &[f64]) -> bool {
        self.0.insert(key(q))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Number of explanations in `E` with at least one condition on each
/// feature.
pub fn update_importance(history: &ExplanationHistory, conditions: &[Condition], features: usize) -> Vec<usize> {
    let mut counts = vec![0; features];
    for e in history.entries() {
        add_importance(&mut counts, e, conditions);
    }
    counts
}

fn explanation_features(e: &Explanation, conditions: &[Condition]) -> Vec<usize> {
    let mut fs: Vec<usize> = e.conditions().iter().map(|&j| conditions[j].feature).collect();
    fs.sort_unstable();
    fs.dedup();
    fs
}

fn add_importance(counts: &mut [usize], e: &Explanation, conditions: &[Condition]) {
    for f in explanation_features(e, conditions) {
        counts[f] += 1;
    }
}

/// Draws from `marginals` until a query is unasked and outside every
/// released explanation. After `retry_cap` draws the last one is returned
/// with the fallback flag set.
pub fn random_query<R: Rng>(
    marginals: &MarginalModel,
    data: &BinarizedDataset,
    history: &ExplanationHistory,
    asked: &AskedSet,
    retry_cap: usize,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    let mut q = marginals.sample(rng);
    for _ in 1..retry_cap.max(1) {
        if !asked.contains(&q) && !history.covers(&data.binarize_query(&q)) {
            return (q, false);
        }
        q = marginals.sample(rng);
    }
    let ok = !asked.contains(&q) && !history.covers(&data.binarize_query(&q));
    (q, !ok)
}

/// Number of committee member pairs that disagree on `x`.
pub fn disagreement(committee: &[SurrogateTree], x: &[f64]) -> usize {
    let ones = committee.iter().filter(|t| t.predict(x) == 1).count();
    ones * (committee.len() - ones)
}

/// Index of the candidate with the most disagreeing pairs, first on ties.
pub fn committee_query(candidates: &[Vec<f64>], committee: &[SurrogateTree]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let d = disagreement(committee, c);
        if best.is_none_or(|(_, b)| d > b) {
            best = Some((i, d));
        }
    }
    best
}

/// A perturbed query waiting in the pool.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub values: Vec<f64>,
    pub feature: usize,
    pub parent: usize,
}

/// Candidates just past the boundary of `conditions` (an explanation of
/// `query`) on its `k` most important features. Counts rank features
/// (descending, then feature index). On a continuous feature an upper bound
/// `x ≤ u` gives `u + δ` and a lower bound `x > t` gives `t`; on a
/// categorical one `x == k` gives the neighbouring categories and `x != k`
/// gives `k`. Values are clipped into the feature's bounds.
pub fn perturbation_queries(
    query: &[f64],
    conditions: &[Condition],
    counts: &[usize],
    k: usize,
    delta: &[f64],
    schema: &FeatureSchema,
    parent: usize,
) -> Vec<Candidate> {
    let mut features: Vec<usize> = conditions.iter().map(|c| c.feature).collect();
    features.sort_unstable();
    features.dedup();
    features.sort_by_key(|&f| (std::cmp::Reverse(counts[f]), f));

    let mut out = Vec::new();
    let mut push = |feature: usize, v: f64| {
        let mut values = query.to_vec();
        values[feature] = v;
        if values != query && !out.iter().any(|c: &Candidate| c.values == values) {
            out.push(Candidate {
                values,
                feature,
                parent,
            });
        }
    };
    let mut used = 0;
    for f in features {
        if used == k {
            break;
        }
        let feature = &schema.features[f];
        let (lo, hi) = feature.bounds();
        let on_f = conditions.iter().filter(|c| c.feature == f);
        match &feature.kind {
            FeatureKind::Continuous { .. } => {
                let lower = on_f
                    .clone()
                    .filter(|c| c.op == Op::Gt)
                    .map(|c| c.value)
                    .fold(f64::NEG_INFINITY, f64::max);
                let upper = on_f
                    .filter(|c| c.op == Op::Le)
                    .map(|c| c.value)
                    .fold(f64::INFINITY, f64::min);
                if lower.is_finite() {
                    push(f, lower.clamp(lo, hi));
                }
                if upper.is_finite() {
                    push(f, (upper + delta[f]).clamp(lo, hi));
                }
            }
            FeatureKind::Categorical { categories } => {
                if categories.len() < 2 {
                    continue;
                }
                for c in on_f {
                    match c.op {
                        Op::Eq => {
                            if c.value >= 1.0 {
                                push(f, c.value - 1.0);
                            }
                            if c.value + 1.0 <= hi {
                                push(f, c.value + 1.0);
                            }
                        }
                        Op::Ne => push(f, c.value),
                        _ => {}
                    }
                }
            }
        }
        used += 1;
    }
    out
}

/// Perturbed candidates grouped per feature. Popping takes the feature
/// with the highest current importance count (lowest feature index on
/// ties) and returns its oldest candidate.
#[derive(Clone, Debug, Default)]
pub struct QueryPool {
    queues: Vec<VecDeque<Candidate>>,
}

impl QueryPool {
    pub fn new(features: usize) -> Self {
        QueryPool {
            queues: vec![VecDeque::new(); features],
        }
    }

    pub fn push(&mut self, c: Candidate) {
        self.queues[c.feature].push_back(c);
    }

    pub fn len(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(VecDeque::is_empty)
    }

    pub fn pop(&mut self, counts: &[usize]) -> Option<Candidate> {
        let f = (0..self.queues.len())
            .filter(|&f| !self.queues[f].is_empty())
            .max_by_key(|&f| (counts[f], std::cmp::Reverse(f)))?;
        self.queues[f].pop_front()
    }
}

/// `ŷ = cap(E, x̃) ∨ f′(x)`.
pub fn surrogate_predict(history: &ExplanationHistory, tree: &SurrogateTree, data: &BinarizedDataset, x: &[f64]) -> u8 {
    u8::from(history.covers(&data.binarize_query(x)) || tree.predict(x) == 1)
}

/// Attacker state for one run.
#[derive(Debug)]
pub struct Attacker {
    config: AttackerConfig,
    schema: FeatureSchema,
    marginals: MarginalModel,
    delta: Vec<f64>,
    rng: ChaCha8Rng,
    asked: AskedSet,
    pool: QueryPool,
    counts: Vec<usize>,
    committee: Vec<SurrogateTree>,
    records: Vec<Vec<f64>>,
    labels: Vec<u8>,
    replay: VecDeque<Vec<f64>>,
    retrain_every: usize,
}

impl Attacker {
    pub fn new(
        config: AttackerConfig,
        schema: FeatureSchema,
        marginals: MarginalModel,
        retrain_every: usize,
    ) -> Result<Self> {
        if marginals.features().len() != schema.len() {
            return Err(Error::Config("marginals do not match the schema".into()));
        }
        if config.strategy == AttackStrategy::Committee && config.committee_size < 2 {
            return Err(Error::Config("committee needs at least 2 members".into()));
        }
        if config.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let delta = match config.delta {
            Some(d) if d > 0.0 => vec![d; schema.len()],
            Some(d) => return Err(Error::Config(format!("delta must be positive, got {d}"))),
            None => marginals.precision(),
        };
        let p = schema.len();
        Ok(Attacker {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            schema,
            marginals,
            delta,
            asked: AskedSet::default(),
            pool: QueryPool::new(p),
            counts: vec![0; p],
            committee: Vec::new(),
            records: Vec::new(),
            labels: Vec::new(),
            replay: VecDeque::new(),
            retrain_every: retrain_every.max(1),
        })
    }

    /// Switches to replaying `queries` in order.
    pub fn with_replay(mut self, queries: Vec<Vec<f64>>) -> Self {
        self.config.strategy = AttackStrategy::Replay;
        self.replay = queries.into();
        self
    }

    pub fn config(&self) -> &AttackerConfig {
        &self.config
    }

    pub fn importance(&self) -> &[usize] {
        &self.counts
    }

    pub fn records(&self) -> (&[Vec<f64>], &[u8]) {
        (&self.records, &self.labels)
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    fn random(&mut self, data: &BinarizedDataset, history: &ExplanationHistory) -> Query {
        let (values, fallback) = random_query(
            &self.marginals,
            data,
            history,
            &self.asked,
            self.config.retry_cap,
            &mut self.rng,
        );
        Query {
            values,
            source: QuerySource::Random { fallback },
        }
    }

    pub fn next_query(&mut self, data: &BinarizedDataset, history: &ExplanationHistory) -> Result<Query> {
        let q = match self.config.strategy {
            AttackStrategy::Replay => Query {
                values: self
                    .replay
                    .pop_front()
                    .ok_or_else(|| Error::Config("replay log is shorter than the query budget".into()))?,
                source: QuerySource::Replay,
            },
            AttackStrategy::Random => self.random(data, history),
            AttackStrategy::Committee => {
                if self.committee.is_empty() {
                    self.random(data, history)
                } else {
                    let candidates: Vec<Vec<f64>> = (0..self.config.committee_candidates.max(1))
                        .map(|_| self.random(data, history).values)
                        .collect();
                    let (i, d) = committee_query(&candidates, &self.committee).expect("non-empty candidates");
                    Query {
                        values: candidates[i].clone(),
                        source: QuerySource::Committee { disagreement_pairs: d },
                    }
                }
            }
            AttackStrategy::Perturbation => loop {
                match self.pool.pop(&self.counts) {
                    Some(c) => {
                        if self.asked.contains(&c.values) || history.covers(&data.binarize_query(&c.values)) {
                            continue;
                        }
                        break Query {
                            values: c.values,
                            source: QuerySource::Perturbation {
                                feature: c.feature,
                                parent: c.parent,
                            },
                        };
                    }
                    None => break self.random(data, history),
                }
            },
        };
        self.asked.insert(&q.values);
        Ok(q)
    }

    /// Records the defender's answer to query `query_id`. `explanation` is
    /// the explanation shown, and `new` says whether it was added to E by
    /// this answer.
    pub fn observe(
        &mut self,
        query_id: usize,
        query: &[f64],
        label: u8,
        explanation: Option<&Explanation>,
        new: bool,
        conditions: &[Condition],
    ) {
        self.records.push(query.to_vec());
        self.labels.push(label);
        if let Some(e) = explanation {
            if new {
                add_importance(&mut self.counts, e, conditions);
            }
            if self.config.strategy == AttackStrategy::Perturbation {
                let conds: Vec<Condition> = e.conditions().iter().map(|&j| conditions[j]).collect();
                for c in perturbation_queries(
                    query,
                    &conds,
                    &self.counts,
                    self.config.k,
                    &self.delta,
                    &self.schema,
                    query_id,
                ) {
                    if !self.asked.contains(&c.values) {
                        self.pool.push(c);
                    }
                }
            }
        }
        if self.config.strategy == AttackStrategy::Committee && self.labels.len().is_multiple_of(self.retrain_every) {
            self.retrain_committee();
        }
    }

    fn retrain_committee(&mut self) {
        let n = self.records.len();
        if n < 2 * self.config.committee_size {
            return;
        }
        self.committee = (0..self.config.committee_size)
            .map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| self.rng.gen_range(0..n)).collect();
                let recs: Vec<Vec<f64>> = idx.iter().map(|&i| self.records[i].clone()).collect();
                let labs: Vec<u8> = idx.iter().map(|&i| self.labels[i]).collect();
                train_cart(&recs, &labs, &self.schema, self.config.max_depth, self.config.min_leaf)
            })
            .collect();
    }

    /// Surrogate trained on every labeled query so far.
    pub fn train_surrogate(&self) -> SurrogateTree {
        train_cart(
            &self.records,
            &self.labels,
            &self.schema,
            self.config.max_depth,
            self.config.min_leaf,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BinarizationPolicy, Feature, RawDataset};
    use crate::defense::{DefenseMethod, Explanation};

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::continuous("income", 0.0, 10_000.0),
            Feature::continuous("age", 18.0, 90.0),
            Feature::categorical("purpose", ["car", "tv", "education"]),
        ])
        .unwrap()
    }

    fn explanation(e_base: Vec<usize>, e_add: Vec<usize>) -> Explanation {
        Explanation {
            e_base,
            e_add,
            method: DefenseMethod::BaseRule,
            query_id: 0,
            supp: 0,
        }
    }

    fn dataset(seed: u64) -> (RawDataset, BinarizedDataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                vec![
                    rng.gen_range(0..=100) as f64 * 100.0,
                    rng.gen_range(18..=90) as f64,
                    rng.gen_range(0..3) as f64,
                ]
            })
            .collect();
        let labels = vec![0; rows.len()];
        let raw = RawDataset::new(schema(), rows, labels).unwrap();
        let data = BinarizedDataset::binarize(&raw, &BinarizationPolicy::default(), &[]).unwrap();
        (raw, data)
    }

    #[test]
    fn upper_bound_steps_past_by_delta() {
        let conds = [Condition::new(0, Op::Le, 5000.0)];
        let c = perturbation_queries(
            &[3000.0, 40.0, 1.0],
            &conds,
            &[0, 0, 0],
            2,
            &[1.0, 1.0, 1.0],
            &schema(),
            0,
        );
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].values, vec![5001.0, 40.0, 1.0]);
    }

    #[test]
    fn two_sided_bound_gives_two_candidates() {
        let conds = [Condition::new(1, Op::Gt, 20.0), Condition::new(1, Op::Le, 30.0)];
        let c = perturbation_queries(
            &[5000.0, 25.0, 1.0],
            &conds,
            &[0, 0, 0],
            2,
            &[1.0, 1.0, 1.0],
            &schema(),
            0,
        );
        let ages: Vec<f64> = c.iter().map(|c| c.values[1]).collect();
        assert_eq!(ages, vec![20.0, 31.0]);
        for cand in &c {
            assert!(!conds.iter().all(|k| k.holds_on(&cand.values)));
        }
    }

    #[test]
    fn categorical_neighbours_and_clipping() {
        let conds = [Condition::new(2, Op::Eq, 0.0)];
        let c = perturbation_queries(&[1.0, 20.0, 0.0], &conds, &[0, 0, 0], 1, &[1.0; 3], &schema(), 0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].values[2], 1.0);
        let conds = [Condition::new(0, Op::Le, 9999.5)];
        let c = perturbation_queries(&[1.0, 20.0, 0.0], &conds, &[0, 0, 0], 1, &[10.0; 3], &schema(), 0);
        assert_eq!(c[0].values[0], 10_000.0);
    }

    #[test]
    fn top_k_by_counts() {
        let conds = [
            Condition::new(0, Op::Le, 5000.0),
            Condition::new(1, Op::Le, 50.0),
            Condition::new(2, Op::Eq, 1.0),
        ];
        let c = perturbation_queries(&[1000.0, 30.0, 1.0], &conds, &[5, 2, 7], 2, &[1.0; 3], &schema(), 3);
        let feats: Vec<usize> = c.iter().map(|c| c.feature).collect();
        assert_eq!(feats, vec![2, 2, 0]);
        assert!(c.iter().all(|c| c.parent == 3));
    }

    #[test]
    fn importance_counts_features_once_per_explanation() {
        let (_, data) = dataset(1);
        let mut h = ExplanationHistory::new();
        assert_eq!(update_importance(&h, data.conditions(), 3), vec![0, 0, 0]);
        let on = |f: usize| {
            (0..data.m())
                .filter(|&j| data.conditions()[j].feature == f)
                .take(2)
                .collect::<Vec<_>>()
        };
        let e = explanation(on(1), on(2));
        h.push(e);
        assert_eq!(update_importance(&h, data.conditions(), 3), vec![0, 1, 1]);
    }

    #[test]
    fn importance_matches_recount() {
        let (_, data) = dataset(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut h = ExplanationHistory::new();
        let mut incremental = vec![0; 3];
        for _ in 0..50 {
            let mut ids: Vec<usize> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(0..data.m())).collect();
            ids.sort_unstable();
            ids.dedup();
            let e = explanation(ids, vec![]);
            add_importance(&mut incremental, &e, data.conditions());
            h.push(e);
        }
        let mut recount = vec![0; 3];
        for e in h.entries() {
            for (f, count) in recount.iter_mut().enumerate() {
                if e.conditions().iter().any(|&j| data.conditions()[j].feature == f) {
                    *count += 1;
                }
            }
        }
        assert_eq!(incremental, recount);
        assert_eq!(update_importance(&h, data.conditions(), 3), recount);
    }

    #[test]
    fn random_queries_avoid_explanations() {
        let (raw, data) = dataset(3);
        let m = MarginalModel::estimate(&raw).unwrap();
        let mut h = ExplanationHistory::new();
        let low = data.find_condition(&data.conditions()[0]).unwrap();
        h.push(explanation(vec![low], vec![]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut asked = AskedSet::default();
        for _ in 0..1000 {
            let (q, fallback) = random_query(&m, &data, &h, &asked, 10_000, &mut rng);
            assert!(!fallback);
            assert!(!h.covers(&data.binarize_query(&q)));
            assert!(asked.insert(&q));
        }
    }

    #[test]
    fn random_query_flags_fallback() {
        let (raw, data) = dataset(4);
        let m = MarginalModel::estimate(&raw).unwrap();
        let mut h = ExplanationHistory::new();
        // x <= t or x > t covers everything
        h.push(explanation(vec![0], vec![]));
        h.push(explanation(vec![1], vec![]));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, fallback) = random_query(&m, &data, &h, &AskedSet::default(), 50, &mut rng);
        assert!(fallback);
        let mut empty_rng = ChaCha8Rng::seed_from_u64(5);
        let first = m.sample(&mut ChaCha8Rng::seed_from_u64(5));
        let (q, _) = random_query(
            &m,
            &data,
            &ExplanationHistory::new(),
            &AskedSet::default(),
            50,
            &mut empty_rng,
        );
        assert_eq!(q, first);
    }

    #[test]
    fn committee_prefers_disagreement() {
        let s = schema();
        let recs: Vec<Vec<f64>> = (0..10).map(|v| vec![v as f64 * 1000.0, 30.0, 0.0]).collect();
        let a = train_cart(&recs, &(0..10).map(|v| u8::from(v >= 5)).collect::<Vec<_>>(), &s, 5, 1);
        let b = train_cart(&recs, &(0..10).map(|v| u8::from(v >= 3)).collect::<Vec<_>>(), &s, 5, 1);
        let cands = vec![vec![500.0, 30.0, 0.0], vec![3500.0, 30.0, 0.0], vec![4000.0, 30.0, 0.0]];
        assert_eq!(committee_query(&cands, &[a.clone(), b]), Some((1, 1)));
        assert_eq!(committee_query(&cands, &[a.clone(), a]), Some((0, 0)));
    }

    #[test]
    fn pool_orders_by_importance_then_fifo() {
        let mut pool = QueryPool::new(3);
        let cand = |f: usize, p: usize| Candidate {
            values: vec![p as f64],
            feature: f,
            parent: p,
        };
        pool.push(cand(0, 1));
        pool.push(cand(2, 2));
        pool.push(cand(0, 3));
        let counts = [4, 0, 4];
        assert_eq!(pool.pop(&counts).unwrap().parent, 1);
        assert_eq!(pool.pop(&counts).unwrap().parent, 3);
        assert_eq!(pool.pop(&counts).unwrap().parent, 2);
        assert!(pool.pop(&counts).is_none());
    }

    #[test]
    fn surrogate_predict_is_disjunction() {
        let (raw, data) = dataset(6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let labels: Vec<u8> = raw.rows.iter().map(|_| rng.gen_range(0..2)).collect();
        let tree = train_cart(&raw.rows, &labels, &schema(), 3, 1);
        let mut h = ExplanationHistory::new();
        assert!(raw
            .rows
            .iter()
            .all(|x| surrogate_predict(&h, &tree, &data, x) == tree.predict(x)));
        let pair: Vec<usize> = data.satisfied_conditions(&raw.rows[0]).into_iter().take(2).collect();
        h.push(explanation(pair.clone(), vec![]));
        for x in &raw.rows {
            let covered = cap(&pair, &data.binarize_query(x));
            assert_eq!(
                surrogate_predict(&h, &tree, &data, x),
                u8::from(covered || tree.predict(x) == 1)
            );
        }
        let zero = SurrogateTree::constant(0);
        assert_eq!(surrogate_predict(&h, &zero, &data, &raw.rows[0]), 1);
    }

    #[test]
    fn attacker_never_repeats_a_query() {
        let (raw, data) = dataset(7);
        let m = MarginalModel::estimate(&raw).unwrap();
        for strategy in AttackStrategy::ADAPTIVE {
            let config = AttackerConfig {
                strategy,
                seed: 7,
                ..AttackerConfig::default()
            };
            let mut a = Attacker::new(config, schema(), m.clone(), 50).unwrap();
            let h = ExplanationHistory::new();
            let mut seen = AskedSet::default();
            for t in 0..200 {
                let q = a.next_query(&data, &h).unwrap();
                assert!(seen.insert(&q.values));
                a.observe(
                    t,
                    &q.values,
                    u8::from(q.values[0] < 3000.0),
                    None,
                    false,
                    data.conditions(),
                );
            }
        }
    }

    #[test]
    fn strategy_names() {
        for s in [
            AttackStrategy::Random,
            AttackStrategy::Committee,
            AttackStrategy::Perturbation,
            AttackStrategy::Replay,
        ] {
            assert_eq!(s.as_str().parse::<AttackStrategy>().unwrap(), s);
        }
        assert!("iwal".parse::<AttackStrategy>().is_err());
    }
}
