//! Additive models with piecewise-constant shape functions, and their exact
//! conversion to a decision set.
//!
//! A shape on feature `j` with interior cuts `c_0 < … < c_{B-2}` has `B`
//! bins; bin `k` holds `b_k < x ≤ b_{k+1}` with `b_0 = -∞` and `b_B = +∞`.
//! A model predicts 1 when its linear score is at least the decision
//! threshold. The link is monotone, so thresholding the score and
//! thresholding the response are the same decision.

use serde::{Deserialize, Serialize};

use super::decision_set::{DecisionSet, ModelMetadata};
use crate::dataset::{Condition, Op};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Identity,
    InverseLogistic,
}

impl Link {
    pub fn apply(self, score: f64) -> f64 {
        match self {
            Link::Identity => score,
            Link::InverseLogistic => 1.0 / (1.0 + (-score).exp()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeFunction {
    pub feature: usize,
    pub cuts: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ShapeFunction {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    /// Index of the bin holding `x`.
    #[inline]
    pub fn bin_of(&self, x: f64) -> usize {
        self.cuts.partition_point(|&c| c < x)
    }

    fn weight_range(&self) -> f64 {
        let (lo, hi) = self.min_max();
        hi - lo
    }

    fn min_max(&self) -> (f64, f64) {
        self.weights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
                (lo.min(w), hi.max(w))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GamModel {
    pub intercept: f64,
    pub shapes: Vec<ShapeFunction>,
    pub link: Link,
    pub threshold: f64,
    pub metadata: ModelMetadata,
}

impl GamModel {
    pub fn new(intercept: f64, shapes: Vec<ShapeFunction>, link: Link, threshold: f64) -> Result<Self> {
        let g = GamModel {
            intercept,
            shapes,
            link,
            threshold,
            metadata: ModelMetadata::default(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let mut features: Vec<usize> = self.shapes.iter().map(|s| s.feature).collect();
        features.sort_unstable();
        if features.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Model("two shape functions on the same feature".into()));
        }
        for s in &self.shapes {
            if s.weights.len() != s.cuts.len() + 1 {
                return Err(Error::Model(format!(
                    "feature {}: {} weights for {} cuts (need cuts + 1)",
                    s.feature,
                    s.weights.len(),
                    s.cuts.len()
                )));
            }
            if s.cuts.iter().any(|c| !c.is_finite()) || s.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Model(format!("feature {}: non-finite cut or weight", s.feature)));
            }
            if s.cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Model(format!(
                    "feature {}: bin edges must be strictly increasing",
                    s.feature
                )));
            }
        }
        if !self.intercept.is_finite() || !self.threshold.is_finite() {
            return Err(Error::Model("intercept and threshold must be finite".into()));
        }
        Ok(())
    }

    /// Linear score `ω_0 + Σ_j f_j(x_j)`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut s = self.intercept;
        for shape in &self.shapes {
            s += shape.weights[shape.bin_of(x[shape.feature])];
        }
        s
    }

    /// Score of a full bin assignment, `bins[i]` indexing `shapes[i]`.
    /// Summation order matches [`GamModel::score`] so both agree bit for bit.
    pub fn score_bins(&self, bins: &[usize]) -> f64 {
        let mut s = self.intercept;
        for (shape, &k) in self.shapes.iter().zip(bins) {
            s += shape.weights[k];
        }
        s
    }

    pub fn response(&self, x: &[f64]) -> f64 {
        self.link.apply(self.score(x))
    }

    pub fn predict(&self, x: &[f64], tau: f64) -> u8 {
        u8::from(self.score(x) >= tau)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConversionOptions {
    /// Close a branch once every completion shares one prediction.
    pub early_stop: bool,
    /// Maximum number of leaves explored before giving up.
    pub leaf_cap: usize,
}

impl Default for ConversionOptions {
    fn default() -> Self {
        ConversionOptions {
            early_stop: true,
            leaf_cap: 1_000_000,
        }
    }
}

/// Expands the GAM into a multi-way tree over bins and returns the positive
/// leaf paths as a decision set. Positive means `score ≥ tau`.
pub fn gam_to_decision_set(g: &GamModel, tau: f64, opts: ConversionOptions) -> Result<DecisionSet> {
    g.validate()?;
    let mut vocabulary = Vec::new();
    let mut offsets = Vec::with_capacity(g.shapes.len());
    for s in &g.shapes {
        offsets.push(vocabulary.len());
        for &c in &s.cuts {
            vocabulary.push(Condition::new(s.feature, Op::Le, c));
            vocabulary.push(Condition::new(s.feature, Op::Gt, c));
        }
    }

    // larger-impact shapes first
    let mut order: Vec<usize> = (0..g.shapes.len()).collect();
    order.sort_by(|&a, &b| {
        g.shapes[b]
            .weight_range()
            .total_cmp(&g.shapes[a].weight_range())
            .then(a.cmp(&b))
    });
    let p = order.len();
    let mut suffix_min = vec![0.0; p + 1];
    let mut suffix_max = vec![0.0; p + 1];
    for d in (0..p).rev() {
        let (lo, hi) = g.shapes[order[d]].min_max();
        suffix_min[d] = suffix_min[d + 1] + lo;
        suffix_max[d] = suffix_max[d + 1] + hi;
    }
    let scale = 1.0
        + g.intercept.abs()
        + tau.abs()
        + g.shapes
            .iter()
            .map(|s| s.weights.iter().fold(0.0f64, |m, w| m.max(w.abs())))
            .sum::<f64>();
    let margin = 1e-9 * scale;

    let mut ctx = Expansion {
        g,
        tau,
        opts,
        order: &order,
        offsets: &offsets,
        suffix_min: &suffix_min,
        suffix_max: &suffix_max,
        margin,
        bins: vec![0; g.shapes.len()],
        leaves: 0,
        rules: Vec::new(),
    };
    ctx.expand(0, g.intercept)?;
    let rules = ctx.rules;
    Ok(DecisionSet::new(vocabulary, rules)?.with_metadata(g.metadata.clone()))
}

struct Expansion<'a> {
    g: &'a GamModel,
    tau: f64,
    opts: ConversionOptions,
    order: &'a [usize],
    offsets: &'a [usize],
    suffix_min: &'a [f64],
    suffix_max: &'a [f64],
    margin: f64,
    bins: Vec<usize>,
    leaves: usize,
    rules: Vec<Vec<usize>>,
}

impl Expansion<'_> {
    fn path_conditions(&self, depth: usize) -> Vec<usize> {
        let mut ids = Vec::new();
        for &s in &self.order[..depth] {
            let shape = &self.g.shapes[s];
            let k = self.bins[s];
            if k > 0 {
                ids.push(self.offsets[s] + 2 * (k - 1) + 1);
            }
            if k + 1 < shape.bins() {
                ids.push(self.offsets[s] + 2 * k);
            }
        }
        ids
    }

    fn close(&mut self, depth: usize, positive: bool) -> Result<()> {
        self.leaves += 1;
        if self.leaves > self.opts.leaf_cap {
            return Err(Error::LeafCap {
                cap: self.opts.leaf_cap,
            });
        }
        if positive {
            let ids = self.path_conditions(depth);
            if ids.is_empty() {
                return Err(Error::Model(
                    "GAM predicts positive everywhere; no rule can express it".into(),
                ));
            }
            self.rules.push(ids);
        }
        Ok(())
    }

    fn expand(&mut self, depth: usize, partial: f64) -> Result<()> {
        let p = self.order.len();
        if depth == p {
            let score = self.g.score_bins(&self.bins);
            return self.close(depth, score >= self.tau);
        }
        if self.opts.early_stop {
            let lo = partial + self.suffix_min[depth];
            let hi = partial + self.suffix_max[depth];
            if hi < self.tau - self.margin {
                return self.close(depth, false);
            }
            // an empty path cannot become a rule, so keep splitting
            if lo >= self.tau + self.margin && !self.path_conditions(depth).is_empty() {
                return self.close(depth, true);
            }
        }
        let s = self.order[depth];
        for k in 0..self.g.shapes[s].bins() {
            self.bins[s] = k;
            let w = self.g.shapes[s].weights[k];
            self.expand(depth + 1, partial + w)?;
        }
        self.bins[s] = 0;
        Ok(())
    }
}

/// One representative raw value per bin of `shape`.
pub fn bin_representatives(shape: &ShapeFunction) -> Vec<f64> {
    let c = &shape.cuts;
    if c.is_empty() {
        return vec![0.0];
    }
    let mut reps = Vec::with_capacity(c.len() + 1);
    reps.push(c[0] - 1.0);
    for w in c.windows(2) {
        reps.push((w[0] + w[1]) / 2.0);
    }
    reps.push(c[c.len() - 1] + 1.0);
    reps
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(feature: usize, cuts: &[f64], weights: &[f64]) -> ShapeFunction {
        ShapeFunction {
            feature,
            cuts: cuts.to_vec(),
            weights: weights.to_vec(),
        }
    }

    #[test]
    fn constant_score_from_intercept() {
        let g = GamModel::new(0.7, vec![shape(0, &[1.0, 2.0], &[0.0, 0.0, 0.0])], Link::Identity, 0.0).unwrap();
        for x in [-5.0, 1.5, 99.0] {
            assert_eq!(g.score(&[x]), 0.7);
        }
    }

    #[test]
    fn one_step_function() {
        let g = GamModel::new(0.5, vec![shape(0, &[5.0], &[-1.0, 1.0])], Link::Identity, 0.0).unwrap();
        assert_eq!(g.score(&[4.0]), 0.5 - 1.0);
        assert_eq!(g.score(&[5.0]), 0.5 - 1.0);
        assert_eq!(g.score(&[6.0]), 0.5 + 1.0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(GamModel::new(0.0, vec![shape(0, &[2.0, 1.0], &[0.0, 0.0, 0.0])], Link::Identity, 0.0).is_err());
        assert!(GamModel::new(0.0, vec![shape(0, &[1.0], &[0.0])], Link::Identity, 0.0).is_err());
        assert!(GamModel::new(
            0.0,
            vec![shape(0, &[1.0], &[0.0, 1.0]), shape(0, &[2.0], &[0.0, 1.0])],
            Link::Identity,
            0.0
        )
        .is_err());
    }

    #[test]
    fn random_gam_matches_bin_search_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let shapes: Vec<ShapeFunction> = (0..3)
            .map(|j| {
                let mut cuts: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..100.0)).collect();
                cuts.sort_by(f64::total_cmp);
                shape(j, &cuts, &(0..4).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>())
            })
            .collect();
        let g = GamModel::new(0.3, shapes, Link::InverseLogistic, 0.0).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-10.0..110.0)).collect();
            let mut expect = 0.3;
            for s in &g.shapes {
                // linear scan over explicit edges
                let mut edges = vec![f64::NEG_INFINITY];
                edges.extend(&s.cuts);
                edges.push(f64::INFINITY);
                let v = x[s.feature];
                let hits: Vec<usize> = (0..s.bins()).filter(|&k| edges[k] < v && v <= edges[k + 1]).collect();
                assert_eq!(hits.len(), 1);
                expect += s.weights[hits[0]];
            }
            assert_eq!(g.score(&x), expect);
            let r = g.response(&x);
            assert!(r > 0.0 && r < 1.0);
        }
    }

    #[test]
    fn single_active_bin_gives_single_rule() {
        let g = GamModel::new(
            0.0,
            vec![
                shape(0, &[1.0, 2.0], &[0.0, 0.0, 0.0]),
                shape(1, &[10.0, 20.0], &[0.0, 0.0, 3.0]),
            ],
            Link::Identity,
            1.0,
        )
        .unwrap();
        let f = gam_to_decision_set(&g, 1.0, ConversionOptions::default()).unwrap();
        assert_eq!(f.rules().len(), 1);
        let conds: Vec<Condition> = f.rule(0).conditions().iter().map(|&j| f.vocabulary()[j]).collect();
        assert_eq!(conds, vec![Condition::new(1, Op::Gt, 20.0)]);
    }

    #[test]
    fn never_positive_gives_empty_set() {
        let g = GamModel::new(-5.0, vec![shape(0, &[1.0], &[0.0, 1.0])], Link::Identity, 0.0).unwrap();
        let f = gam_to_decision_set(&g, 0.0, ConversionOptions::default()).unwrap();
        assert!(f.rules().is_empty());
        assert_eq!(f.predict_raw(&[5.0]), 0);
    }

    #[test]
    fn leaf_cap_is_enforced() {
        let shapes = (0..4)
            .map(|j| shape(j, &[1.0, 2.0, 3.0], &[0.0, 1.0, -1.0, 0.5]))
            .collect();
        let g = GamModel::new(0.0, shapes, Link::Identity, 0.25).unwrap();
        let opts = ConversionOptions {
            early_stop: false,
            leaf_cap: 10,
        };
        assert!(matches!(
            gam_to_decision_set(&g, 0.25, opts),
            Err(Error::LeafCap { cap: 10 })
        ));
    }

    #[test]
    fn random_two_feature_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let shapes: Vec<ShapeFunction> = (0..2)
                .map(|j| {
                    let a = rng.gen_range(0.0..50.0);
                    shape(
                        j,
                        &[a, a + rng.gen_range(1.0..50.0)],
                        &(0..3).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
                    )
                })
                .collect();
            let tau = rng.gen_range(-0.5..0.5);
            let g = GamModel::new(0.0, shapes, Link::Identity, tau).unwrap();
            let f = match gam_to_decision_set(&g, tau, ConversionOptions::default()) {
                Ok(f) => f,
                Err(Error::Model(_)) => continue, // positive everywhere
                Err(e) => panic!("{e}"),
            };
            for &a in &bin_representatives(&g.shapes[0]) {
                for &b in &bin_representatives(&g.shapes[1]) {
                    let x = [a, b];
                    assert_eq!(f.predict_raw(&x), u8::from(g.score(&x) >= tau));
                }
            }
        }
    }
}
