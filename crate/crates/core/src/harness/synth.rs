use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Condition, Feature, FeatureSchema, Op, RawDataset};
use crate::error::{Error, Result};
use crate::models::{DecisionSet, ModelMetadata};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Rows before the train/test split.
    pub n: usize,
    /// Features in total; the last `categorical` of them are categorical.
    pub p: usize,
    pub categorical: usize,
    pub categories: usize,
    pub rules: usize,
    pub rule_len: usize,
    /// Target fraction of rows labeled positive.
    pub positive_rate: f64,
    /// Continuous features take integer values in `0..=value_max`.
    pub value_max: u32,
    pub test_fraction: f64,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 1000,
            p: 10,
            categorical: 2,
            categories: 4,
            rules: 3,
            rule_len: 2,
            positive_rate: 0.3,
            value_max: 100,
            test_fraction: 0.2,
            seed: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub schema: FeatureSchema,
    pub train: RawDataset,
    pub test: RawDataset,
    pub model: DecisionSet,
}

/// Positive rate on `rows` of the rule set with per-condition coverage `a`.
fn planted(sorted_cols: &[Vec<f64>], layout: &[Vec<(usize, Op)>], a: f64, value_max: f64) -> Vec<Vec<Condition>> {
    layout
        .iter()
        .map(|rule| {
            rule.iter()
                .map(|&(f, op)| {
                    let col = &sorted_cols[f];
                    let n = col.len();
                    // the value at the boundary quantile, then the half-step above it
                    let q = if op == Op::Le { a } else { 1.0 - a };
                    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
                    let t = (col[idx].floor() + 0.5).clamp(0.5, value_max - 0.5);
                    Condition::new(f, op, t)
                })
                .collect()
        })
        .collect()
}

fn positive_rate(rows: &[Vec<f64>], rules: &[Vec<Condition>]) -> f64 {
    let hits = rows
        .iter()
        .filter(|x| rules.iter().any(|r| r.iter().all(|c| c.holds_on(x))))
        .count();
    hits as f64 / rows.len() as f64
}

/// Samples rows from skewed per-feature marginals, plants a random decision
/// set over the continuous features whose positive rate is bisected toward
/// the target, labels every row with it and splits train/test.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Synthetic> {
    let continuous = spec.p.saturating_sub(spec.categorical);
    if spec.n < 2 || continuous == 0 || spec.rule_len == 0 || spec.rules == 0 {
        return Err(Error::Config(
            "synthetic: need n >= 2, at least one continuous feature and non-empty rules".into(),
        ));
    }
    if spec.rule_len > continuous {
        return Err(Error::Config(
            "synthetic: rule_len exceeds the number of continuous features".into(),
        ));
    }
    if spec.categorical > 0 && spec.categories < 2 {
        return Err(Error::Config(
            "synthetic: categorical features need at least 2 categories".into(),
        ));
    }
    if !(spec.positive_rate > 0.0 && spec.positive_rate < 1.0)
        || !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)
    {
        return Err(Error::Config(
            "synthetic: positive_rate and test_fraction must lie in (0, 1)".into(),
        ));
    }
    if spec.value_max < 2 {
        return Err(Error::Config("synthetic: value_max must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vmax = spec.value_max as f64;

    let mut features = Vec::with_capacity(spec.p);
    for j in 0..continuous {
        features.push(Feature::continuous(format!("x{j}"), 0.0, vmax));
    }
    for j in 0..spec.categorical {
        features.push(Feature::categorical(
            format!("c{j}"),
            (0..spec.categories).map(|k| format!("k{k}")),
        ));
    }
    let schema = FeatureSchema::new(features)?;

    let shapes: Vec<f64> = (0..continuous).map(|_| rng.gen_range(0.5..2.0)).collect();
    let cat_weights: Vec<Vec<f64>> = (0..spec.categorical)
        .map(|_| (0..spec.categories).map(|_| rng.gen_range(0.2..1.0)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| {
            let mut x: Vec<f64> = shapes
                .iter()
                .map(|&g| (rng.gen::<f64>().powf(g) * (vmax + 1.0)).floor().min(vmax))
                .collect();
            for w in &cat_weights {
                let total: f64 = w.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut k = 0;
                while k + 1 < w.len() && u >= w[k] {
                    u -= w[k];
                    k += 1;
                }
                x.push(k as f64);
            }
            x
        })
        .collect();

    let layout: Vec<Vec<(usize, Op)>> = (0..spec.rules)
        .map(|_| {
            let mut fs: Vec<usize> = (0..continuous).collect();
            fs.shuffle(&mut rng);
            let mut rule: Vec<(usize, Op)> = fs[..spec.rule_len]
                .iter()
                .map(|&f| (f, if rng.gen_bool(0.5) { Op::Le } else { Op::Gt }))
                .collect();
            rule.sort_by_key(|&(f, _)| f);
            rule
        })
        .collect();
    let sorted_cols: Vec<Vec<f64>> = (0..continuous)
        .map(|j| {
            let mut c: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..40 {
        let mid = (lo + hi) / 2.0;
        if positive_rate(&rows, &planted(&sorted_cols, &layout, mid, vmax)) < spec.positive_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let below = planted(&sorted_cols, &layout, lo, vmax);
    let above = planted(&sorted_cols, &layout, hi, vmax);
    let pick = if (positive_rate(&rows, &below) - spec.positive_rate).abs()
        <= (positive_rate(&rows, &above) - spec.positive_rate).abs()
    {
        below
    } else {
        above
    };

    let mut vocabulary: Vec<Condition> = Vec::new();
    let mut rule_ids = Vec::new();
    for rule in &pick {
        let ids = rule
            .iter()
            .map(|c| match vocabulary.iter().position(|v| v.same_as(c)) {
                Some(i) => i,
                None => {
                    vocabulary.push(*c);
                    vocabulary.len() - 1
                }
            })
            .collect();
        rule_ids.push(ids);
    }
    let model = DecisionSet::new(vocabulary, rule_ids)?.with_metadata(ModelMetadata {
        name: Some("synthetic".into()),
        seed: Some(seed),
        provenance: Some(format!(
            "planted; n={} p={} rules={} rule_len={}",
            spec.n, spec.p, spec.rules, spec.rule_len
        )),
    });

    let labels: Vec<u8> = rows.iter().map(|x| model.predict_raw(x)).collect();
    let mut order: Vec<usize> = (0..spec.n).collect();
    order.shuffle(&mut rng);
    let n_test = ((spec.n as f64 * spec.test_fraction).round() as usize).clamp(1, spec.n - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let take = |idx: &[usize]| -> Result<RawDataset> {
        RawDataset::new(
            schema.clone(),
            idx.iter().map(|&i| rows[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    Ok(Synthetic {
        train: take(&train_idx)?,
        test: take(&test_idx)?,
        schema,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_the_planted_model() {
        let s = generate_synthetic(
            &SyntheticSpec {
                rules: 3,
                ..SyntheticSpec::default()
            },
            1,
        )
        .unwrap();
        assert_eq!(s.train.len() + s.test.len(), 1000);
        assert_eq!(s.test.len(), 200);
        assert_eq!(s.model.rules().len(), 3);
        for d in [&s.train, &s.test] {
            for (x, &y) in d.rows.iter().zip(&d.labels) {
                assert_eq!(s.model.predict_raw(x), y);
            }
        }
    }

    #[test]
    fn positive_rate_near_target_over_seeds() {
        let spec = SyntheticSpec::default();
        for seed in 0..20 {
            let s = generate_synthetic(&spec, seed).unwrap();
            let all: Vec<u8> = s.train.labels.iter().chain(&s.test.labels).copied().collect();
            let rate = all.iter().map(|&y| y as f64).sum::<f64>() / all.len() as f64;
            assert!((rate - spec.positive_rate).abs() <= 0.05, "seed {seed}: rate {rate}");
        }
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec {
            n: 300,
            ..SyntheticSpec::default()
        };
        let a = generate_synthetic(&spec, 9).unwrap();
        let b = generate_synthetic(&spec, 9).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.model, b.model);
        let c = generate_synthetic(&spec, 10).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn rejects_impossible_specs() {
        assert!(generate_synthetic(
            &SyntheticSpec {
                p: 2,
                categorical: 2,
                ..SyntheticSpec::default()
            },
            0
        )
        .is_err());
        assert!(generate_synthetic(
            &SyntheticSpec {
                rule_len: 9,
                ..SyntheticSpec::default()
            },
            0
        )
        .is_err());
        assert!(generate_synthetic(
            &SyntheticSpec {
                positive_rate: 1.0,
                ..SyntheticSpec::default()
            },
            0
        )
        .is_err());
    }
}
