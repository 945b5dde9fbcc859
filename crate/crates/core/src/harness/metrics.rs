use serde::{Deserialize, Serialize};

use crate::attacker::SurrogateTree;
use crate::bitset::Bitset;
use crate::dataset::BinarizedDataset;
use crate::defense::ExplanationHistory;

/// Rows of `data` captured by any explanation in `history`.
pub fn covered_rows(history: &ExplanationHistory, data: &BinarizedDataset) -> Bitset {
    let mut covered = Bitset::new(data.n());
    for i in 0..history.len() {
        covered.union_with(&data.support(history.conditions(i), None).bits);
    }
    covered
}

/// Fraction of `positives` captured by `history`; `None` without positives.
pub fn coverage_metric(history: &ExplanationHistory, data: &BinarizedDataset, positives: &Bitset) -> Option<f64> {
    let total = positives.count();
    if total == 0 {
        return None;
    }
    let hit = positives.iter().filter(|&i| history.covers(data.row(i))).count();
    Some(hit as f64 / total as f64)
}

/// `(1/n) Σ 1[f(x) = cap(E, x̃) ∨ f′(x)]` over the test rows; `None` on an
/// empty test set.
pub fn agreement_metric(
    truth: &[u8],
    history: &ExplanationHistory,
    tree: &SurrogateTree,
    rows: &[Vec<f64>],
    data: &BinarizedDataset,
) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    let agree = rows
        .iter()
        .enumerate()
        .filter(|&(i, x)| {
            let y = u8::from(history.covers(data.row(i)) || tree.predict(x) == 1);
            y == truth[i]
        })
        .count();
    Some(agree as f64 / rows.len() as f64)
}

/// Share of model-negative test rows captured by some explanation; `None`
/// without negatives.
pub fn explanation_fpr(history: &ExplanationHistory, data: &BinarizedDataset, truth: &[u8]) -> Option<f64> {
    let negatives = truth.iter().filter(|&&y| y == 0).count();
    if negatives == 0 {
        return None;
    }
    let fp = (0..data.n())
        .filter(|&i| truth[i] == 0 && history.covers(data.row(i)))
        .count();
    Some(fp as f64 / negatives as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub count: usize,
    pub median: Option<f64>,
    pub p90: Option<f64>,
    pub max: Option<f64>,
}

/// Nearest-rank quantile of ascending `sorted`.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn timing_summary(seconds: &[f64]) -> TimingSummary {
    if seconds.is_empty() {
        return TimingSummary::default();
    }
    let mut s = seconds.to_vec();
    s.sort_by(f64::total_cmp);
    TimingSummary {
        count: s.len(),
        median: Some(nearest_rank(&s, 0.5)),
        p90: Some(nearest_rank(&s, 0.9)),
        max: s.last().copied(),
    }
}
