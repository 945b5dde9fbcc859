//! Budgeted maximum coverage.
//!
//! Narrowing an explanation `e_base ∪ e_add` is the same as choosing at most
//! `l` complement columns `S_{¬c_j}(X̃_base)` whose union is as large as
//! possible: every base row knocked out by some added condition is a row the
//! explanation no longer captures, so
//! `supp(e_base ∪ e_add) = |X̃_base| − |∪_j S_{¬c_j}(X̃_base)|`.
//!
//! Three solvers share one instance type. [`greedy`] is the lazy greedy with
//! the usual `1 − 1/e` guarantee, [`exact`] is a depth-first branch-and-bound
//! that proves optimality (or reports its incumbent when the node budget
//! runs out), and [`brute_force`] enumerates every subset and is only meant
//! as a test oracle.

mod exact;
mod greedy;

pub use exact::{exact, DEFAULT_NODE_LIMIT};
pub use greedy::greedy;

use crate::bitset::Bitset;
use crate::dataset::{BinarizedDataset, CoverageSet};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_CAP: u128 = 100_000_000;

/// Candidate columns over a compact universe `0..universe`.
#[derive(Clone, Debug)]
pub struct CoverageInstance {
    universe: usize,
    columns: Vec<Bitset>,
    candidate_ids: Vec<usize>,
}

impl CoverageInstance {
    pub fn new(universe: usize, columns: Vec<Bitset>, candidate_ids: Vec<usize>) -> Self {
        assert_eq!(columns.len(), candidate_ids.len());
        assert!(columns.iter().all(|c| c.len() == universe));
        CoverageInstance {
            universe,
            columns,
            candidate_ids,
        }
    }

    /// Column `i` is the set of base rows on which candidate condition
    /// `candidates[i]` is false. Base rows are renumbered `0..|base|` in
    /// ascending row order.
    pub fn build(base: &CoverageSet, candidates: &[usize], data: &BinarizedDataset) -> Self {
        let universe = base.count;
        let mut columns = vec![Bitset::new(universe); candidates.len()];
        for (r, i) in base.rows().enumerate() {
            let row = data.row(i);
            for (col, &j) in columns.iter_mut().zip(candidates) {
                if !row.contains(j) {
                    col.insert(r);
                }
            }
        }
        CoverageInstance {
            universe,
            columns,
            candidate_ids: candidates.to_vec(),
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, i: usize) -> &Bitset {
        &self.columns[i]
    }

    pub fn candidate_ids(&self) -> &[usize] {
        &self.candidate_ids
    }

    /// Union of the selected columns.
    pub fn coverage_of(&self, selected: &[usize]) -> Bitset {
        let mut acc = Bitset::new(self.universe);
        for &i in selected {
            acc.union_with(&self.columns[i]);
        }
        acc
    }

    fn solution(&self, selected: Vec<usize>, optimal: bool, nodes: u64) -> CoverageSolution {
        let covered_bits = self.coverage_of(&selected);
        CoverageSolution {
            covered: covered_bits.count(),
            covered_bits,
            selected,
            optimal,
            nodes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageSolution {
    /// Positions into the instance's candidate list, in selection order.
    pub selected: Vec<usize>,
    pub covered: usize,
    pub covered_bits: Bitset,
    /// Set only when optimality was proven.
    pub optimal: bool,
    /// Search nodes (exact) or subsets (brute force) evaluated.
    pub nodes: u64,
}

impl CoverageSolution {
    /// Selected condition ids, ascending.
    pub fn condition_ids(&self, instance: &CoverageInstance) -> Vec<usize> {
        let mut ids: Vec<usize> = self.selected.iter().map(|&i| instance.candidate_ids[i]).collect();
        ids.sort_unstable();
        ids
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exhaustive search over every subset of size `≤ l`, smaller subsets first
/// and lexicographic within a size, keeping the first maximizer.
pub fn brute_force(instance: &CoverageInstance, l: usize, cap: u128) -> Result<CoverageSolution> {
    let k = instance.len();
    let top = l.min(k);
    let subsets: u128 = (0..=top).map(|s| binomial(k, s)).sum();
    if subsets > cap {
        return Err(Error::EnumerationCap { subsets, cap });
    }
    let mut best: Vec<usize> = Vec::new();
    let mut best_covered = 0usize;
    let mut evaluated = 1u64; // the empty set
    let mut acc = Bitset::new(instance.universe);
    for size in 1..=top {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            acc.clear();
            for &i in &idx {
                acc.union_with(&instance.columns[i]);
            }
            let covered = acc.count();
            evaluated += 1;
            if covered > best_covered {
                best_covered = covered;
                best = idx.clone();
            }
            // next combination in lexicographic order
            let mut pos = size;
            while pos > 0 && idx[pos - 1] == k - size + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for q in pos..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    Ok(instance.solution(best, true, evaluated))
}
