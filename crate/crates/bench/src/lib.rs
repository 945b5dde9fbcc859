//! Benchmark fixtures: a synthetic table at roughly 10k rows and 100
//! conditions, and positive queries against its planted model.

use faithful_core::harness::{prepare, ExperimentConfig, Prepared, SyntheticSpec};
use faithful_core::solver::CoverageInstance;
use faithful_core::Bitset;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn synthetic(n: usize, seed: u64) -> Prepared {
    let mut cfg = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    cfg.data.synthetic = Some(SyntheticSpec {
        n,
        p: 8,
        categorical: 2,
        ..SyntheticSpec::default()
    });
    prepare(&cfg).expect("synthetic data")
}

/// A positive query: its binarized row and the index of a rule it fires.
pub struct PositiveQuery {
    pub row: Bitset,
    pub rule: usize,
}

pub fn positive_queries(p: &Prepared, count: usize, seed: u64) -> Vec<PositiveQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q = p.marginals.sample(&mut rng);
        let row = p.train.binarize_query(&q);
        let (label, fired) = p.model.predict(&row);
        if label == 1 {
            out.push(PositiveQuery { rule: fired[0], row });
        }
    }
    out
}

/// The coverage instance a defense would solve for `q`.
pub fn instance_for(p: &Prepared, q: &PositiveQuery) -> CoverageInstance {
    let e_base = p.model.rule(q.rule).conditions();
    let candidates: Vec<usize> = q.row.iter().filter(|j| !e_base.contains(j)).collect();
    let base = p.train.support(e_base, None);
    CoverageInstance::build(&base, &candidates, &p.train)
}
