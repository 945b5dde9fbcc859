//! Faithful, minimally revealing explanations for decision-set models and a
//! seeded simulator for model-extraction attacks against them.
//!
//! The crate is split along the pipeline:
//!
//! * [`dataset`]: CSV ingestion, binarization into a condition vocabulary,
//!   and the `cap`/`support` primitives.
//! * [`models`]: decision sets, piecewise-constant GAMs and the exact
//!   GAM to decision-set conversion, JSON model files.
//! * [`solver`]: budgeted maximum coverage (lazy greedy, branch-and-bound,
//!   brute force).
//! * [`defense`]: explanation generation with history reuse, and baselines.
//! * [`attacker`]: query strategies, importance tracking and the CART
//!   surrogate.
//! * [`harness`]: the extraction game, metrics, result files and the
//!   synthetic data generator.

pub mod attacker;
pub mod bitset;
pub mod dataset;
pub mod defense;
pub mod error;
pub mod harness;
pub mod models;
pub mod solver;

pub use attacker::{
    surrogate_predict, train_cart, AttackStrategy, Attacker, AttackerConfig, MarginalModel, SurrogateTree,
};
pub use bitset::Bitset;
pub use dataset::{
    cap, BinarizationPolicy, BinarizedDataset, Condition, CoverageSet, DatasetConfig, Feature, FeatureKind,
    FeatureSchema, Op, RawDataset,
};
pub use defense::{
    random_append, verify_faithful, Answer, Defender, DefenseConfig, DefenseMethod, Explanation, ExplanationHistory,
    ExplanationRecord,
};
pub use error::{Error, Result};
pub use harness::{run_extraction, ExperimentConfig, ExtractionRun};
pub use models::{DecisionSet, GamModel, Model};
pub use solver::{brute_force, exact, greedy, CoverageInstance, CoverageSolution};
