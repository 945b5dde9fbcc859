//! The protected model: decision sets, piecewise-constant GAMs, and the
//! JSON file format for both.

mod decision_set;
mod file;
mod gam;

pub use decision_set::{DecisionSet, ModelMetadata, Rule};
pub use file::{load_model, model_to_json, parse_model, save_model, Model, MODEL_FILE_VERSION};
pub use gam::{bin_representatives, gam_to_decision_set, ConversionOptions, GamModel, Link, ShapeFunction};
