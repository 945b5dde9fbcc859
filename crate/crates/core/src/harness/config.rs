use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::SyntheticSpec;
use crate::attacker::{AttackStrategy, AttackerConfig, DEFAULT_MAX_DEPTH};
use crate::defense::{DefenseConfig, DefenseMethod};
use crate::error::{Error, Result};
use crate::solver::DEFAULT_NODE_LIMIT;

/// Train/test CSVs with a schema file, or a synthetic generator spec.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub schema: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

/// A model file (decision set or GAM). Without one, a synthetic data
/// source supplies its planted decision set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub file: Option<PathBuf>,
    /// Overrides a GAM's own threshold.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseSection {
    pub method: DefenseMethod,
    pub max_len: usize,
    pub node_limit: u64,
    /// Defaults to the experiment seed.
    pub seed: Option<u64>,
}

impl Default for DefenseSection {
    fn default() -> Self {
        DefenseSection {
            method: DefenseMethod::Greedy,
            max_len: 3,
            node_limit: DEFAULT_NODE_LIMIT,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackerSection {
    pub strategy: AttackStrategy,
    pub k: usize,
    pub delta: Option<f64>,
    pub committee_size: usize,
    pub committee_candidates: usize,
    pub retry_cap: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Marginals JSON; estimated from the training data when unset.
    pub marginals: Option<PathBuf>,
    /// Query log of an earlier run to replay (strategy `replay`).
    pub replay: Option<PathBuf>,
    /// Defaults to the experiment seed + 1.
    pub seed: Option<u64>,
}

impl Default for AttackerSection {
    fn default() -> Self {
        let a = AttackerConfig::default();
        AttackerSection {
            strategy: a.strategy,
            k: a.k,
            delta: a.delta,
            committee_size: a.committee_size,
            committee_candidates: a.committee_candidates,
            retry_cap: a.retry_cap,
            max_depth: DEFAULT_MAX_DEPTH,
            min_leaf: a.min_leaf,
            marginals: None,
            replay: None,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub max_queries: usize,
    /// Surrogate retraining and curve checkpoint interval.
    pub cadence: usize,
    pub output: Option<PathBuf>,
    pub data: DataSection,
    pub model: ModelSection,
    pub defense: DefenseSection,
    pub attacker: AttackerSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            max_queries: 2000,
            cadence: 50,
            output: None,
            data: DataSection::default(),
            model: ModelSection::default(),
            defense: DefenseSection::default(),
            attacker: AttackerSection::default(),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Sets `a.b.c = value` in `table`, creating intermediate tables.
pub fn set_dotted(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(value));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, applying `key=value` overrides (dotted keys) on top.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, v)?;
        }
        let config: ExperimentConfig = table.try_into().map_err(|e| Error::Config(format!("{e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse_with_overrides(&text, overrides)?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.output);
        fix(&mut self.data.schema);
        fix(&mut self.data.train);
        fix(&mut self.data.test);
        fix(&mut self.model.file);
        fix(&mut self.attacker.marginals);
        fix(&mut self.attacker.replay);
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_queries == 0 {
            return Err(Error::Config("max_queries must be at least 1".into()));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        let d = &self.data;
        let files = d.schema.is_some() || d.train.is_some() || d.test.is_some();
        match (files, &d.synthetic) {
            (true, Some(_)) => {
                return Err(Error::Config(
                    "data: give either CSV files or [data.synthetic], not both".into(),
                ))
            }
            (false, None) => return Err(Error::Config("data: no source given".into())),
            (true, None) if d.schema.is_none() || d.train.is_none() || d.test.is_none() => {
                return Err(Error::Config("data: schema, train and test are all required".into()))
            }
            _ => {}
        }
        if d.synthetic.is_none() && self.model.file.is_none() {
            return Err(Error::Config("model.file is required unless data is synthetic".into()));
        }
        if (self.attacker.strategy == AttackStrategy::Replay) != self.attacker.replay.is_some() {
            return Err(Error::Config(
                "attacker.replay must be set exactly when strategy is \"replay\"".into(),
            ));
        }
        Ok(())
    }

    pub fn defense_config(&self) -> DefenseConfig {
        DefenseConfig {
            method: self.defense.method,
            max_len: self.defense.max_len,
            seed: self.defense.seed.unwrap_or(self.seed),
            node_limit: self.defense.node_limit,
        }
    }

    pub fn attacker_config(&self) -> AttackerConfig {
        let a = &self.attacker;
        AttackerConfig {
            strategy: a.strategy,
            seed: a.seed.unwrap_or(self.seed.wrapping_add(1)),
            k: a.k,
            delta: a.delta,
            committee_size: a.committee_size,
            committee_candidates: a.committee_candidates,
            retry_cap: a.retry_cap,
            max_depth: a.max_depth,
            min_leaf: a.min_leaf,
        }
    }

    /// Seed for the synthetic generator: its own, else the experiment seed.
    pub fn data_seed(&self) -> u64 {
        self.data.synthetic.as_ref().and_then(|s| s.seed).unwrap_or(self.seed)
    }
}
