use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous { min: f64, max: f64 },
    Categorical { categories: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn continuous(name: impl Into<String>, min: f64, max: f64) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Continuous { min, max },
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    /// Smallest and largest admissible raw value. Categorical features are
    /// stored as category indices.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            FeatureKind::Continuous { min, max } => (*min, *max),
            FeatureKind::Categorical { categories } => (0.0, categories.len() as f64 - 1.0),
        }
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        match &self.kind {
            FeatureKind::Categorical { categories } => categories.iter().position(|c| c == name),
            FeatureKind::Continuous { .. } => None,
        }
    }
}

/// Ordered feature list. Raw rows are `Vec<f64>` indexed like `features`,
/// with categorical values encoded as their index in `categories`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let schema = FeatureSchema { features };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {:?}", f.name)));
            }
            match &f.kind {
                FeatureKind::Continuous { min, max } => {
                    if min.is_nan() || max.is_nan() || min >= max {
                        return Err(Error::Schema(format!(
                            "feature {:?}: min {min} must be < max {max}",
                            f.name
                        )));
                    }
                }
                FeatureKind::Categorical { categories } => {
                    if categories.is_empty() {
                        return Err(Error::Schema(format!("feature {:?} has no categories", f.name)));
                    }
                    let distinct: HashSet<_> = categories.iter().collect();
                    if distinct.len() != categories.len() {
                        return Err(Error::Schema(format!("feature {:?} has repeated categories", f.name)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Eq => "==",
            Op::Ne => "!=",
        }
    }

    pub fn negate(self) -> Op {
        match self {
            Op::Le => Op::Gt,
            Op::Gt => Op::Le,
            Op::Eq => Op::Ne,
            Op::Ne => Op::Eq,
        }
    }

    pub fn is_threshold(self) -> bool {
        matches!(self, Op::Le | Op::Gt)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A binary predicate on one raw feature. `value` is a threshold for
/// `Le`/`Gt` and a category index for `Eq`/`Ne`. The condition's id is its
/// position in whichever vocabulary holds it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Condition {
    pub feature: usize,
    pub op: Op,
    pub value: f64,
}

impl Condition {
    pub fn new(feature: usize, op: Op, value: f64) -> Self {
        Condition { feature, op, value }
    }

    #[inline]
    pub fn holds(&self, x: f64) -> bool {
        match self.op {
            Op::Le => x <= self.value,
            Op::Gt => x > self.value,
            Op::Eq => x == self.value,
            Op::Ne => x != self.value,
        }
    }

    #[inline]
    pub fn holds_on(&self, row: &[f64]) -> bool {
        self.holds(row[self.feature])
    }

    pub fn negation(&self) -> Condition {
        Condition {
            op: self.op.negate(),
            ..*self
        }
    }

    /// Exact structural identity (bitwise on the value).
    pub fn same_as(&self, other: &Condition) -> bool {
        self.feature == other.feature && self.op == other.op && self.value.to_bits() == other.value.to_bits()
    }

    /// Human-readable form such as `income <= 5000`.
    pub fn display(&self, schema: &FeatureSchema) -> String {
        let feature = &schema.features[self.feature];
        match &feature.kind {
            FeatureKind::Categorical { categories } if !self.op.is_threshold() => {
                let cat = categories.get(self.value as usize).map(String::as_str).unwrap_or("?");
                format!("{} {} {}", feature.name, self.op, cat)
            }
            _ => format!("{} {} {}", feature.name, self.op, self.value),
        }
    }

    /// Checks the predicate kind against the feature kind and, for
    /// thresholds, that the value lies strictly inside the feature bounds.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let feature = schema
            .features
            .get(self.feature)
            .ok_or_else(|| Error::Model(format!("condition references feature index {}", self.feature)))?;
        match (&feature.kind, self.op) {
            (FeatureKind::Continuous { min, max }, Op::Le | Op::Gt) => {
                if !(self.value > *min && self.value < *max) {
                    return Err(Error::Model(format!(
                        "threshold {} on {:?} is not strictly inside ({min}, {max})",
                        self.value, feature.name
                    )));
                }
            }
            (FeatureKind::Categorical { categories }, Op::Eq | Op::Ne) => {
                let idx = self.value;
                if idx.fract() != 0.0 || idx < 0.0 || idx as usize >= categories.len() {
                    return Err(Error::Model(format!(
                        "category index {idx} out of range for {:?}",
                        feature.name
                    )));
                }
            }
            _ => {
                return Err(Error::Model(format!(
                    "operator {} does not apply to feature {:?}",
                    self.op, feature.name
                )))
            }
        }
        Ok(())
    }
}

/// True when no point can satisfy every condition in `conds` at once.
pub fn contradictory<'a, I>(conds: I) -> bool
where
    I: IntoIterator<Item = &'a Condition>,
{
    use std::collections::BTreeMap;
    // feature -> (lower exclusive, upper inclusive, required eq, excluded set)
    #[derive(Default)]
    struct Range {
        lo: Option<f64>,
        hi: Option<f64>,
        eq: Option<f64>,
        ne: Vec<f64>,
        conflict: bool,
    }
    let mut by_feature: BTreeMap<usize, Range> = BTreeMap::new();
    for c in conds {
        let r = by_feature.entry(c.feature).or_default();
        match c.op {
            Op::Le => r.hi = Some(r.hi.map_or(c.value, |h: f64| h.min(c.value))),
            Op::Gt => r.lo = Some(r.lo.map_or(c.value, |l: f64| l.max(c.value))),
            Op::Eq => match r.eq {
                Some(v) if v != c.value => r.conflict = true,
                _ => r.eq = Some(c.value),
            },
            Op::Ne => r.ne.push(c.value),
        }
    }
    by_feature.values().any(|r| {
        if r.conflict {
            return true;
        }
        if let (Some(lo), Some(hi)) = (r.lo, r.hi) {
            if lo >= hi {
                return true;
            }
        }
        if let Some(v) = r.eq {
            if r.ne.contains(&v) {
                return true;
            }
            if r.lo.is_some_and(|lo| v <= lo) || r.hi.is_some_and(|hi| v > hi) {
                return true;
            }
        }
        false
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rejects_bad_features() {
        assert!(FeatureSchema::new(vec![
            Feature::continuous("a", 0.0, 1.0),
            Feature::continuous("a", 0.0, 1.0)
        ])
        .is_err());
        assert!(FeatureSchema::new(vec![Feature::continuous("a", 1.0, 1.0)]).is_err());
        assert!(FeatureSchema::new(vec![Feature::categorical("c", Vec::<String>::new())]).is_err());
        assert!(FeatureSchema::new(vec![Feature::categorical("c", ["x", "x"])]).is_err());
        assert!(FeatureSchema::new(vec![
            Feature::continuous("a", 0.0, 1.0),
            Feature::categorical("c", ["x", "y"])
        ])
        .is_ok());
    }

    #[test]
    fn contradictions() {
        let le = Condition::new(0, Op::Le, 5.0);
        let gt = Condition::new(0, Op::Gt, 5.0);
        assert!(contradictory([&le, &gt]));
        assert!(!contradictory([&le, &Condition::new(0, Op::Gt, 2.0)]));
        let a = Condition::new(1, Op::Eq, 0.0);
        let b = Condition::new(1, Op::Eq, 1.0);
        assert!(contradictory([&a, &b]));
        assert!(contradictory([&a, &a.negation()]));
        assert!(!contradictory([&a, &le]));
    }

    #[test]
    fn display_uses_names() {
        let schema = FeatureSchema::new(vec![
            Feature::continuous("income", 0.0, 1e5),
            Feature::categorical("purpose", ["car", "tv"]),
        ])
        .unwrap();
        assert_eq!(Condition::new(0, Op::Le, 5000.0).display(&schema), "income <= 5000");
        assert_eq!(Condition::new(1, Op::Eq, 1.0).display(&schema), "purpose == tv");
    }
}
