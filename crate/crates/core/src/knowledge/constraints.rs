use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataio::{AttributeKind, FeatureRole, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    /// `+1` for increasing, `-1` for decreasing.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }
}

/// `p_alternative` must move in `direction` as raw feature `feature` grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityConstraint {
    pub alternative: usize,
    pub feature: usize,
    pub direction: Direction,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<MonotonicityConstraint>,
}

/// Human-editable form used in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintEntry {
    /// alternative whose probability is constrained
    pub probability_of: String,
    pub feature: String,
    pub direction: Direction,
    pub weight: f64,
}

impl ConstraintSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MonotonicityConstraint> {
        self.constraints.iter()
    }

    /// Raw indices of the constrained features.
    pub fn features(&self) -> BTreeSet<usize> {
        self.constraints.iter().map(|c| c.feature).collect()
    }

    /// Checks the constraints against `schema`: only continuous time/cost
    /// attributes, non-negative finite weights, no repeated pair.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.constraints {
            if c.alternative >= schema.alternative_count() {
                return Err(Error::Config(format!("constraint alternative {} out of range", c.alternative)));
            }
            let f = schema
                .features
                .get(c.feature)
                .ok_or_else(|| Error::Config(format!("constraint feature {} out of range", c.feature)))?;
            let constrainable = f.is_continuous()
                && matches!(f.kind, AttributeKind::TravelTime | AttributeKind::Cost)
                && matches!(f.role, FeatureRole::Attribute(_));
            if !constrainable {
                return Err(Error::Config(format!(
                    "feature `{}` is not a travel-time or cost attribute",
                    f.name
                )));
            }
            if !(c.weight >= 0.0) || !c.weight.is_finite() {
                return Err(Error::Config(format!("constraint weight {} must be >= 0", c.weight)));
            }
            if !seen.insert((c.alternative, c.feature)) {
                return Err(Error::Config(format!(
                    "duplicate constraint on P({}) w.r.t. `{}`",
                    schema.alternatives[c.alternative], f.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_entries(&self, schema: &FeatureSchema) -> Vec<ConstraintEntry> {
        self.constraints
            .iter()
            .map(|c| ConstraintEntry {
                probability_of: schema.alternatives[c.alternative].clone(),
                feature: schema.features[c.feature].name.clone(),
                direction: c.direction,
                weight: c.weight,
            })
            .collect()
    }

    pub fn from_entries(schema: &FeatureSchema, entries: &[ConstraintEntry]) -> Result<Self> {
        let constraints = entries
            .iter()
            .map(|e| {
                let alternative = schema
                    .alternatives
                    .iter()
                    .position(|a| a == &e.probability_of)
                    .ok_or_else(|| Error::Config(format!("unknown alternative `{}`", e.probability_of)))?;
                let feature = schema
                    .feature_index(&e.feature)
                    .ok_or_else(|| Error::Config(format!("unknown feature `{}`", e.feature)))?;
                Ok(MonotonicityConstraint {
                    alternative,
                    feature,
                    direction: e.direction,
                    weight: e.weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let set = Self { constraints };
        set.validate(schema)?;
        Ok(set)
    }

    /// Replaces the weight of the constraint on `(alternative, feature)`.
    pub fn set_weight(&mut self, alternative: usize, feature: usize, weight: f64) -> Result<()> {
        let c = self
            .constraints
            .iter_mut()
            .find(|c| c.alternative == alternative && c.feature == feature)
            .ok_or_else(|| Error::Config(format!("no constraint on ({alternative}, {feature})")))?;
        c.weight = weight;
        Ok(())
    }
}

/// Own-effects decreasing and cross-effects increasing for every
/// alternative's attribute of each kind in `kinds`:
/// `dP_j/dx_j <= 0` and `dP_i/dx_j >= 0` for `i != j`.
pub fn build_constraint_set(
    schema: &FeatureSchema,
    kinds: &[AttributeKind],
    weight: f64,
) -> Result<ConstraintSet> {
    let c = schema.alternative_count();
    let mut constraints = Vec::with_capacity(kinds.len() * c * c);
    for &kind in kinds {
        for j in 0..c {
            let m = schema.constrained_feature(j, kind).ok_or_else(|| {
                Error::Config(format!(
                    "alternative `{}` has no unique {} feature",
                    schema.alternatives[j],
                    kind.label()
                ))
            })?;
            constraints.push(MonotonicityConstraint {
                alternative: j,
                feature: m,
                direction: Direction::Decreasing,
                weight,
            });
            for i in (0..c).filter(|&i| i != j) {
                constraints.push(MonotonicityConstraint {
                    alternative: i,
                    feature: m,
                    direction: Direction::Increasing,
                    weight,
                });
            }
        }
    }
    let set = ConstraintSet { constraints };
    set.validate(schema)?;
    Ok(set)
}
