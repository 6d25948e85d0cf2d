use serde::{Deserialize, Serialize};

use super::{generate_pseudo_pairs, pair_derivatives, ConstraintSet, Direction, PseudoConfig};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::models::ChoiceModel;
use crate::util::derive_seed;

/// A pair violates its constraint when `-d * derivative` exceeds this.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub alternative: String,
    pub feature: String,
    pub direction: Direction,
    pub pairs: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// largest `-d * derivative` among violating pairs, 0 if none
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub grid: usize,
    pub range_extension: f64,
    pub seed: u64,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn max_fraction(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.violation_fraction)
            .fold(0.0, f64::max)
    }

    pub fn total_violations(&self) -> usize {
        self.entries.iter().map(|e| e.violations).sum()
    }

    /// Tab-separated table, one row per constraint.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("alternative\tfeature\tdirection\tpairs\tviolations\tfraction\tmax_violation\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.alternative,
                e.feature,
                match e.direction {
                    Direction::Increasing => "increasing",
                    Direction::Decreasing => "decreasing",
                },
                e.pairs,
                e.violations,
                e.violation_fraction,
                e.max_violation
            ));
        }
        s
    }
}

/// Evaluates `grid` fresh pseudo pairs per constraint (no gradients) and
/// counts wrong-signed derivatives.
pub fn audit_constraints(
    model: &ChoiceModel,
    dataset: &Dataset,
    set: &ConstraintSet,
    grid: usize,
    range_extension: f64,
    seed: u64,
) -> Result<AuditReport> {
    if grid < 2 {
        return Err(Error::Config(format!("audit grid density must be >= 2, got {grid}")));
    }
    let schema = dataset.schema();
    let config = PseudoConfig {
        k: grid,
        delta: None,
        range_extension,
    };
    let mut entries = Vec::with_capacity(set.len());
    for (ci, c) in set.iter().enumerate() {
        let pairs = generate_pseudo_pairs(dataset, c, &config, derive_seed(seed, &[0xA0D1, ci as u64]))?;
        let derivs = pair_derivatives(model, c.alternative, &pairs)?;
        let sign = c.direction.sign();
        let wrong: Vec<f64> = derivs
            .iter()
            .map(|d| -sign * d)
            .filter(|&v| v > AUDIT_TOLERANCE)
            .collect();
        entries.push(AuditEntry {
            alternative: schema.alternatives[c.alternative].clone(),
            feature: schema.features[c.feature].name.clone(),
            direction: c.direction,
            pairs: pairs.len(),
            violations: wrong.len(),
            violation_fraction: wrong.len() as f64 / pairs.len() as f64,
            max_violation: wrong.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(AuditReport {
        grid,
        range_extension,
        seed,
        entries,
    })
}
