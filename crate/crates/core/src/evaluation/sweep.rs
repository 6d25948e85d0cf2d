use serde::{Deserialize, Serialize};

use super::shares::{mean_probabilities, split_inputs};
use crate::dataio::{AttributeKind, Dataset, FeatureRole, FeatureSchema, Split};
use crate::error::{Error, Result};
use crate::knowledge::Direction;
use crate::models::ChoiceModel;

/// Adjacent-point changes against the expected direction beyond this are
/// violations.
pub const CURVE_TOLERANCE: f64 = 1e-9;

/// -50%, -45%, ..., +50%.
pub fn default_grid() -> Vec<f64> {
    (-10..=10).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub model: String,
    pub feature: String,
    /// raw feature index
    pub feature_index: usize,
    pub split: Split,
    pub alternatives: Vec<String>,
    /// fractional changes, ascending
    pub grid: Vec<f64>,
    /// `probabilities[g][j]`: mean probability of `j` at grid point `g`
    pub probabilities: Vec<Vec<f64>>,
}

impl SweepCurve {
    /// `q` then one probability column per alternative.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("q");
        for a in &self.alternatives {
            s.push_str(&format!("\tP_{a}"));
        }
        s.push('\n');
        for (q, row) in self.grid.iter().zip(&self.probabilities) {
            s.push_str(&q.to_string());
            for p in row {
                s.push_str(&format!("\t{p}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Mean choice probabilities with raw feature `m` multiplied by `1 + q` in
/// every observation of `split`, for each `q` in `grid`.
pub fn probability_sweep(
    model: &ChoiceModel,
    dataset: &Dataset,
    split: Split,
    m: usize,
    grid: &[f64],
) -> Result<SweepCurve> {
    model.check_compatible(dataset)?;
    let col = dataset.encoded_index(m)?;
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("sweep grid must be non-empty and strictly ascending".into()));
    }
    let (idx, base, avail) = split_inputs(dataset, split)?;
    let d = dataset.encoded_dim();
    let mut probabilities = Vec::with_capacity(grid.len());
    let mut x = base.clone();
    for &q in grid {
        if q == 0.0 {
            x.copy_from_slice(&base);
        } else {
            for (r, &i) in idx.iter().enumerate() {
                let raw = dataset.observations()[i].x[m];
                x[r * d + col] = dataset.scale_value(m, raw * (1.0 + q))?;
            }
        }
        probabilities.push(mean_probabilities(model, &x, &avail, idx.len())?);
    }
    Ok(SweepCurve {
        model: model.kind().label().to_string(),
        feature: dataset.schema().features[m].name.clone(),
        feature_index: m,
        split,
        alternatives: dataset.schema().alternatives.clone(),
        grid: grid.to_vec(),
        probabilities,
    })
}

/// Directions implied by the own/cross rule for a time or cost attribute of
/// one alternative; `None` everywhere for other features.
pub fn expected_directions(schema: &FeatureSchema, m: usize) -> Vec<Option<Direction>> {
    let c = schema.alternative_count();
    let f = &schema.features[m];
    match (f.role, f.kind) {
        (FeatureRole::Attribute(owner), AttributeKind::TravelTime | AttributeKind::Cost) => (0..c)
            .map(|j| {
                Some(if j == owner {
                    Direction::Decreasing
                } else {
                    Direction::Increasing
                })
            })
            .collect(),
        _ => vec![None; c],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveCheck {
    pub alternative: String,
    pub direction: Option<Direction>,
    /// grid index `g` of each violating step `g -> g + 1`
    pub violations: Vec<usize>,
    /// largest wrong-way change, 0 if none
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub feature: String,
    pub checks: Vec<CurveCheck>,
}

impl MonotonicityReport {
    pub fn violation_count(&self) -> usize {
        self.checks.iter().map(|c| c.violations.len()).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("feature\talternative\tdirection\tviolations\tworst\n");
        for c in &self.checks {
            let dir = match c.direction {
                Some(Direction::Increasing) => "increasing",
                Some(Direction::Decreasing) => "decreasing",
                None => "none",
            };
            s.push_str(&format!(
                "{}\t{}\t{dir}\t{}\t{}\n",
                self.feature,
                c.alternative,
                c.violations.len(),
                c.worst
            ));
        }
        s
    }
}

/// Flags adjacent grid steps whose mean-probability change goes against the
/// expected direction by more than [`CURVE_TOLERANCE`]. Ties never count.
pub fn curve_monotonicity_report(curve: &SweepCurve, expected: &[Option<Direction>]) -> Result<MonotonicityReport> {
    if expected.len() != curve.alternatives.len() {
        return Err(Error::Shape(format!(
            "{} directions for {} alternatives",
            expected.len(),
            curve.alternatives.len()
        )));
    }
    if curve.grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Usage("sweep grid is not sorted ascending".into()));
    }
    let checks = curve
        .alternatives
        .iter()
        .zip(expected)
        .enumerate()
        .map(|(j, (name, dir))| {
            let mut violations = Vec::new();
            let mut worst = 0.0f64;
            if let Some(d) = dir {
                for g in 0..curve.probabilities.len().saturating_sub(1) {
                    let wrong = -d.sign() * (curve.probabilities[g + 1][j] - curve.probabilities[g][j]);
                    if wrong > CURVE_TOLERANCE {
                        violations.push(g);
                        worst = worst.max(wrong);
                    }
                }
            }
            CurveCheck {
                alternative: name.clone(),
                direction: *dir,
                violations,
                worst,
            }
        })
        .collect();
    Ok(MonotonicityReport {
        feature: curve.feature.clone(),
        checks,
    })
}
