use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MonotonicityConstraint;
use crate::dataio::{Dataset, Split};
use crate::error::{Error, Result};

/// Pseudo-pair generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoConfig {
    /// pairs per constraint
    pub k: usize,
    /// Increment in scaled units; `None` means 1% of the observed span.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Base values cover `[min - r*span, max + r*span]`.
    pub range_extension: f64,
}

impl Default for PseudoConfig {
    fn default() -> Self {
        Self {
            k: 256,
            delta: None,
            range_extension: 0.5,
        }
    }
}

pub const DEFAULT_DELTA_FRACTION: f64 = 0.01;

/// Two encoded inputs that differ only in column `column`, by `delta > 0`.
/// Carries no chosen alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoPair {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// `x2[column] - x1[column]`, as realized in floating point
    pub delta: f64,
    pub column: usize,
    pub avail: Vec<bool>,
}

/// Observed `(min, max)` of scaled column `col` over the training split.
fn observed_range(dataset: &Dataset, train: &[usize], col: usize) -> (f64, f64) {
    train.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        let v = dataset.encoded_row(i)[col];
        (lo.min(v), hi.max(v))
    })
}

/// `K` pairs for one constraint. Non-probed features are copied from
/// training observations drawn with replacement; the probed feature gets
/// one uniform draw per equal-width bin across the (extended) observed
/// range; the partner adds `delta` to it.
pub fn generate_pseudo_pairs(
    dataset: &Dataset,
    constraint: &MonotonicityConstraint,
    config: &PseudoConfig,
    seed: u64,
) -> Result<Vec<PseudoPair>> {
    if config.k == 0 {
        return Err(Error::Config("pseudo pairs per constraint must be >= 1".into()));
    }
    if config.delta.is_some_and(|d| !(d > 0.0)) {
        return Err(Error::Config("pseudo-pair delta must be > 0".into()));
    }
    if !(config.range_extension >= 0.0) {
        return Err(Error::Config("range extension must be >= 0".into()));
    }
    let train = dataset.indices(Split::Train);
    if train.is_empty() {
        return Err(Error::Config("pseudo pairs need a non-empty training split".into()));
    }
    let col = dataset.encoded_index(constraint.feature)?;
    let (lo, hi) = observed_range(dataset, &train, col);
    let span = hi - lo;
    let delta = match config.delta {
        Some(d) => d,
        None if span > 0.0 => DEFAULT_DELTA_FRACTION * span,
        None => DEFAULT_DELTA_FRACTION,
    };
    let start = lo - config.range_extension * span;
    let width = span * (1.0 + 2.0 * config.range_extension);
    let bin = width / config.k as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(config.k);
    for b in 0..config.k {
        let src = train[rng.random_range(0..train.len())];
        let mut x1 = dataset.encoded_row(src).to_vec();
        let u: f64 = rng.random();
        x1[col] = (start + (b as f64 + u) * bin).min(start + width);
        let mut x2 = x1.clone();
        x2[col] = x1[col] + delta;
        pairs.push(PseudoPair {
            delta: x2[col] - x1[col],
            x1,
            x2,
            column: col,
            avail: dataset.observations()[src].avail.clone(),
        });
    }
    Ok(pairs)
}
