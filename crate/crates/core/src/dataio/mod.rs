//! Survey ingestion, filtering, splitting, scaling and synthetic oracles.

mod dataset;
mod filter;
mod raw;
mod schema;
mod synth;

use std::path::Path;

pub use dataset::{Batch, Dataset, FeatureStats, Observation, Scaling, Split};
pub use filter::{apply_filters, default_rules, percentile, FilterRecord, FilterRule};
pub use raw::{load_raw, RawTable, ResolvedColumns};
pub use schema::{AttributeKind, Encoding, FeatureDescriptor, FeatureRole, FeatureSchema};
pub use synth::{generate_synthetic_mnl, SyntheticMnl};

use crate::error::Result;

pub const DEFAULT_RATIOS: [f64; 3] = [0.6, 0.2, 0.2];

/// load → filter → split → scale.
pub fn prepare(
    path: &Path,
    schema: FeatureSchema,
    rules: &[FilterRule],
    ratios: [f64; 3],
    seed: u64,
) -> Result<Dataset> {
    let table = load_raw(path, None, &schema)?;
    let (obs, log) = apply_filters(&table, &schema, rules)?;
    Dataset::new(schema, obs)?
        .with_filter_log(log)
        .split(ratios, seed)?
        .fit_apply_scaling()
}
