//! Load the Swissmetro survey, apply the default filters, split 60/20/20 and
//! z-score features on the training split.
//!
//! cargo run --example prepare_data [path/to/swissmetro.csv]

use std::path::PathBuf;

use monochoice::dataio::{default_rules, prepare, FeatureSchema, Split, DEFAULT_RATIOS};

fn main() -> monochoice::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/swissmetro.csv"));
    let ds = prepare(&path, FeatureSchema::swissmetro(), &default_rules(), DEFAULT_RATIOS, 42)?;

    for r in ds.filter_log() {
        println!("{:<26} dropped {:>5}, {:>5} left", r.rule, r.dropped, r.remaining);
    }
    for s in Split::ALL {
        println!("{:<10} {:>5} observations", s.label(), ds.split_count(s));
    }

    let schema = ds.schema();
    let stats = &ds.scaling().expect("fitted").stats;
    println!("\nfeature      raw mean   raw std");
    for (m, f) in schema.features.iter().enumerate().filter(|(_, f)| f.is_continuous()) {
        println!("{:<10} {:>9.2} {:>9.2}", f.name, stats[m].mean, stats[m].std);
    }
    println!("\nencoded width {}, fingerprint {}", ds.encoded_dim(), &ds.fingerprint()[..16]);
    Ok(())
}
