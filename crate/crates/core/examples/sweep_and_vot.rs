//! Probability sweeps over -50%..+50% of each time and cost attribute, their
//! monotonicity check, and per-observation values of time for an ASU-DNN.
//!
//! cargo run --example sweep_and_vot [path/to/swissmetro.csv]

use std::path::PathBuf;

use monochoice::dataio::{default_rules, prepare, AttributeKind, FeatureSchema, Split, DEFAULT_RATIOS};
use monochoice::evaluation::{
    curve_monotonicity_report, default_grid, expected_directions, market_shares, probability_sweep,
    vot_per_observation, vot_stats, DEFAULT_HISTOGRAM_BINS, DEFAULT_HISTOGRAM_WINDOW, DEFAULT_VOT_STEP,
};
use monochoice::knowledge::ConstraintSet;
use monochoice::models::{Architecture, ChoiceModel, ModelKind};
use monochoice::training::{train, TrainConfig};

fn main() -> monochoice::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/swissmetro.csv"));
    let ds = prepare(&path, FeatureSchema::swissmetro(), &default_rules(), DEFAULT_RATIOS, 42)?;
    let mut model = ChoiceModel::new(Architecture::default_for(ModelKind::AsuDnn), &ds, 7)?;
    train(&mut model, &ds, &ConstraintSet::empty(), &TrainConfig::default())?;

    let shares = market_shares(&model, &ds, Split::Test)?;
    println!("test shares {:?} vs observed {:?}, RMSE {:.2} pp", shares.predicted, shares.observed, shares.rmse);

    let schema = ds.schema();
    let grid = default_grid();
    for j in 0..schema.alternative_count() {
        for kind in [AttributeKind::TravelTime, AttributeKind::Cost] {
            let m = schema.constrained_feature(j, kind).expect("registered");
            let curve = probability_sweep(&model, &ds, Split::Train, m, &grid)?;
            let report = curve_monotonicity_report(&curve, &expected_directions(schema, m))?;
            let (lo, hi) = (&curve.probabilities[0], &curve.probabilities[grid.len() - 1]);
            println!(
                "{:<9} P(own) {:.3} -> {:.3}, {} wrong-direction steps",
                schema.features[m].name,
                lo[j],
                hi[j],
                report.violation_count()
            );
        }
    }

    println!("\nalternative  mean VOT  median  negative");
    for (j, alt) in schema.alternatives.iter().enumerate() {
        let records = vot_per_observation(&model, &ds, Split::Train, j, DEFAULT_VOT_STEP)?;
        let st = vot_stats(&records, DEFAULT_HISTOGRAM_WINDOW, DEFAULT_HISTOGRAM_BINS)?;
        println!("{alt:<10} {:>9.1} {:>7.1} {:>8.1}%", st.mean, st.median, st.percent_negative);
    }
    Ok(())
}
