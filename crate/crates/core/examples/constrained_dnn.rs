//! Train a DNN with and without the 18 monotonicity constraints and compare
//! fit and audited violation fractions.
//!
//! cargo run --example constrained_dnn [path/to/swissmetro.csv]

use std::path::PathBuf;

use monochoice::dataio::{default_rules, prepare, AttributeKind, FeatureSchema, Split, DEFAULT_RATIOS};
use monochoice::knowledge::{audit_constraints, build_constraint_set, ConstraintSet};
use monochoice::models::{Architecture, ChoiceModel, ModelKind};
use monochoice::training::{evaluate_split, train, TrainConfig};

fn main() -> monochoice::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/swissmetro.csv"));
    let ds = prepare(&path, FeatureSchema::swissmetro(), &default_rules(), DEFAULT_RATIOS, 42)?;
    let set = build_constraint_set(ds.schema(), &[AttributeKind::TravelTime, AttributeKind::Cost], 1.0)?;
    println!("{} constraints", set.len());

    let config = TrainConfig {
        lambda: 300.0,
        pairs_per_constraint: 1024,
        seed: 11,
        ..TrainConfig::default()
    };
    for (label, constraints) in [("DNN", ConstraintSet::empty()), ("C-DNN", set.clone())] {
        let mut model = ChoiceModel::new(Architecture::default_for(ModelKind::Dnn), &ds, 7)?;
        let history = train(&mut model, &ds, &constraints, &config)?;
        let fit = evaluate_split(&model, &ds, Split::Train)?;
        let audit = audit_constraints(&model, &ds, &set, 1024, 0.5, 2024)?;
        println!(
            "\n{label}: {} epochs, train avg NLL {:.4}, max violation fraction {:.4}",
            history.epochs.len(),
            fit.avg_nll,
            audit.max_fraction()
        );
        for e in audit.entries.iter().filter(|e| e.violations > 0) {
            println!(
                "  {:<8} vs {:<9} {:>5.1}% of pairs, worst {:.2e}",
                format!("P({})", e.alternative),
                e.feature,
                100.0 * e.violation_fraction,
                e.max_violation
            );
        }
    }
    Ok(())
}
