//! Fit a multinomial logit on Swissmetro and read off its travel-time and
//! cost coefficients and values of time.
//!
//! cargo run --example train_mnl [path/to/swissmetro.csv]

use std::path::PathBuf;

use monochoice::dataio::{default_rules, prepare, AttributeKind, FeatureSchema, Split, DEFAULT_RATIOS};
use monochoice::knowledge::ConstraintSet;
use monochoice::models::{extract_mnl_vot, Architecture, ChoiceModel, ModelKind};
use monochoice::training::{evaluate_split, train, TrainConfig};

fn main() -> monochoice::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/swissmetro.csv"));
    let ds = prepare(&path, FeatureSchema::swissmetro(), &default_rules(), DEFAULT_RATIOS, 42)?;

    let mut mnl = ChoiceModel::new(Architecture::default_for(ModelKind::Mnl), &ds, 7)?;
    let history = train(&mut mnl, &ds, &ConstraintSet::empty(), &TrainConfig::default())?;
    println!("best epoch {} of {}", history.best_epoch, history.epochs.len());
    for s in Split::ALL {
        let m = evaluate_split(&mnl, &ds, s)?;
        println!("{:<10} avg NLL {:.4}  accuracy {:.1}%", s.label(), m.avg_nll, 100.0 * m.accuracy);
    }

    let schema = ds.schema();
    println!("\nalternative  b_time/min   b_cost/CHF   VOT CHF/h");
    for (j, alt) in schema.alternatives.iter().enumerate() {
        let tt = schema.constrained_feature(j, AttributeKind::TravelTime).expect("registered");
        let co = schema.constrained_feature(j, AttributeKind::Cost).expect("registered");
        println!(
            "{alt:<10} {:>12.5} {:>12.5} {:>11.1}",
            mnl.mnl_raw_coefficient(&ds, tt, j)?,
            mnl.mnl_raw_coefficient(&ds, co, j)?,
            extract_mnl_vot(&mnl, &ds, j)?
        );
    }
    Ok(())
}
