//! Generate choices from a known MNL and check that estimation recovers
//! the generating coefficients.
//!
//! cargo run --example synthetic_recovery

use monochoice::cli::{synth_recovery, RunConfig};
use monochoice::dataio::{generate_synthetic_mnl, SyntheticMnl};
use monochoice::knowledge::ConstraintSet;
use monochoice::models::{Architecture, ChoiceModel, ModelKind};
use monochoice::training::train;

fn main() -> monochoice::Result<()> {
    let truth = SyntheticMnl::reference();
    let ds = generate_synthetic_mnl(&truth, 50_000, 5)?
        .split([0.6, 0.2, 0.2], 5)?
        .fit_apply_scaling()?;
    let mut model = ChoiceModel::new(Architecture::default_for(ModelKind::Mnl), &ds, 1)?;
    let history = train(&mut model, &ds, &ConstraintSet::empty(), &RunConfig::default().synth_train_config())?;
    println!("converged after {} epochs", history.epochs.len());
    println!("parameter       truth   estimate   error");
    for r in synth_recovery(&model, &ds, &truth)? {
        println!(
            "{:<12} {:>8.4} {:>10.4} {:>6.2}%",
            r.parameter,
            r.truth,
            r.estimate,
            100.0 * r.relative_error
        );
    }
    Ok(())
}
