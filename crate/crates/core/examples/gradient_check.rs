//! Build a small objective on the tape by hand and compare its reverse-mode
//! gradient with central differences.
//!
//! cargo run --example gradient_check

use monochoice::diffcore::{finite_difference_report, ParameterStore, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> monochoice::Result<()> {
    // Four observations, three features, three alternatives.
    let x = Tensor::from_rows(&[
        [0.2, -1.0, 0.5],
        [1.3, 0.4, -0.7],
        [-0.6, 0.9, 0.1],
        [0.0, -0.3, 1.8],
    ])?;
    let avail = vec![true, true, true, true, false, true, true, true, true, true, true, false];
    let chosen = [0, 2, 1, 1];

    let mut store = ParameterStore::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w1 = store.add_he_uniform("w1", &[3, 5], 3, &mut rng);
    let b1 = store.add("b1", Tensor::full(&[1, 5], 0.1));
    let w2 = store.add_he_uniform("w2", &[5, 3], 5, &mut rng);
    let b2 = store.add("b2", Tensor::zeros(&[1, 3]));

    let objective = |s: &ParameterStore, t: &mut Tape| {
        let input = t.constant(x.clone());
        let (w1, b1, w2, b2) = (t.param(s, w1), t.param(s, b1), t.param(s, w2), t.param(s, b2));
        let h = t.affine(input, w1, b1)?;
        let h = t.relu(h);
        let scores = t.affine(h, w2, b2)?;
        let p = t.masked_softmax(scores, &avail)?;
        t.nll(p, &chosen)
    };

    let mut tape = Tape::new();
    let loss = objective(&store, &mut tape)?;
    println!("NLL of 4 observations: {:.6}", tape.value(loss).item());

    let report = finite_difference_report(objective, &store, 1e-5, true)?;
    println!(
        "max relative gradient error {:.2e} over {} coordinates ({} skipped at relu kinks)",
        report.max_rel_error, report.checked, report.skipped_at_kinks
    );
    Ok(())
}
