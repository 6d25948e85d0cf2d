//! Fixtures shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::{Dataset, FeatureSchema, Observation};

/// Random observations shaped like filtered Swissmetro rows, split and
/// scaled. Choices follow a noisy time/cost utility so models have
/// something to fit.
pub fn swissmetro_like(n: usize, seed: u64) -> Dataset {
    let schema = FeatureSchema::swissmetro();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Vec::with_capacity(n);
    for i in 0..n {
        let x = vec![
            rng.random_range(40.0..400.0),
            rng.random_range(10.0..250.0),
            [30.0, 60.0, 120.0][rng.random_range(0..3)],
            rng.random_range(20.0..200.0),
            rng.random_range(10.0..300.0),
            [10.0, 20.0, 30.0][rng.random_range(0..3)],
            rng.random_range(30.0..500.0),
            rng.random_range(8.0..300.0),
            rng.random_range(0..2) as f64,
            [2.0, 3.0][rng.random_range(0..2)],
            rng.random_range(1..9) as f64,
            rng.random_range(0..2) as f64,
            [0.0, 1.0, 3.0][rng.random_range(0..3)],
            rng.random_range(1..6) as f64,
            rng.random_range(0..2) as f64,
            rng.random_range(0..4) as f64,
        ];
        let u = [
            -0.01 * x[0] - 0.01 * x[1],
            0.5 - 0.01 * x[3] - 0.01 * x[4],
            0.2 - 0.01 * x[6] - 0.01 * x[7],
        ];
        let choice = (0..3)
            .map(|j| (j, u[j] - (-rng.random::<f64>().ln()).ln()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        obs.push(Observation::new(x, choice, vec![true; 3], i as i64 / 9).unwrap());
    }
    Dataset::new(schema, obs)
        .unwrap()
        .split([0.6, 0.2, 0.2], seed)
        .unwrap()
        .fit_apply_scaling()
        .unwrap()
}
