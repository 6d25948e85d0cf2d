use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureSchema, Observation};
use crate::diffcore::masked_softmax_values;
use crate::error::{Error, Result};

/// Known-truth MNL used to generate oracle datasets. Coefficients are in raw
/// units (per minute, per CHF); one entry per alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticMnl {
    pub asc: Vec<f64>,
    pub beta_time: Vec<f64>,
    pub beta_cost: Vec<f64>,
    pub time_range: (f64, f64),
    pub cost_range: (f64, f64),
}

impl SyntheticMnl {
    /// Three alternatives sharing time -0.02/min and cost -0.01/CHF.
    pub fn reference() -> Self {
        Self {
            asc: vec![0.0, 0.8, -0.6],
            beta_time: vec![-0.02; 3],
            beta_cost: vec![-0.01; 3],
            time_range: (10.0, 300.0),
            cost_range: (5.0, 500.0),
        }
    }

    pub fn alternatives(&self) -> usize {
        self.asc.len()
    }

    /// Exact choice probabilities for raw features laid out as
    /// `[t_1, c_1, t_2, c_2, ...]`.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.alternatives())
            .map(|j| self.asc[j] + self.beta_time[j] * x[2 * j] + self.beta_cost[j] * x[2 * j + 1])
            .collect();
        masked_softmax_values(&scores, &vec![true; scores.len()], scores.len())
            .expect("all alternatives available")
    }

    fn validate(&self) -> Result<()> {
        let c = self.alternatives();
        if c < 2 || self.beta_time.len() != c || self.beta_cost.len() != c {
            return Err(Error::Config(
                "synthetic MNL needs >= 2 alternatives and one coefficient of each kind per alternative".into(),
            ));
        }
        for (lo, hi) in [self.time_range, self.cost_range] {
            if !(hi > lo) {
                return Err(Error::Config(format!("attribute range ({lo}, {hi}) has no width")));
            }
        }
        Ok(())
    }
}

/// Draws `n` observations: attributes uniform in their ranges, choices
/// sampled from the exact MNL probabilities; every alternative available.
pub fn generate_synthetic_mnl(truth: &SyntheticMnl, n: usize, seed: u64) -> Result<Dataset> {
    truth.validate()?;
    if n == 0 {
        return Err(Error::Config("synthetic sample size must be positive".into()));
    }
    let c = truth.alternatives();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = Vec::with_capacity(2 * c);
        for _ in 0..c {
            x.push(rng.random_range(truth.time_range.0..truth.time_range.1));
            x.push(rng.random_range(truth.cost_range.0..truth.cost_range.1));
        }
        let p = truth.probabilities(&x);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut choice = c - 1;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                choice = j;
                break;
            }
        }
        obs.push(Observation::new(x, choice, vec![true; c], i as i64)?);
    }
    Dataset::new(FeatureSchema::time_cost_only(c), obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shares(ds: &Dataset) -> Vec<f64> {
        let c = ds.alternative_count();
        let mut counts = vec![0.0; c];
        for o in ds.observations() {
            counts[o.choice] += 1.0;
        }
        counts.iter().map(|k| k / ds.len() as f64).collect()
    }

    #[test]
    fn zero_coefficients_give_equal_shares() {
        let truth = SyntheticMnl {
            asc: vec![0.0; 3],
            beta_time: vec![0.0; 3],
            beta_cost: vec![0.0; 3],
            time_range: (10.0, 100.0),
            cost_range: (1.0, 50.0),
        };
        let ds = generate_synthetic_mnl(&truth, 30_000, 17).unwrap();
        for s in shares(&ds) {
            assert!((0.323..=0.344).contains(&s), "{s}");
        }
    }

    #[test]
    fn dominant_alternative_saturates() {
        let truth = SyntheticMnl {
            asc: vec![20.0, 0.0, 0.0],
            beta_time: vec![0.0; 3],
            beta_cost: vec![0.0; 3],
            time_range: (10.0, 100.0),
            cost_range: (1.0, 50.0),
        };
        let ds = generate_synthetic_mnl(&truth, 5_000, 3).unwrap();
        assert!(shares(&ds)[0] > 0.999);
    }

    #[test]
    fn attributes_stay_in_range() {
        let truth = SyntheticMnl::reference();
        let ds = generate_synthetic_mnl(&truth, 500, 1).unwrap();
        for o in ds.observations() {
            for j in 0..3 {
                assert!((10.0..300.0).contains(&o.x[2 * j]));
                assert!((5.0..500.0).contains(&o.x[2 * j + 1]));
            }
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let mut t = SyntheticMnl::reference();
        assert!(generate_synthetic_mnl(&t, 0, 1).is_err());
        t.cost_range = (3.0, 3.0);
        assert!(generate_synthetic_mnl(&t, 10, 1).is_err());
    }

    #[test]
    fn same_seed_same_data() {
        let t = SyntheticMnl::reference();
        assert_eq!(
            generate_synthetic_mnl(&t, 200, 4).unwrap(),
            generate_synthetic_mnl(&t, 200, 4).unwrap()
        );
    }
}
