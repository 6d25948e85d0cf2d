use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Split};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::ChoiceModel;
use crate::util::pairwise_sum;

const CHUNK: usize = 4096;

/// Mean predicted probability per alternative over `n` encoded rows.
pub(crate) fn mean_probabilities(model: &ChoiceModel, x: &[f64], avail: &[bool], n: usize) -> Result<Vec<f64>> {
    let c = model.alternatives();
    let d = model.input_dim();
    let mut cols = vec![Vec::with_capacity(n); c];
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let xt = Tensor::new(vec![end - start, d], x[start * d..end * d].to_vec())?;
        let p = model.predict_proba(&xt, &avail[start * c..end * c])?;
        for r in 0..end - start {
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(p.get(r, j));
            }
        }
    }
    Ok(cols.iter().map(|v| pairwise_sum(v) / n as f64).collect())
}

/// Encoded rows and availability of one split, flattened.
pub(crate) fn split_inputs(dataset: &Dataset, split: Split) -> Result<(Vec<usize>, Vec<f64>, Vec<bool>)> {
    let idx = dataset.indices(split);
    if idx.is_empty() {
        return Err(Error::Domain(format!("{} split is empty", split.label())));
    }
    let b = dataset.batch(&idx)?;
    Ok((idx, b.x.into_values(), b.avail))
}

/// Root mean squared difference of two share vectors, in their own units.
pub fn share_rmse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() || predicted.is_empty() {
        return Err(Error::Shape(format!(
            "share vectors of length {} and {}",
            predicted.len(),
            observed.len()
        )));
    }
    let sq: Vec<f64> = predicted.iter().zip(observed).map(|(p, o)| (p - o).powi(2)).collect();
    Ok((pairwise_sum(&sq) / sq.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketShareReport {
    pub split: Split,
    pub alternatives: Vec<String>,
    /// fractions
    pub predicted: Vec<f64>,
    pub observed: Vec<f64>,
    /// percentage points
    pub rmse: f64,
}

impl MarketShareReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("alternative\tpredicted_pct\tobserved_pct\n");
        for (j, a) in self.alternatives.iter().enumerate() {
            s.push_str(&format!("{a}\t{}\t{}\n", 100.0 * self.predicted[j], 100.0 * self.observed[j]));
        }
        s.push_str(&format!("rmse\t{}\t\n", self.rmse));
        s
    }
}

/// Mean predicted probabilities against observed choice frequencies.
pub fn market_shares(model: &ChoiceModel, dataset: &Dataset, split: Split) -> Result<MarketShareReport> {
    model.check_compatible(dataset)?;
    let (idx, x, avail) = split_inputs(dataset, split)?;
    let predicted = mean_probabilities(model, &x, &avail, idx.len())?;
    let mut counts = vec![0usize; dataset.alternative_count()];
    for &i in &idx {
        counts[dataset.observations()[i].choice] += 1;
    }
    let observed: Vec<f64> = counts.iter().map(|&k| k as f64 / idx.len() as f64).collect();
    let rmse = 100.0 * share_rmse(&predicted, &observed)?;
    Ok(MarketShareReport {
        split,
        alternatives: dataset.schema().alternatives.clone(),
        predicted,
        observed,
        rmse,
    })
}
