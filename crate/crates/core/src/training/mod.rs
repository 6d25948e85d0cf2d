//! Losses, the minibatch training loop and split metrics.

mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use optim::{Optimizer, OptimizerKind};

use crate::dataio::{Batch, Dataset, Split};
use crate::diffcore::{floored_ln, ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::knowledge::{generate_pseudo_pairs, knowledge_loss, ConstraintSet, KnowledgeTerm, PseudoConfig, PseudoPair};
use crate::models::{argmax_rows, ChoiceModel};
use crate::util::{derive_seed, pairwise_sum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// global multiplier on every constraint weight
    pub lambda: f64,
    pub pairs_per_constraint: usize,
    pub delta: Option<f64>,
    pub range_extension: f64,
    /// epochs without validation improvement before stopping
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let p = PseudoConfig::default();
        Self {
            max_epochs: 500,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            lambda: 1.0,
            pairs_per_constraint: p.k,
            delta: p.delta,
            range_extension: p.range_extension,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("training: {what}")));
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        if self.pairs_per_constraint == 0 {
            return bad("pairs_per_constraint must be >= 1");
        }
        if self.delta.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return bad("delta must be positive");
        }
        if !(self.range_extension >= 0.0 && self.range_extension.is_finite()) {
            return bad("range_extension must be >= 0");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        Ok(())
    }

    pub fn pseudo(&self) -> PseudoConfig {
        PseudoConfig {
            k: self.pairs_per_constraint,
            delta: self.delta,
            range_extension: self.range_extension,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based
    pub epoch: usize,
    /// mean per-sample NLL over the epoch's minibatches (before each update)
    pub train_nll: f64,
    pub val_nll: f64,
    /// sum over minibatches of the scaled objective
    pub total_loss: f64,
    /// unweighted violation loss per constraint, summed over minibatches
    pub constraint_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub constraint_labels: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    /// epoch whose parameters were returned
    pub best_epoch: usize,
    pub best_val_nll: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// Tab-separated table: epoch, train NLL, val NLL, constraint-loss total,
    /// then one column per constraint.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\ttrain_nll\tval_nll\tconstraint_total");
        for l in &self.constraint_labels {
            s.push('\t');
            s.push_str(l);
        }
        s.push('\n');
        for e in &self.epochs {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}",
                e.epoch,
                e.train_nll,
                e.val_nll,
                e.constraint_losses.iter().sum::<f64>()
            ));
            for v in &e.constraint_losses {
                s.push_str(&format!("\t{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Summed NLL `-sum_i log p[i, chosen_i]` of a probability table.
pub fn nll_loss(probs: &Tensor, chosen: &[usize]) -> Result<f64> {
    if probs.rows() != chosen.len() {
        return Err(Error::Shape(format!(
            "{} probability rows but {} choices",
            probs.rows(),
            chosen.len()
        )));
    }
    let mut terms = Vec::with_capacity(chosen.len());
    for (i, &c) in chosen.iter().enumerate() {
        if c >= probs.cols() {
            return Err(Error::Shape(format!("choice {c} out of range")));
        }
        let p = probs.get(i, c);
        if p == 0.0 {
            return Err(Error::Domain(format!("chosen alternative {c} has probability 0 in row {i}")));
        }
        terms.push(-floored_ln(p));
    }
    Ok(pairwise_sum(&terms))
}

/// `nll + lambda * sum_c weights[c] * losses[c]`.
pub fn total_loss(nll: f64, losses: &[f64], weights: &[f64], lambda: f64) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::Shape(format!("{} losses, {} weights", losses.len(), weights.len())));
    }
    if lambda == 0.0 {
        return Ok(nll);
    }
    let k: Vec<f64> = losses.iter().zip(weights).map(|(l, w)| w * l).collect();
    Ok(nll + lambda * pairwise_sum(&k))
}

/// One recorded objective and its components.
#[derive(Debug, Clone)]
pub struct Objective {
    pub total: Var,
    pub nll: f64,
    /// `lambda * sum w L` before scaling
    pub knowledge: f64,
    pub per_constraint: Vec<f64>,
}

/// Records `scale * (NLL(batch) + lambda * sum_t w_t L_t)` on `tape`.
/// Term weights are the constraint weights `w`; with `lambda == 0` or no
/// terms the knowledge part is not recorded at all.
pub fn record_objective(
    model: &ChoiceModel,
    tape: &mut Tape,
    params: &ParameterStore,
    batch: &Batch,
    terms: &[KnowledgeTerm<'_>],
    lambda: f64,
    scale: f64,
) -> Result<Objective> {
    let probs = model.probabilities_with(tape, params, &batch.x, &batch.avail)?;
    let nll = tape.nll(probs, &batch.choices)?;
    let nll_value = tape.value(nll).item();
    let mut total = nll;
    let mut knowledge = 0.0;
    let mut per_constraint = vec![0.0; terms.len()];
    if lambda > 0.0 && !terms.is_empty() {
        let weighted: Vec<KnowledgeTerm<'_>> = terms
            .iter()
            .map(|t| KnowledgeTerm {
                weight: lambda * t.weight,
                ..*t
            })
            .collect();
        if let Some((k, per)) = knowledge_loss(model, tape, params, &weighted)? {
            knowledge = tape.value(k).item();
            per_constraint = per;
            total = tape.add(nll, k)?;
        }
    }
    let total = tape.scale(total, scale);
    Ok(Objective {
        total,
        nll: nll_value,
        knowledge,
        per_constraint,
    })
}

/// Probabilities `[indices.len(), C]` evaluated in fixed-size chunks.
pub fn predict_indices(model: &ChoiceModel, dataset: &Dataset, indices: &[usize]) -> Result<(Tensor, Batch)> {
    let batch = dataset.batch(indices)?;
    let c = model.alternatives();
    let d = model.input_dim();
    let mut values = Vec::with_capacity(indices.len() * c);
    for start in (0..indices.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(indices.len());
        let x = Tensor::new(vec![end - start, d], batch.x.values()[start * d..end * d].to_vec())?;
        let p = model.predict_proba(&x, &batch.avail[start * c..end * c])?;
        values.extend_from_slice(p.values());
    }
    Ok((Tensor::new(vec![indices.len(), c], values)?, batch))
}

const EVAL_CHUNK: usize = 4096;

/// Average NLL and argmax accuracy over one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub count: usize,
    pub avg_nll: f64,
    pub accuracy: f64,
}

pub fn evaluate_split(model: &ChoiceModel, dataset: &Dataset, split: Split) -> Result<SplitMetrics> {
    model.check_compatible(dataset)?;
    let idx = dataset.indices(split);
    if idx.is_empty() {
        return Err(Error::Domain(format!("{} split is empty", split.label())));
    }
    let (p, batch) = predict_indices(model, dataset, &idx)?;
    let nll = nll_loss(&p, &batch.choices)?;
    let pred = argmax_rows(&p, &batch.avail);
    let hits = pred.iter().zip(&batch.choices).filter(|(a, b)| a == b).count();
    Ok(SplitMetrics {
        count: idx.len(),
        avg_nll: nll / idx.len() as f64,
        accuracy: hits as f64 / idx.len() as f64,
    })
}

const SHUFFLE_STREAM: u64 = 1;
const PAIR_STREAM: u64 = 2;

/// Trains `model` in place and leaves it holding the parameters of the
/// epoch with the lowest validation NLL.
///
/// Each epoch shuffles the training split, regenerates `K` pseudo pairs per
/// constraint and gives every minibatch a proportional slice of them, so
/// every update sees both the likelihood and the constraint terms. Both
/// terms are scaled by `1 / batch_count`.
pub fn train(
    model: &mut ChoiceModel,
    dataset: &Dataset,
    constraints: &ConstraintSet,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    model.check_compatible(dataset)?;
    constraints.validate(dataset.schema())?;
    let mut train_idx = dataset.indices(Split::Train);
    let val_idx = dataset.indices(Split::Validation);
    if train_idx.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if val_idx.is_empty() {
        return Err(Error::Config("validation split is empty; early stopping needs it".into()));
    }
    let active: Vec<_> = if config.lambda > 0.0 {
        constraints.constraints.clone()
    } else {
        Vec::new()
    };
    let schema = dataset.schema();
    let labels = active
        .iter()
        .map(|c| format!("P({})~{}", schema.alternatives[c.alternative], schema.features[c.feature].name))
        .collect();

    let val_batch = dataset.batch(&val_idx)?;
    let mut params = model.params().clone();
    params.zero_grad();
    let mut best = params.clone();
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[SHUFFLE_STREAM]));
    let pseudo = config.pseudo();
    let batches = train_idx.len().div_ceil(config.batch_size);
    let scale = 1.0 / batches as f64;

    let mut history = TrainHistory {
        constraint_labels: labels,
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_nll: f64::INFINITY,
        stopped_early: false,
    };
    let mut since_best = 0;
    for epoch in 1..=config.max_epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let pairs: Vec<Vec<PseudoPair>> = active
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                generate_pseudo_pairs(dataset, c, &pseudo, derive_seed(config.seed, &[PAIR_STREAM, epoch as u64, ci as u64]))
            })
            .collect::<Result<_>>()?;

        let mut nll_sum = 0.0;
        let mut total_sum = 0.0;
        let mut per_constraint = vec![0.0; active.len()];
        for (b, chunk) in train_idx.chunks(config.batch_size).enumerate() {
            let batch = dataset.batch(chunk)?;
            let terms: Vec<KnowledgeTerm<'_>> = active
                .iter()
                .zip(&pairs)
                .map(|(c, p)| {
                    let (lo, hi) = (b * p.len() / batches, (b + 1) * p.len() / batches);
                    KnowledgeTerm {
                        constraint: c,
                        pairs: &p[lo..hi],
                        weight: c.weight,
                    }
                })
                .collect();
            let mut tape = Tape::new();
            let obj = record_objective(model, &mut tape, &params, &batch, &terms, config.lambda, scale)?;
            let total = tape.value(obj.total).item();
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    nll: obj.nll,
                    knowledge: obj.knowledge,
                });
            }
            nll_sum += obj.nll;
            total_sum += total;
            for (acc, v) in per_constraint.iter_mut().zip(&obj.per_constraint) {
                *acc += v;
            }
            params.zero_grad();
            tape.backward(obj.total, &mut params)?;
            optimizer.step(&mut params);
        }

        let val_nll = {
            let mut tape = Tape::new();
            let p = model.probabilities_with(&mut tape, &params, &val_batch.x, &val_batch.avail)?;
            nll_loss(tape.value(p), &val_batch.choices)? / val_idx.len() as f64
        };
        if !val_nll.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: batches,
                nll: val_nll,
                knowledge: 0.0,
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_nll: nll_sum / train_idx.len() as f64,
            val_nll,
            total_loss: total_sum,
            constraint_losses: per_constraint,
        });
        if val_nll < history.best_val_nll {
            history.best_val_nll = val_nll;
            history.best_epoch = epoch;
            best.copy_values_from(&params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    model.params_mut().copy_values_from(&best);
    Ok(history)
}
