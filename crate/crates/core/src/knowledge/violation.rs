use super::{MonotonicityConstraint, PseudoPair};
use crate::diffcore::{PairTerm, ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::ChoiceModel;

/// Pairs probing one constraint, with the multiplier applied to its loss
/// (`lambda * w_{c,m}` during training).
#[derive(Debug, Clone, Copy)]
pub struct KnowledgeTerm<'a> {
    pub constraint: &'a MonotonicityConstraint,
    pub pairs: &'a [PseudoPair],
    pub weight: f64,
}

/// Stacks all `x1` rows, then all `x2` rows, of every term.
fn stack(terms: &[KnowledgeTerm<'_>], dim: usize) -> Result<(Tensor, Vec<bool>, usize)> {
    let n: usize = terms.iter().map(|t| t.pairs.len()).sum();
    let mut x = Vec::with_capacity(2 * n * dim);
    let mut avail = Vec::new();
    for second in [false, true] {
        for t in terms {
            for p in t.pairs {
                let row = if second { &p.x2 } else { &p.x1 };
                if row.len() != dim {
                    return Err(Error::Shape(format!(
                        "pseudo pair has {} features, model expects {dim}",
                        row.len()
                    )));
                }
                x.extend_from_slice(row);
                avail.extend_from_slice(&p.avail);
            }
        }
    }
    Ok((Tensor::new(vec![2 * n, dim], x)?, avail, n))
}

/// Records `sum_t weight_t * L_t` where, for the pairs of term `t` on
/// constraint `(c, m, d)`,
/// `L_t = sum_k max(0, -d * (p_c(x2_k) - p_c(x1_k)) / delta_k)`.
///
/// Returns `None` when there are no pairs at all; otherwise the recorded
/// scalar and the unweighted `L_t` of each term.
pub fn knowledge_loss(
    model: &ChoiceModel,
    tape: &mut Tape,
    params: &ParameterStore,
    terms: &[KnowledgeTerm<'_>],
) -> Result<Option<(Var, Vec<f64>)>> {
    let (x, avail, n) = stack(terms, model.input_dim())?;
    if n == 0 {
        return Ok(None);
    }
    let probs = model.probabilities_with(tape, params, &x, &avail)?;
    let mut pair_terms = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut offset = 0;
    for t in terms {
        let sign = t.constraint.direction.sign();
        for (k, p) in t.pairs.iter().enumerate() {
            pair_terms.push(PairTerm {
                first: offset + k,
                second: n + offset + k,
                col: t.constraint.alternative,
                coef: -sign / p.delta,
            });
            weights.push(t.weight);
        }
        offset += t.pairs.len();
    }
    let diffs = tape.pair_diff(probs, pair_terms)?;
    let hinge = tape.relu(diffs);
    let per_term = {
        let v = tape.value(hinge).values();
        let mut out = Vec::with_capacity(terms.len());
        let mut start = 0;
        for t in terms {
            out.push(v[start..start + t.pairs.len()].iter().sum());
            start += t.pairs.len();
        }
        out
    };
    let total = tape.weighted_sum(hinge, weights)?;
    Ok(Some((total, per_term)))
}

/// Differentiable violation loss of one constraint over its pairs
/// (zero-pair input records a constant 0).
pub fn violation_loss(
    model: &ChoiceModel,
    tape: &mut Tape,
    params: &ParameterStore,
    constraint: &MonotonicityConstraint,
    pairs: &[PseudoPair],
) -> Result<Var> {
    let term = KnowledgeTerm {
        constraint,
        pairs,
        weight: 1.0,
    };
    match knowledge_loss(model, tape, params, &[term])? {
        Some((v, _)) => Ok(v),
        None => Ok(tape.constant(Tensor::scalar(0.0))),
    }
}

/// Value of [`violation_loss`] with the model's own parameters.
pub fn violation_loss_value(
    model: &ChoiceModel,
    constraint: &MonotonicityConstraint,
    pairs: &[PseudoPair],
) -> Result<f64> {
    let mut tape = Tape::new();
    let v = violation_loss(model, &mut tape, model.params(), constraint, pairs)?;
    Ok(tape.value(v).item())
}

/// Finite-difference derivatives `(p_alt(x2) - p_alt(x1)) / delta`.
pub fn pair_derivatives(model: &ChoiceModel, alternative: usize, pairs: &[PseudoPair]) -> Result<Vec<f64>> {
    let dummy = MonotonicityConstraint {
        alternative,
        feature: 0,
        direction: super::Direction::Increasing,
        weight: 1.0,
    };
    let (x, avail, n) = stack(
        &[KnowledgeTerm {
            constraint: &dummy,
            pairs,
            weight: 1.0,
        }],
        model.input_dim(),
    )?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let p = model.predict_proba(&x, &avail)?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, pair)| (p.get(n + k, alternative) - p.get(k, alternative)) / pair.delta)
        .collect())
}
