use super::{ParameterStore, Tape, Var};
use crate::error::{Error, Result};

/// Outcome of comparing tape gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// max over checked coordinates of `|analytic - central| / max(1, |central|)`
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose `±step` evaluations changed a relu/hinge pattern.
    pub skipped_at_kinks: usize,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// Max relative error between analytic and central-difference gradients of
/// the scalar built by `f`, over every parameter coordinate.
pub fn finite_difference_check<F>(f: F, store: &ParameterStore, step: f64) -> Result<f64>
where
    F: Fn(&ParameterStore, &mut Tape) -> Result<Var>,
{
    finite_difference_report(f, store, step, false).map(|r| r.max_rel_error)
}

/// Like [`finite_difference_check`], optionally skipping coordinates where
/// the perturbation crosses a relu or hinge kink (the function is not
/// differentiable there, so central differences are meaningless).
pub fn finite_difference_report<F>(
    f: F,
    store: &ParameterStore,
    step: f64,
    skip_kinks: bool,
) -> Result<FdReport>
where
    F: Fn(&ParameterStore, &mut Tape) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Domain(format!("finite difference step must be > 0, got {step}")));
    }
    let mut analytic = store.clone();
    analytic.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&analytic, &mut tape)?;
    let base_pattern = tape.kink_pattern();
    tape.backward(loss, &mut analytic)?;

    let eval = |s: &ParameterStore| -> Result<(f64, Vec<bool>)> {
        let mut t = Tape::new();
        let l = f(s, &mut t)?;
        let v = t.value(l).item();
        if !v.is_finite() {
            return Err(Error::Domain(format!("non-finite loss {v} at perturbed point")));
        }
        Ok((v, t.kink_pattern()))
    };

    let mut work = store.clone();
    let mut report = FdReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
        worst: None,
    };
    for id in store.ids() {
        for i in 0..store.value(id).len() {
            let orig = store.value(id).values()[i];
            work.value_mut(id).values_mut()[i] = orig + step;
            let (plus, pat_plus) = eval(&work)?;
            work.value_mut(id).values_mut()[i] = orig - step;
            let (minus, pat_minus) = eval(&work)?;
            work.value_mut(id).values_mut()[i] = orig;

            if skip_kinks && (pat_plus != base_pattern || pat_minus != base_pattern) {
                report.skipped_at_kinks += 1;
                continue;
            }
            let central = (plus - minus) / (2.0 * step);
            let a = analytic.grad(id).values()[i];
            let rel = (a - central).abs() / central.abs().max(1.0);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel;
                report.worst = Some((store.name(id).to_string(), i));
            }
        }
    }
    Ok(report)
}
