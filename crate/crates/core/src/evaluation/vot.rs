use serde::{Deserialize, Serialize};

use super::shares::split_inputs;
use crate::dataio::{percentile, AttributeKind, Dataset, Split};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::ChoiceModel;
use crate::util::pairwise_sum;

/// Cost derivatives (per CHF) smaller than this in magnitude make the ratio
/// degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

pub const DEFAULT_VOT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VotRecord {
    pub observation: usize,
    pub alternative: usize,
    /// `dP/dtime` per minute
    pub d_time: f64,
    /// `dP/dcost` per CHF
    pub d_cost: f64,
    /// `d_time / d_cost * 60` in CHF/hour, kept even when degenerate
    pub ratio: f64,
    pub degenerate: bool,
}

impl VotRecord {
    pub fn vot(&self) -> Option<f64> {
        (!self.degenerate).then_some(self.ratio)
    }
}

pub fn vot_records_tsv(records: &[VotRecord]) -> String {
    let mut s = String::from("observation\talternative\td_time\td_cost\tvot\tdegenerate\n");
    for r in records {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.observation, r.alternative, r.d_time, r.d_cost, r.ratio, r.degenerate
        ));
    }
    s
}

/// Derivative of `p[:, alt]` w.r.t. raw feature `m` at every row, by central
/// differences with steps `s, s/2, s/4` combined by Richardson
/// extrapolation (error `O(s^6)` on smooth models).
fn raw_derivative(
    model: &ChoiceModel,
    dataset: &Dataset,
    idx: &[usize],
    base: &[f64],
    avail: &[bool],
    m: usize,
    alt: usize,
    step: f64,
) -> Result<Vec<f64>> {
    let col = dataset.encoded_index(m)?;
    let d = dataset.encoded_dim();
    let n = idx.len();
    let mut x = base.to_vec();
    let mut central = |s: f64| -> Result<Vec<f64>> {
        let mut sides = Vec::with_capacity(2);
        for sign in [1.0, -1.0] {
            for (r, &i) in idx.iter().enumerate() {
                let raw = dataset.observations()[i].x[m];
                x[r * d + col] = dataset.scale_value(m, raw + sign * s)?;
            }
            let p = model.predict_proba(&Tensor::new(vec![n, d], x.clone())?, avail)?;
            sides.push((0..n).map(|r| p.get(r, alt)).collect::<Vec<_>>());
        }
        Ok(sides[0].iter().zip(&sides[1]).map(|(a, b)| (a - b) / (2.0 * s)).collect())
    };
    let d1 = central(step)?;
    let d2 = central(step / 2.0)?;
    let d3 = central(step / 4.0)?;
    Ok((0..n)
        .map(|r| {
            let r1 = (4.0 * d2[r] - d1[r]) / 3.0;
            let r2 = (4.0 * d3[r] - d2[r]) / 3.0;
            (16.0 * r2 - r1) / 15.0
        })
        .collect())
}

/// Raw `(max - min)` of feature `m` over the training split.
fn raw_span(dataset: &Dataset, m: usize) -> f64 {
    let (lo, hi) = dataset
        .indices(Split::Train)
        .iter()
        .map(|&i| dataset.observations()[i].x[m])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

/// Per-observation value of time of alternative `alt`: the ratio of the
/// derivatives of `P_alt` w.r.t. its own raw travel time and cost, times
/// 60. Probe steps are `h` times each feature's training span.
pub fn vot_per_observation(
    model: &ChoiceModel,
    dataset: &Dataset,
    split: Split,
    alt: usize,
    h: f64,
) -> Result<Vec<VotRecord>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("VOT probe step must be > 0, got {h}")));
    }
    model.check_compatible(dataset)?;
    let schema = dataset.schema();
    let feature = |kind: AttributeKind| {
        schema.constrained_feature(alt, kind).ok_or_else(|| {
            Error::Config(format!("alternative {alt} has no unique {} feature", kind.label()))
        })
    };
    let (tt, co) = (feature(AttributeKind::TravelTime)?, feature(AttributeKind::Cost)?);
    let (idx, base, avail) = split_inputs(dataset, split)?;
    let dt = raw_derivative(model, dataset, &idx, &base, &avail, tt, alt, h * raw_span(dataset, tt))?;
    let dc = raw_derivative(model, dataset, &idx, &base, &avail, co, alt, h * raw_span(dataset, co))?;
    Ok(idx
        .iter()
        .zip(dt.into_iter().zip(dc))
        .map(|(&i, (d_time, d_cost))| VotRecord {
            observation: i,
            alternative: alt,
            d_time,
            d_cost,
            ratio: d_time / d_cost * 60.0,
            degenerate: !(d_cost.abs() >= DEGENERATE_DENOMINATOR),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// quantile window the bins cover
    pub window: (f64, f64),
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// records outside the window
    pub clipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotStats {
    pub count: usize,
    pub degenerate: usize,
    pub mean: f64,
    pub median: f64,
    /// 0..=100
    pub percent_negative: f64,
    /// mean over every finite ratio, degenerate ones included
    pub unfiltered_mean: f64,
    pub histogram: Histogram,
}

pub const DEFAULT_HISTOGRAM_WINDOW: (f64, f64) = (0.005, 0.995);
pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

/// Descriptive statistics over non-degenerate records; the histogram only
/// covers the `window` quantile range.
pub fn vot_stats(records: &[VotRecord], window: (f64, f64), bins: usize) -> Result<VotStats> {
    if !(0.0 <= window.0 && window.0 < window.1 && window.1 <= 1.0) || bins == 0 {
        return Err(Error::Config(format!("bad histogram window {window:?} / bins {bins}")));
    }
    let mut v: Vec<f64> = records.iter().filter_map(VotRecord::vot).collect();
    if v.is_empty() {
        return Err(Error::Domain("no non-degenerate VOT records".into()));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    let finite: Vec<f64> = records.iter().map(|r| r.ratio).filter(|r| r.is_finite()).collect();
    let lo = percentile(&v, 100.0 * window.0);
    let hi = percentile(&v, 100.0 * window.1);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let mut counts = vec![0; bins];
    let mut clipped = 0;
    for &x in &v {
        if x < lo || x > hi {
            clipped += 1;
        } else if width > 0.0 {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        } else {
            counts[0] += 1;
        }
    }
    Ok(VotStats {
        count: n,
        degenerate: records.len() - n,
        mean: pairwise_sum(&v) / n as f64,
        median,
        percent_negative: 100.0 * v.iter().filter(|&&x| x < 0.0).count() as f64 / n as f64,
        unfiltered_mean: pairwise_sum(&finite) / finite.len() as f64,
        histogram: Histogram {
            window,
            edges,
            counts,
            clipped,
        },
    })
}
