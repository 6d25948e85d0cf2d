//! Market shares, probability sweeps and value-of-time analysis of fitted
//! models.

mod shares;
mod sweep;
mod vot;

pub use shares::{market_shares, share_rmse, MarketShareReport};
pub use sweep::{
    curve_monotonicity_report, default_grid, expected_directions, probability_sweep, CurveCheck,
    MonotonicityReport, SweepCurve, CURVE_TOLERANCE,
};
pub use vot::{
    vot_per_observation, vot_records_tsv, vot_stats, Histogram, VotRecord, VotStats, DEFAULT_HISTOGRAM_BINS,
    DEFAULT_HISTOGRAM_WINDOW, DEFAULT_VOT_STEP, DEGENERATE_DENOMINATOR,
};

/// One row per `(label, stats)`: count, degenerate, mean, median, percent
/// negative and the unfiltered mean.
pub fn vot_stats_tsv(rows: &[(String, VotStats)]) -> String {
    let mut s = String::from("alternative\tcount\tdegenerate\tmean\tmedian\tpct_negative\tunfiltered_mean\n");
    for (label, v) in rows {
        s.push_str(&format!(
            "{label}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            v.count, v.degenerate, v.mean, v.median, v.percent_negative, v.unfiltered_mean
        ));
    }
    s
}

/// Bin edges and counts, one bin per line.
pub fn histogram_tsv(h: &Histogram) -> String {
    let mut s = String::from("lower\tupper\tcount\n");
    for (b, c) in h.counts.iter().enumerate() {
        s.push_str(&format!("{}\t{}\t{c}\n", h.edges[b], h.edges[b + 1]));
    }
    s
}

#[cfg(test)]
mod tests;
