use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::dataio::{AttributeKind, Dataset, Split};
use crate::knowledge::Direction;
use crate::models::{extract_mnl_vot, Architecture, ChoiceModel, ModelKind};
use crate::testutil::swissmetro_like;

fn rmse_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    (s / a.len() as f64).sqrt()
}

#[test]
fn rmse_examples() {
    let pred = [6.4, 56.4, 37.2];
    let obs = [6.8, 56.0, 37.3];
    let got = share_rmse(&pred, &obs).unwrap();
    assert_abs_diff_eq!(got, rmse_oracle(&pred, &obs), epsilon = 1e-12);
    assert!((got - 0.332).abs() < 0.01);
    assert_abs_diff_eq!(share_rmse(&[0.6, 0.4], &[0.5, 0.5]).unwrap(), 0.1, epsilon = 1e-15);
    assert_eq!(share_rmse(&obs, &obs).unwrap(), 0.0);
    assert!(share_rmse(&[0.5], &[0.5, 0.5]).is_err());
}

proptest! {
    #[test]
    fn rmse_is_permutation_invariant(v in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..6), rot in 0usize..6) {
        let (a, b): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
        let k = rot % a.len();
        let (mut ra, mut rb) = (a.clone(), b.clone());
        ra.rotate_left(k);
        rb.rotate_left(k);
        let x = share_rmse(&a, &b).unwrap();
        prop_assert!((x - share_rmse(&ra, &rb).unwrap()).abs() < 1e-12);
        prop_assert!(x >= 0.0);
        prop_assert_eq!(x == 0.0, a == b);
    }
}

fn mnl_with(ds: &Dataset, time: f64, cost: f64) -> ChoiceModel {
    let mut m = ChoiceModel::new(Architecture::default_for(ModelKind::Mnl), ds, 0).unwrap();
    let id = m.params().find("mnl.beta").unwrap();
    for j in 0..3 {
        let t = ds.schema().constrained_feature(j, AttributeKind::TravelTime).unwrap();
        let c = ds.schema().constrained_feature(j, AttributeKind::Cost).unwrap();
        let (ct, cc) = (ds.encoded_index(t).unwrap(), ds.encoded_index(c).unwrap());
        m.params_mut().value_mut(id).set(ct, j, time * (1.0 + 0.3 * j as f64));
        m.params_mut().value_mut(id).set(cc, j, cost * (1.0 + 0.2 * j as f64));
    }
    m
}

#[test]
fn market_shares_sum_to_one_and_count_choices() {
    let ds = swissmetro_like(150, 1);
    let m = ChoiceModel::new(Architecture::default_for(ModelKind::Dnn), &ds, 4).unwrap();
    let r = market_shares(&m, &ds, Split::Test).unwrap();
    assert_abs_diff_eq!(r.predicted.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(r.observed.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    let idx = ds.indices(Split::Test);
    let car = idx.iter().filter(|&&i| ds.observations()[i].choice == 2).count();
    assert_eq!(r.observed[2], car as f64 / idx.len() as f64);
    assert_abs_diff_eq!(r.rmse, 100.0 * rmse_oracle(&r.predicted, &r.observed), epsilon = 1e-9);
    assert!(r.to_tsv().starts_with("alternative\t"));

    let flat = ChoiceModel::new(Architecture::default_for(ModelKind::Mnl), &ds, 0).unwrap();
    let u = market_shares(&flat, &ds, Split::Train).unwrap();
    for p in u.predicted {
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
    }
}

#[test]
fn sweep_at_zero_reproduces_market_shares_exactly() {
    let ds = swissmetro_like(150, 2);
    let m = ChoiceModel::new(Architecture::default_for(ModelKind::AsuDnn), &ds, 4).unwrap();
    let grid = default_grid();
    assert_eq!(grid.len(), 21);
    assert_eq!(grid[10], 0.0);
    let curve = probability_sweep(&m, &ds, Split::Validation, 4, &grid).unwrap();
    let shares = market_shares(&m, &ds, Split::Validation).unwrap();
    assert_eq!(curve.probabilities[10], shares.predicted);
    for row in &curve.probabilities {
        assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }
    assert_eq!(curve.to_tsv().lines().count(), 22);
    assert!(curve.to_tsv().starts_with("q\tP_train\tP_sm\tP_car\n"));
}

#[test]
fn sweep_rejects_categorical_feature_and_bad_grid() {
    let ds = swissmetro_like(60, 2);
    let m = ChoiceModel::new(Architecture::default_for(ModelKind::Mnl), &ds, 0).unwrap();
    let age = ds.schema().feature_index("age").unwrap();
    assert!(probability_sweep(&m, &ds, Split::Train, age, &default_grid()).is_err());
    assert!(probability_sweep(&m, &ds, Split::Train, 0, &[0.1, 0.0]).is_err());
}

#[test]
fn negative_mnl_sweeps_are_monotone_in_the_expected_directions() {
    let ds = swissmetro_like(200, 3);
    let m = mnl_with(&ds, -0.8, -0.5);
    for j in 0..3 {
        for kind in [AttributeKind::TravelTime, AttributeKind::Cost] {
            let f = ds.schema().constrained_feature(j, kind).unwrap();
            let curve = probability_sweep(&m, &ds, Split::Train, f, &default_grid()).unwrap();
            for g in 0..20 {
                assert!(curve.probabilities[g + 1][j] < curve.probabilities[g][j]);
            }
            let dirs = expected_directions(ds.schema(), f);
            assert_eq!(dirs[j], Some(Direction::Decreasing));
            let report = curve_monotonicity_report(&curve, &dirs).unwrap();
            assert_eq!(report.violation_count(), 0, "{}", report.to_tsv());
        }
    }
    assert_eq!(expected_directions(ds.schema(), 2), vec![None; 3]);
}

fn curve(values: &[f64]) -> SweepCurve {
    SweepCurve {
        model: "toy".into(),
        feature: "x".into(),
        feature_index: 0,
        split: Split::Train,
        alternatives: vec!["a".into(), "b".into()],
        grid: (0..values.len()).map(|i| i as f64).collect(),
        probabilities: values.iter().map(|&p| vec![p, 1.0 - p]).collect(),
    }
}

#[test]
fn monotonicity_report_examples() {
    let dec = [Some(Direction::Decreasing), Some(Direction::Increasing)];
    let r = curve_monotonicity_report(&curve(&[0.9, 0.7, 0.5, 0.2]), &dec).unwrap();
    assert_eq!(r.violation_count(), 0);

    let r = curve_monotonicity_report(&curve(&[0.9, 0.6, 0.65, 0.5]), &dec).unwrap();
    assert_eq!(r.checks[0].violations, vec![1]);
    assert_eq!(r.checks[1].violations, vec![1]);
    assert_abs_diff_eq!(r.checks[0].worst, 0.05, epsilon = 1e-12);

    let r = curve_monotonicity_report(&curve(&[0.4, 0.4, 0.4]), &dec).unwrap();
    assert_eq!(r.violation_count(), 0);

    let r = curve_monotonicity_report(&curve(&[0.4, 0.4 + 1e-12]), &dec).unwrap();
    assert_eq!(r.violation_count(), 0);

    assert!(curve_monotonicity_report(&curve(&[0.4]), &dec[..1]).is_err());
}

#[test]
fn mnl_vot_matches_coefficient_ratio_for_every_observation() {
    let ds = swissmetro_like(200, 4);
    let m = mnl_with(&ds, -0.7, -0.45);
    for alt in 0..3 {
        let closed = extract_mnl_vot(&m, &ds, alt).unwrap();
        assert!(closed > 0.0);
        for h in [1e-4, 1e-3, 1e-2] {
            let recs = vot_per_observation(&m, &ds, Split::Test, alt, h).unwrap();
            assert_eq!(recs.len(), ds.split_count(Split::Test));
            for r in &recs {
                let v = r.vot().unwrap();
                assert!(((v - closed) / closed).abs() < 1e-6, "alt {alt} h {h}: {v} vs {closed}");
                assert!(r.d_time < 0.0 && r.d_cost < 0.0);
            }
            let st = vot_stats(&recs, DEFAULT_HISTOGRAM_WINDOW, 10).unwrap();
            assert!(((st.mean - st.median) / closed).abs() < 1e-6);
            assert_eq!(st.percent_negative, 0.0);
        }
    }
}

#[test]
fn cost_blind_model_gives_only_degenerate_records() {
    let ds = swissmetro_like(100, 5);
    let m = mnl_with(&ds, -0.7, 0.0);
    let recs = vot_per_observation(&m, &ds, Split::Train, 1, DEFAULT_VOT_STEP).unwrap();
    assert!(recs.iter().all(|r| r.degenerate && r.vot().is_none()));
    assert!(matches!(vot_stats(&recs, DEFAULT_HISTOGRAM_WINDOW, 10), Err(crate::Error::Domain(_))));
    assert!(vot_per_observation(&m, &ds, Split::Train, 1, 0.0).is_err());
}

fn rec(ratio: f64) -> VotRecord {
    VotRecord {
        observation: 0,
        alternative: 0,
        d_time: ratio,
        d_cost: 60.0,
        ratio,
        degenerate: false,
    }
}

#[test]
fn vot_stats_examples() {
    let s = vot_stats(&[rec(10.0), rec(20.0), rec(-30.0)], DEFAULT_HISTOGRAM_WINDOW, 5).unwrap();
    assert_abs_diff_eq!(s.mean, 0.0, epsilon = 1e-12);
    assert_eq!(s.median, 10.0);
    assert_abs_diff_eq!(s.percent_negative, 100.0 / 3.0, epsilon = 1e-12);

    let s = vot_stats(&[rec(7.0); 4], DEFAULT_HISTOGRAM_WINDOW, 5).unwrap();
    assert_eq!(s.mean, s.median);
    assert_eq!(s.percent_negative, 0.0);
    assert_eq!(s.histogram.counts.iter().sum::<usize>(), 4);

    let mut blown = rec(1e9);
    blown.degenerate = true;
    let s = vot_stats(&[rec(10.0), rec(30.0), blown], DEFAULT_HISTOGRAM_WINDOW, 5).unwrap();
    assert_eq!(s.count, 2);
    assert_eq!(s.degenerate, 1);
    assert_eq!(s.mean, 20.0);
    assert_abs_diff_eq!(s.unfiltered_mean, (1e9 + 40.0) / 3.0, epsilon = 1e-3);
    assert!(vot_stats(&[rec(1.0)], (0.5, 0.2), 5).is_err());
}

#[test]
fn histogram_window_clips_tails_only() {
    let recs: Vec<VotRecord> = (0..1000).map(|i| rec(i as f64)).chain([rec(1e7), rec(-1e7)]).collect();
    let wide = vot_stats(&recs, (0.0, 1.0), 20).unwrap();
    let narrow = vot_stats(&recs, DEFAULT_HISTOGRAM_WINDOW, 20).unwrap();
    assert_eq!(wide.median, narrow.median);
    assert_eq!(wide.mean, narrow.mean);
    assert_eq!(wide.histogram.clipped, 0);
    assert!(narrow.histogram.clipped >= 2);
    assert_eq!(
        narrow.histogram.counts.iter().sum::<usize>() + narrow.histogram.clipped,
        narrow.count
    );
    assert_eq!(histogram_tsv(&narrow.histogram).lines().count(), 21);
    let table = vot_stats_tsv(&[("train".into(), narrow)]);
    assert_eq!(table.lines().count(), 2);
}
