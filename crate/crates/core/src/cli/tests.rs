use super::*;
use crate::models::ModelKind;

#[test]
fn empty_config_takes_defaults() {
    let cfg = RunConfig::from_toml("").unwrap();
    assert_eq!(cfg.experiment.runs.len(), 5);
    assert_eq!(cfg.evaluation.grid.len(), 21);
    assert!(!cfg.constraints.enabled);
    assert_eq!(cfg.train_config(false).lambda, 0.0);
    assert_eq!(cfg.train_config(true).lambda, 1.0);
    assert_eq!(cfg.train_config(true).batch_size, 128);
}

#[test]
fn unknown_keys_are_rejected() {
    for text in ["bogus = 1", "[data]\ninptu = \"x\"", "[training]\nlearning_rat = 0.1", "[nope]\n"] {
        assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "{text}");
    }
}

#[test]
fn invalid_values_are_rejected_before_work() {
    for text in [
        "[training]\nbatch_size = 0",
        "[constraints]\nlambda = -1.0",
        "[evaluation]\ngrid = [0.1, 0.0]",
        "[evaluation]\nhistogram_window = [0.9, 0.1]",
    ] {
        assert!(RunConfig::from_toml(text).is_err(), "{text}");
    }
}

#[test]
fn manifest_ids_must_be_unique() {
    let text = r#"
[experiment]
runs = [
  { id = "a", kind = "mnl", constrained = false },
  { id = "a", kind = "dnn", constrained = true },
]
"#;
    assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))));
    let single = "[experiment]\nruns = [{ id = \"only\", kind = \"asu-dnn\", constrained = true }]";
    let cfg = RunConfig::from_toml(single).unwrap();
    assert_eq!(cfg.experiment.runs[0].kind, ModelKind::AsuDnn);
}

#[test]
fn constraint_section_overrides_weights() {
    let text = r#"
[constraints]
enabled = true
weight = 2.0
overrides = [{ probability_of = "car", feature = "car_tt", weight = 9.0 }]
"#;
    let cfg = RunConfig::from_toml(text).unwrap();
    let schema = crate::dataio::FeatureSchema::swissmetro();
    let set = cfg.constraints.build(&schema).unwrap();
    assert_eq!(set.len(), 18);
    let car_tt = schema.feature_index("car_tt").unwrap();
    for c in set.iter() {
        let expected = if c.alternative == 2 && c.feature == car_tt { 9.0 } else { 2.0 };
        assert_eq!(c.weight, expected);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::Config("x".into())), 2);
    assert_eq!(
        exit_code(&Error::io("missing", std::io::Error::from(std::io::ErrorKind::NotFound))),
        2
    );
    assert_eq!(exit_code(&Error::Domain("x".into())), 1);
    assert_eq!(main_with_args(["monochoice", "frobnicate"]), 2);
    assert_eq!(main_with_args(["monochoice", "prepare", "--config", "/definitely/not/here.toml"]), 2);
}
