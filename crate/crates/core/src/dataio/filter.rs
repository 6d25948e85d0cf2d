use serde::{Deserialize, Serialize};

use super::{AttributeKind, FeatureSchema, Observation, RawTable};
use crate::error::{Error, Result};

/// One row-dropping rule. Rules run in declared order and each row is
/// attributed to the first rule that drops it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterRule {
    /// CHOICE outside `1..=C` (0 marks an unknown choice).
    UnknownChoice,
    /// Any availability flag different from 1.
    UnavailableAlternative,
    /// Categorical code outside the declared levels, non-finite values, or a
    /// travel time / cost equal to zero.
    UnknownFeatureValue,
    /// Travel time or cost above the given percentile of its column,
    /// computed once on the unfiltered table.
    Outliers { percentile: f64 },
    /// Rows where `column` is nonzero. Swissmetro records the annual
    /// season-ticket (GA) price as train cost for holders. Skipped when the
    /// column is absent.
    SeasonTicketHolders { column: String },
}

impl FilterRule {
    pub fn name(&self) -> &'static str {
        match self {
            FilterRule::UnknownChoice => "unknown_choice",
            FilterRule::UnavailableAlternative => "unavailable_alternative",
            FilterRule::UnknownFeatureValue => "unknown_feature_value",
            FilterRule::Outliers { .. } => "outliers",
            FilterRule::SeasonTicketHolders { .. } => "season_ticket_holders",
        }
    }

    pub fn description(&self) -> String {
        match self {
            FilterRule::UnknownChoice => "CHOICE not in 1..=C".into(),
            FilterRule::UnavailableAlternative => "some availability flag != 1".into(),
            FilterRule::UnknownFeatureValue => {
                "undeclared categorical code, non-finite value, or zero time/cost".into()
            }
            FilterRule::Outliers { percentile } => {
                format!("time or cost above the {percentile}th percentile of the raw column")
            }
            FilterRule::SeasonTicketHolders { column } => format!("{column} != 0"),
        }
    }
}

/// Default rule set; the season-ticket rule is what brings Swissmetro close
/// to 7,778 rows.
pub fn default_rules() -> Vec<FilterRule> {
    vec![
        FilterRule::UnknownChoice,
        FilterRule::UnavailableAlternative,
        FilterRule::UnknownFeatureValue,
        FilterRule::Outliers { percentile: 99.9 },
        FilterRule::SeasonTicketHolders {
            column: "GA".into(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub rule: String,
    pub predicate: String,
    pub dropped: usize,
    pub remaining: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Linear-interpolation percentile (`p` in 0..=100) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

enum Compiled {
    UnknownChoice,
    Unavailable,
    UnknownValue,
    Outliers(Vec<(usize, f64)>),
    Nonzero(Option<usize>),
}

/// Applies `rules` in order and turns surviving rows into observations.
pub fn apply_filters(
    table: &RawTable,
    schema: &FeatureSchema,
    rules: &[FilterRule],
) -> Result<(Vec<Observation>, Vec<FilterRecord>)> {
    if rules.is_empty() {
        return Err(Error::Config("filter rule list is empty".into()));
    }
    let cols = table.resolve(schema)?;
    let n_alt = schema.alternative_count();

    let compiled: Vec<Compiled> = rules
        .iter()
        .map(|r| match r {
            FilterRule::UnknownChoice => Ok(Compiled::UnknownChoice),
            FilterRule::UnavailableAlternative => Ok(Compiled::Unavailable),
            FilterRule::UnknownFeatureValue => Ok(Compiled::UnknownValue),
            FilterRule::Outliers { percentile: p } => {
                if !(0.0..=100.0).contains(p) {
                    return Err(Error::Config(format!("outlier percentile {p} outside 0..=100")));
                }
                let caps = schema
                    .features
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| matches!(f.kind, AttributeKind::TravelTime | AttributeKind::Cost))
                    .map(|(i, _)| {
                        let c = cols.features[i];
                        let column: Vec<f64> = table.rows().iter().map(|r| r[c]).collect();
                        (c, percentile(&column, *p))
                    })
                    .collect();
                Ok(Compiled::Outliers(caps))
            }
            FilterRule::SeasonTicketHolders { column } => {
                Ok(Compiled::Nonzero(table.column_index(column)))
            }
        })
        .collect::<Result<_>>()?;

    let drops_row = |rule: &Compiled, row: &[f64]| -> bool {
        match rule {
            Compiled::UnknownChoice => {
                let c = row[cols.choice];
                !(c.fract() == 0.0 && c >= 1.0 && c <= n_alt as f64)
            }
            Compiled::Unavailable => cols.availability.iter().any(|&a| row[a] != 1.0),
            Compiled::UnknownValue => schema.features.iter().zip(&cols.features).any(|(f, &c)| {
                let v = row[c];
                !v.is_finite()
                    || (!f.is_continuous() && f.level_of(v).is_none())
                    || (matches!(f.kind, AttributeKind::TravelTime | AttributeKind::Cost) && v == 0.0)
            }),
            Compiled::Outliers(caps) => caps.iter().any(|&(c, cap)| row[c] > cap),
            Compiled::Nonzero(Some(c)) => row[*c] != 0.0,
            Compiled::Nonzero(None) => false,
        }
    };

    let mut dropped = vec![0usize; rules.len()];
    let mut invalid = 0usize;
    let mut out = Vec::new();
    'rows: for row in table.rows() {
        for (k, rule) in compiled.iter().enumerate() {
            if drops_row(rule, row) {
                dropped[k] += 1;
                continue 'rows;
            }
        }
        match Observation::from_raw_row(row, &cols, schema) {
            Some(obs) => out.push(obs),
            None => invalid += 1,
        }
    }

    let mut remaining = table.len();
    let mut log = Vec::with_capacity(rules.len() + 1);
    for ((rule, comp), d) in rules.iter().zip(&compiled).zip(&dropped) {
        remaining -= d;
        let note = match comp {
            Compiled::Nonzero(None) => Some("column absent; rule skipped".to_string()),
            _ => None,
        };
        log.push(FilterRecord {
            rule: rule.name().into(),
            predicate: rule.description(),
            dropped: *d,
            remaining,
            note,
        });
    }
    if invalid > 0 {
        log.push(FilterRecord {
            rule: "invalid_observation".into(),
            predicate: "chosen alternative unavailable, unknown choice, or undeclared code".into(),
            dropped: invalid,
            remaining: remaining - invalid,
            note: None,
        });
    }
    if out.is_empty() {
        return Err(Error::Config("filtering removed every row".into()));
    }
    Ok((out, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "ID,GROUP,PURPOSE,FIRST,LUGGAGE,AGE,MALE,INCOME,GA,TRAIN_AV,CAR_AV,SM_AV,TRAIN_TT,TRAIN_CO,TRAIN_HE,SM_TT,SM_CO,SM_HE,SM_SEATS,CAR_TT,CAR_CO,CHOICE";
    const GOOD: &str = "1,2,1,0,0,3,0,2,0,1,1,1,112,48,120,63,52,20,0,117,65,2";

    fn table(rows: &[String]) -> RawTable {
        RawTable::parse(&format!("{HEADER}\n{}\n", rows.join("\n")), None).unwrap()
    }

    fn with(col: &str, value: &str) -> String {
        let idx = HEADER.split(',').position(|c| c == col).unwrap();
        let mut cells: Vec<&str> = GOOD.split(',').collect();
        cells[idx] = value;
        cells.join(",")
    }

    #[test]
    fn car_unavailable_dropped_by_availability_rule() {
        let t = table(&[GOOD.into(), with("CAR_AV", "0")]);
        let (obs, log) = apply_filters(&t, &FeatureSchema::swissmetro(), &default_rules()).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(log[1].rule, "unavailable_alternative");
        assert_eq!(log[1].dropped, 1);
    }

    #[test]
    fn unknown_choice_dropped_first() {
        let t = table(&[GOOD.into(), with("CHOICE", "0")]);
        let (obs, log) = apply_filters(&t, &FeatureSchema::swissmetro(), &default_rules()).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(log[0].dropped, 1);
        assert_eq!(log[0].remaining, 1);
    }

    #[test]
    fn unknown_age_and_income_dropped() {
        let t = table(&[GOOD.into(), with("AGE", "6"), with("INCOME", "4")]);
        let (obs, log) = apply_filters(&t, &FeatureSchema::swissmetro(), &default_rules()).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(log[2].dropped, 2);
    }

    #[test]
    fn season_ticket_rule_skipped_without_column() {
        let hdr = HEADER.replace(",GA,", ",XX,");
        let t = RawTable::parse(&format!("{hdr}\n{}\n", with("GA", "1")), None).unwrap();
        let (obs, log) = apply_filters(&t, &FeatureSchema::swissmetro(), &default_rules()).unwrap();
        assert_eq!(obs.len(), 1);
        assert!(log[4].note.is_some());
    }

    #[test]
    fn empty_result_is_config_error() {
        let t = table(&[with("CHOICE", "0")]);
        let r = apply_filters(&t, &FeatureSchema::swissmetro(), &default_rules());
        assert!(matches!(r, Err(Error::Config(_))));
        let t = table(&[GOOD.into()]);
        assert!(matches!(
            apply_filters(&t, &FeatureSchema::swissmetro(), &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0), 3.0);
        assert!((percentile(&[0.0, 10.0], 99.9) - 9.99).abs() < 1e-12);
        assert_eq!(percentile(&[7.0], 99.9), 7.0);
    }

    #[test]
    fn outlier_cap_uses_full_table() {
        let mut rows: Vec<String> = (0..9).map(|_| GOOD.to_string()).collect();
        rows.push(with("TRAIN_TT", "5000"));
        let t = table(&rows);
        let rules = [FilterRule::Outliers { percentile: 90.0 }];
        let (obs, _) = apply_filters(&t, &FeatureSchema::swissmetro(), &rules).unwrap();
        assert_eq!(obs.len(), 9);
    }
}
