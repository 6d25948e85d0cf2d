use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a feature describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "role", content = "alternative")]
pub enum FeatureRole {
    /// Attribute of one alternative (0-based alternative index).
    Attribute(usize),
    /// Characteristic of the decision maker or the trip.
    Socio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    TravelTime,
    Cost,
    Headway,
    Other,
}

impl AttributeKind {
    pub fn label(self) -> &'static str {
        match self {
            AttributeKind::TravelTime => "time",
            AttributeKind::Cost => "cost",
            AttributeKind::Headway => "headway",
            AttributeKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Encoding {
    /// z-scored with training-split statistics
    Continuous,
    /// One-hot; each group of raw codes maps to one indicator column.
    Categorical { levels: Vec<Vec<i64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub unit: String,
    pub role: FeatureRole,
    pub kind: AttributeKind,
    /// Raw column name in the input table.
    pub column: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    pub encoding: Encoding,
}

impl FeatureDescriptor {
    fn continuous(name: &str, unit: &str, role: FeatureRole, kind: AttributeKind, column: &str) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            role,
            kind,
            column: column.into(),
            aliases: Vec::new(),
            encoding: Encoding::Continuous,
        }
    }

    fn categorical(name: &str, role: FeatureRole, column: &str, levels: &[&[i64]]) -> Self {
        Self {
            name: name.into(),
            unit: "code".into(),
            role,
            kind: AttributeKind::Other,
            column: column.into(),
            aliases: Vec::new(),
            encoding: Encoding::Categorical {
                levels: levels.iter().map(|l| l.to_vec()).collect(),
            },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.encoding, Encoding::Continuous)
    }

    /// Number of model-input columns this feature expands to.
    pub fn width(&self) -> usize {
        match &self.encoding {
            Encoding::Continuous => 1,
            Encoding::Categorical { levels } => levels.len(),
        }
    }

    /// Index of the one-hot level containing `code`, if any.
    pub fn level_of(&self, code: f64) -> Option<usize> {
        match &self.encoding {
            Encoding::Continuous => None,
            Encoding::Categorical { levels } => {
                if code.fract() != 0.0 {
                    return None;
                }
                let c = code as i64;
                levels.iter().position(|l| l.contains(&c))
            }
        }
    }
}

/// Ordered feature list plus the alternative set and the columns holding
/// availability flags and choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub alternatives: Vec<String>,
    pub features: Vec<FeatureDescriptor>,
    pub availability_columns: Vec<String>,
    pub choice_column: String,
    #[serde(default)]
    pub respondent_column: Option<String>,
}

impl FeatureSchema {
    /// The Swissmetro variables: train, SM and car times/costs/headways,
    /// seat configuration and the socio-demographic and trip codes.
    pub fn swissmetro() -> Self {
        use AttributeKind::*;
        use FeatureRole::*;
        let mut seats = FeatureDescriptor::categorical("sm_seats", Attribute(1), "SEATS", &[&[0], &[1]]);
        seats.aliases.push("SM_SEATS".into());
        let features = vec![
            FeatureDescriptor::continuous("train_tt", "min", Attribute(0), TravelTime, "TRAIN_TT"),
            FeatureDescriptor::continuous("train_co", "CHF", Attribute(0), Cost, "TRAIN_CO"),
            FeatureDescriptor::continuous("train_he", "min", Attribute(0), Headway, "TRAIN_HE"),
            FeatureDescriptor::continuous("sm_tt", "min", Attribute(1), TravelTime, "SM_TT"),
            FeatureDescriptor::continuous("sm_co", "CHF", Attribute(1), Cost, "SM_CO"),
            FeatureDescriptor::continuous("sm_he", "min", Attribute(1), Headway, "SM_HE"),
            FeatureDescriptor::continuous("car_tt", "min", Attribute(2), TravelTime, "CAR_TT"),
            FeatureDescriptor::continuous("car_co", "CHF", Attribute(2), Cost, "CAR_CO"),
            seats,
            FeatureDescriptor::categorical("group", Socio, "GROUP", &[&[2], &[3]]),
            FeatureDescriptor::categorical(
                "purpose",
                Socio,
                "PURPOSE",
                &[&[1], &[2], &[3], &[4], &[5], &[6], &[7], &[8]],
            ),
            FeatureDescriptor::categorical("first", Socio, "FIRST", &[&[0], &[1]]),
            FeatureDescriptor::categorical("luggage", Socio, "LUGGAGE", &[&[0], &[1], &[3]]),
            FeatureDescriptor::categorical("age", Socio, "AGE", &[&[1], &[2], &[3], &[4], &[5]]),
            FeatureDescriptor::categorical("male", Socio, "MALE", &[&[0], &[1]]),
            FeatureDescriptor::categorical("income", Socio, "INCOME", &[&[0, 1], &[2], &[3]]),
        ];
        Self {
            alternatives: vec!["train".into(), "sm".into(), "car".into()],
            features,
            availability_columns: vec!["TRAIN_AV".into(), "SM_AV".into(), "CAR_AV".into()],
            choice_column: "CHOICE".into(),
            respondent_column: Some("ID".into()),
        }
    }

    /// Schema with one travel-time and one cost feature per alternative and
    /// nothing else.
    pub fn time_cost_only(alternatives: usize) -> Self {
        let mut features = Vec::new();
        for j in 0..alternatives {
            features.push(FeatureDescriptor::continuous(
                &format!("alt{}_tt", j + 1),
                "min",
                FeatureRole::Attribute(j),
                AttributeKind::TravelTime,
                &format!("ALT{}_TT", j + 1),
            ));
            features.push(FeatureDescriptor::continuous(
                &format!("alt{}_co", j + 1),
                "CHF",
                FeatureRole::Attribute(j),
                AttributeKind::Cost,
                &format!("ALT{}_CO", j + 1),
            ));
        }
        Self {
            alternatives: (1..=alternatives).map(|j| format!("alt{j}")).collect(),
            features,
            availability_columns: (1..=alternatives).map(|j| format!("ALT{j}_AV")).collect(),
            choice_column: "CHOICE".into(),
            respondent_column: None,
        }
    }

    pub fn alternative_count(&self) -> usize {
        self.alternatives.len()
    }

    /// Raw feature count.
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Raw feature index of the `kind` attribute of alternative `alt`, when
    /// exactly one is registered.
    pub fn constrained_feature(&self, alt: usize, kind: AttributeKind) -> Option<usize> {
        let mut hits = self
            .features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == FeatureRole::Attribute(alt) && f.kind == kind && f.is_continuous());
        let first = hits.next()?.0;
        hits.next().is_none().then_some(first)
    }

    /// Checks that every alternative has exactly one travel-time and one
    /// cost feature.
    pub fn validate_registry(&self) -> Result<()> {
        for (j, name) in self.alternatives.iter().enumerate() {
            for kind in [AttributeKind::TravelTime, AttributeKind::Cost] {
                if self.constrained_feature(j, kind).is_none() {
                    return Err(Error::Config(format!(
                        "alternative `{name}` needs exactly one continuous {} feature",
                        kind.label()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Model-input column range of every raw feature, in order.
    pub fn encoded_layout(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.features
            .iter()
            .map(|f| {
                let r = start..start + f.width();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn encoded_dim(&self) -> usize {
        self.features.iter().map(FeatureDescriptor::width).sum()
    }

    /// Raw indices of features that are attributes of `alt`.
    pub fn attributes_of(&self, alt: usize) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == FeatureRole::Attribute(alt))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn socio_features(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == FeatureRole::Socio)
            .map(|(i, _)| i)
            .collect()
    }
}
