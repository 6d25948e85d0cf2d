use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::raw::ResolvedColumns;
use super::{Encoding, FeatureSchema, FilterRecord};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// One choice record in raw units. `choice` is a 0-based alternative index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub choice: usize,
    pub avail: Vec<bool>,
    #[serde(default)]
    pub respondent: i64,
}

impl Observation {
    pub fn new(x: Vec<f64>, choice: usize, avail: Vec<bool>, respondent: i64) -> Result<Self> {
        if choice >= avail.len() || !avail[choice] {
            return Err(Error::Domain(format!(
                "chosen alternative {choice} is not available ({avail:?})"
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("feature {i} is not finite")));
        }
        Ok(Self {
            x,
            choice,
            avail,
            respondent,
        })
    }

    pub(crate) fn from_raw_row(row: &[f64], cols: &ResolvedColumns, schema: &FeatureSchema) -> Option<Self> {
        let x: Vec<f64> = cols.features.iter().map(|&c| row[c]).collect();
        let avail: Vec<bool> = cols.availability.iter().map(|&c| row[c] == 1.0).collect();
        let choice = row[cols.choice];
        if choice.fract() != 0.0 || choice < 1.0 || choice > avail.len() as f64 {
            return None;
        }
        let undeclared = schema
            .features
            .iter()
            .zip(&x)
            .any(|(f, &v)| !f.is_continuous() && f.level_of(v).is_none());
        if undeclared {
            return None;
        }
        let respondent = cols.respondent.map_or(0, |c| row[c] as i64);
        Observation::new(x, choice as usize - 1, avail, respondent).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" | "training" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" | "testing" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-raw-feature standardization fitted on the training split.
/// Categorical features carry `(0, 1)` and are one-hot encoded instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub stats: Vec<FeatureStats>,
}

/// Model-ready minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `[rows, encoded_dim]`
    pub x: Tensor,
    /// row-major `[rows, C]`
    pub avail: Vec<bool>,
    pub choices: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    observations: Vec<Observation>,
    #[serde(default)]
    splits: Option<Vec<Split>>,
    #[serde(default)]
    scaling: Option<Scaling>,
    #[serde(default)]
    filter_log: Vec<FilterRecord>,
    #[serde(skip)]
    encoded: Vec<f64>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.observations == other.observations
            && self.splits == other.splits
            && self.scaling == other.scaling
    }
}

const FILE_FORMAT: &str = "monochoice-dataset/1";

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    fingerprint: String,
    dataset: Dataset,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, observations: Vec<Observation>) -> Result<Self> {
        let (d, c) = (schema.feature_count(), schema.alternative_count());
        for (i, o) in observations.iter().enumerate() {
            if o.x.len() != d || o.avail.len() != c {
                return Err(Error::Shape(format!(
                    "observation {i}: {} features / {} alternatives, schema has {d} / {c}",
                    o.x.len(),
                    o.avail.len()
                )));
            }
        }
        Ok(Self {
            schema,
            observations,
            splits: None,
            scaling: None,
            filter_log: Vec::new(),
            encoded: Vec::new(),
        })
    }

    pub fn with_filter_log(mut self, log: Vec<FilterRecord>) -> Self {
        self.filter_log = log;
        self
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn alternative_count(&self) -> usize {
        self.schema.alternative_count()
    }

    pub fn filter_log(&self) -> &[FilterRecord] {
        &self.filter_log
    }

    pub fn scaling(&self) -> Option<&Scaling> {
        self.scaling.as_ref()
    }

    pub fn split_labels(&self) -> Option<&[Split]> {
        self.splits.as_deref()
    }

    /// Assigns splits: seeded permutation, then contiguous blocks with
    /// boundaries at `round(r_train * N)` and `round((r_train + r_val) * N)`.
    pub fn split(mut self, ratios: [f64; 3], seed: u64) -> Result<Self> {
        if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios {ratios:?} must be >= 0 and sum to 1")));
        }
        let n = self.observations.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let b1 = (ratios[0] * n as f64).round() as usize;
        let b2 = (((ratios[0] + ratios[1]) * n as f64).round() as usize).max(b1).min(n);
        let mut labels = vec![Split::Test; n];
        for (pos, &i) in order.iter().enumerate() {
            labels[i] = if pos < b1 {
                Split::Train
            } else if pos < b2 {
                Split::Validation
            } else {
                Split::Test
            };
        }
        self.splits = Some(labels);
        self.scaling = None;
        self.encoded.clear();
        Ok(self)
    }

    /// Observation indices of `split`, in dataset order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        match &self.splits {
            Some(labels) => labels
                .iter()
                .enumerate()
                .filter(|(_, &s)| s == split)
                .map(|(i, _)| i)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn split_count(&self, split: Split) -> usize {
        self.splits
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&s| s == split).count())
    }

    /// Fits mean / population standard deviation of every continuous feature
    /// on the training split and caches the encoded model inputs.
    pub fn fit_apply_scaling(mut self) -> Result<Self> {
        let train = self.indices(Split::Train);
        if train.is_empty() {
            return Err(Error::Config("scaling needs a non-empty training split".into()));
        }
        let n = train.len() as f64;
        let stats = self
            .schema
            .features
            .iter()
            .enumerate()
            .map(|(m, f)| {
                if !f.is_continuous() {
                    return FeatureStats { mean: 0.0, std: 1.0 };
                }
                let mean = train.iter().map(|&i| self.observations[i].x[m]).sum::<f64>() / n;
                let var = train
                    .iter()
                    .map(|&i| (self.observations[i].x[m] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let std = var.sqrt();
                // constant features: relative test avoids round-off "spread"
                let std = if std <= 1e-12 * mean.abs().max(1.0) { 1.0 } else { std };
                FeatureStats { mean, std }
            })
            .collect();
        self.scaling = Some(Scaling { stats });
        self.rebuild_encoded();
        Ok(self)
    }

    fn rebuild_encoded(&mut self) {
        let mut encoded = Vec::with_capacity(self.observations.len() * self.schema.encoded_dim());
        for o in &self.observations {
            encoded.extend(self.encode_unchecked(&o.x));
        }
        self.encoded = encoded;
    }

    fn require_scaling(&self) -> Result<&Scaling> {
        self.scaling
            .as_ref()
            .ok_or_else(|| Error::Usage("dataset has no fitted scaling".into()))
    }

    pub fn encoded_dim(&self) -> usize {
        self.schema.encoded_dim()
    }

    /// Encoded model input of a raw feature vector.
    pub fn encode(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.require_scaling()?;
        if raw.len() != self.schema.feature_count() {
            return Err(Error::Shape(format!(
                "raw vector has {} features, schema has {}",
                raw.len(),
                self.schema.feature_count()
            )));
        }
        Ok(self.encode_unchecked(raw))
    }

    fn encode_unchecked(&self, raw: &[f64]) -> Vec<f64> {
        let stats = &self.scaling.as_ref().expect("checked by caller").stats;
        let mut out = Vec::with_capacity(self.schema.encoded_dim());
        for ((f, &v), s) in self.schema.features.iter().zip(raw).zip(stats) {
            match &f.encoding {
                Encoding::Continuous => out.push((v - s.mean) / s.std),
                Encoding::Categorical { levels } => {
                    let hit = f.level_of(v);
                    out.extend((0..levels.len()).map(|l| if Some(l) == hit { 1.0 } else { 0.0 }));
                }
            }
        }
        out
    }

    /// Scaled value of continuous raw feature `m`.
    pub fn scale_value(&self, m: usize, raw: f64) -> Result<f64> {
        let s = self.require_scaling()?.stats[m];
        Ok((raw - s.mean) / s.std)
    }

    pub fn unscale_value(&self, m: usize, scaled: f64) -> Result<f64> {
        let s = self.require_scaling()?.stats[m];
        Ok(scaled * s.std + s.mean)
    }

    /// Model-input column of continuous raw feature `m`.
    pub fn encoded_index(&self, m: usize) -> Result<usize> {
        let f = self
            .schema
            .features
            .get(m)
            .ok_or_else(|| Error::Shape(format!("feature index {m} out of range")))?;
        if !f.is_continuous() {
            return Err(Error::Config(format!("feature `{}` is not continuous", f.name)));
        }
        Ok(self.schema.encoded_layout()[m].start)
    }

    /// Cached encoded input of observation `i`.
    pub fn encoded_row(&self, i: usize) -> &[f64] {
        let d = self.schema.encoded_dim();
        &self.encoded[i * d..(i + 1) * d]
    }

    /// Builds a minibatch from observation indices.
    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        self.require_scaling()?;
        let d = self.encoded_dim();
        let mut x = Vec::with_capacity(indices.len() * d);
        let mut avail = Vec::with_capacity(indices.len() * self.alternative_count());
        let mut choices = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.encoded_row(i));
            avail.extend_from_slice(&self.observations[i].avail);
            choices.push(self.observations[i].choice);
        }
        Ok(Batch {
            x: Tensor::new(vec![indices.len(), d], x)?,
            avail,
            choices,
        })
    }

    /// Short content digest of schema and scaling; models record it so they
    /// are never evaluated against a differently encoded dataset.
    pub fn fingerprint(&self) -> String {
        let body = serde_json::to_vec(&(&self.schema, &self.scaling)).expect("serializable");
        let digest = Sha256::digest(&body);
        hex::encode(&digest[..8])
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            format: FILE_FORMAT.into(),
            fingerprint: self.fingerprint(),
            dataset: self.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        if file.format != FILE_FORMAT {
            return Err(Error::Config(format!("unsupported dataset format `{}`", file.format)));
        }
        let mut ds = file.dataset;
        if let Some(l) = &ds.splits {
            if l.len() != ds.observations.len() {
                return Err(Error::Shape("split labels do not match observation count".into()));
            }
        }
        if ds.scaling.is_some() {
            ds.rebuild_encoded();
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n: usize) -> Dataset {
        let schema = FeatureSchema::time_cost_only(2);
        let obs = (0..n)
            .map(|i| {
                let t = i as f64;
                Observation::new(vec![10.0 + t, 5.0, 20.0 - t, (t * 0.7).sin() + 3.0], i % 2, vec![true, true], i as i64)
                    .unwrap()
            })
            .collect();
        Dataset::new(schema, obs).unwrap()
    }

    #[test]
    fn split_ten_is_six_two_two() {
        let ds = toy(10).split([0.6, 0.2, 0.2], 1).unwrap();
        assert_eq!(ds.split_count(Split::Train), 6);
        assert_eq!(ds.split_count(Split::Validation), 2);
        assert_eq!(ds.split_count(Split::Test), 2);
    }

    #[test]
    fn split_of_7778_matches_stated_counts() {
        let ds = toy(7778).split([0.6, 0.2, 0.2], 9).unwrap();
        assert_eq!(ds.split_count(Split::Train), 4667);
        assert_eq!(ds.split_count(Split::Validation), 1555);
        assert_eq!(ds.split_count(Split::Test), 1556);
    }

    #[test]
    fn split_is_deterministic_partition() {
        let a = toy(101).split([0.6, 0.2, 0.2], 5).unwrap();
        let b = toy(101).split([0.6, 0.2, 0.2], 5).unwrap();
        assert_eq!(a.split_labels(), b.split_labels());
        let total: usize = Split::ALL.iter().map(|&s| a.indices(s).len()).sum();
        assert_eq!(total, 101);
        let c = toy(101).split([0.6, 0.2, 0.2], 6).unwrap();
        assert_ne!(a.split_labels(), c.split_labels());
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(toy(10).split([0.5, 0.2, 0.2], 1).is_err());
    }

    #[test]
    fn constant_feature_scales_to_zero_with_unit_std() {
        let ds = toy(50).split([0.6, 0.2, 0.2], 3).unwrap().fit_apply_scaling().unwrap();
        let s = ds.scaling().unwrap().stats[1];
        assert_eq!(s.std, 1.0);
        for i in 0..ds.len() {
            assert_eq!(ds.encoded_row(i)[1], 0.0);
        }
    }

    #[test]
    fn train_split_is_standardized_test_split_is_not() {
        let ds = toy(200).split([0.6, 0.2, 0.2], 3).unwrap().fit_apply_scaling().unwrap();
        let moments = |split: Split, col: usize| {
            let idx = ds.indices(split);
            let n = idx.len() as f64;
            let mean = idx.iter().map(|&i| ds.encoded_row(i)[col]).sum::<f64>() / n;
            let var = idx.iter().map(|&i| (ds.encoded_row(i)[col] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        for col in [0, 2, 3] {
            let (m, s) = moments(Split::Train, col);
            assert!(m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10, "{col}: {m} {s}");
        }
        let (m, _) = moments(Split::Test, 3);
        assert!(m.abs() > 1e-6);
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let ds = toy(30).split([0.6, 0.2, 0.2], 3).unwrap().fit_apply_scaling().unwrap();
        let text = ds.to_json().unwrap();
        let back = Dataset::from_json(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.encoded_row(7), ds.encoded_row(7));
        assert_eq!(back.fingerprint(), ds.fingerprint());
    }

    #[test]
    fn observation_rejects_unavailable_choice() {
        assert!(Observation::new(vec![1.0], 1, vec![true, false], 0).is_err());
        assert!(Observation::new(vec![f64::NAN], 0, vec![true, true], 0).is_err());
    }

    proptest! {
        #[test]
        fn unscale_inverts_scale(raw in -1e4f64..1e4, m in 0usize..4) {
            let ds = toy(40).split([0.6, 0.2, 0.2], 2).unwrap().fit_apply_scaling().unwrap();
            let back = ds.unscale_value(m, ds.scale_value(m, raw).unwrap()).unwrap();
            prop_assert!((back - raw).abs() <= 1e-12 * raw.abs().max(1.0));
        }
    }
}
