use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{default_rules, AttributeKind, FeatureSchema, FilterRule, Split, SyntheticMnl, DEFAULT_RATIOS};
use crate::error::{Error, Result};
use crate::evaluation::{default_grid, DEFAULT_HISTOGRAM_BINS, DEFAULT_HISTOGRAM_WINDOW, DEFAULT_VOT_STEP};
use crate::knowledge::{build_constraint_set, ConstraintEntry, ConstraintSet, PseudoConfig};
use crate::models::{Architecture, ModelKind};
use crate::training::{OptimizerKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemaChoice {
    #[default]
    Swissmetro,
    /// generic `ALTj_TT` / `ALTj_CO` columns for three alternatives
    TimeCost,
}

impl SchemaChoice {
    pub fn schema(self) -> FeatureSchema {
        match self {
            SchemaChoice::Swissmetro => FeatureSchema::swissmetro(),
            SchemaChoice::TimeCost => FeatureSchema::time_cost_only(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// raw survey table
    pub input: Option<PathBuf>,
    pub delimiter: Option<char>,
    pub schema: SchemaChoice,
    /// replaces the default filter rules when present
    pub filters: Option<Vec<FilterRule>>,
    pub split: [f64; 3],
    pub seed: u64,
    /// prepared dataset; defaults to `<out>/dataset.json`
    pub dataset: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            input: None,
            delimiter: None,
            schema: SchemaChoice::default(),
            filters: None,
            split: DEFAULT_RATIOS,
            seed: 42,
            dataset: None,
        }
    }
}

impl DataSection {
    pub fn rules(&self) -> Vec<FilterRule> {
        self.filters.clone().unwrap_or_else(default_rules)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// overrides the default architecture of `kind`
    pub architecture: Option<Architecture>,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Dnn,
            architecture: None,
            seed: 7,
        }
    }
}

impl ModelSection {
    pub fn architecture_for(&self, kind: ModelKind) -> Architecture {
        match &self.architecture {
            Some(a) if a.kind() == kind => a.clone(),
            _ => Architecture::default_for(kind),
        }
    }
}

/// Weight override for one generated constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightOverride {
    pub probability_of: String,
    pub feature: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintSection {
    pub enabled: bool,
    pub lambda: f64,
    pub kinds: Vec<AttributeKind>,
    /// uniform weight of generated constraints
    pub weight: f64,
    pub pairs_per_constraint: usize,
    pub delta: Option<f64>,
    pub range_extension: f64,
    pub overrides: Vec<WeightOverride>,
    /// explicit list replacing the generated set
    pub entries: Option<Vec<ConstraintEntry>>,
}

impl Default for ConstraintSection {
    fn default() -> Self {
        let p = PseudoConfig::default();
        Self {
            enabled: false,
            lambda: 1.0,
            kinds: vec![AttributeKind::TravelTime, AttributeKind::Cost],
            weight: 1.0,
            pairs_per_constraint: p.k,
            delta: p.delta,
            range_extension: p.range_extension,
            overrides: Vec::new(),
            entries: None,
        }
    }
}

impl ConstraintSection {
    /// The configured constraint set, regardless of `enabled`.
    pub fn build(&self, schema: &FeatureSchema) -> Result<ConstraintSet> {
        let mut set = match &self.entries {
            Some(e) => ConstraintSet::from_entries(schema, e)?,
            None => build_constraint_set(schema, &self.kinds, self.weight)?,
        };
        for o in &self.overrides {
            let alt = schema
                .alternatives
                .iter()
                .position(|a| a == &o.probability_of)
                .ok_or_else(|| Error::Config(format!("unknown alternative `{}`", o.probability_of)))?;
            let m = schema
                .feature_index(&o.feature)
                .ok_or_else(|| Error::Config(format!("unknown feature `{}`", o.feature)))?;
            set.set_weight(alt, m, o.weight)?;
        }
        set.validate(schema)?;
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            max_epochs: t.max_epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            patience: t.patience,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// fractional changes for probability sweeps
    pub grid: Vec<f64>,
    pub sweep_split: Split,
    pub vot_step: f64,
    pub vot_split: Split,
    pub histogram_window: (f64, f64),
    pub histogram_bins: usize,
    /// fresh pairs per constraint in audits
    pub audit_grid: usize,
    pub audit_range_extension: f64,
    pub audit_seed: u64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            sweep_split: Split::Train,
            vot_step: DEFAULT_VOT_STEP,
            vot_split: Split::Train,
            histogram_window: DEFAULT_HISTOGRAM_WINDOW,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            audit_grid: 1024,
            audit_range_extension: PseudoConfig::default().range_extension,
            audit_seed: 2024,
        }
    }
}

/// One entry of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub id: String,
    pub kind: ModelKind,
    pub constrained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentManifest {
    pub runs: Vec<RunSpec>,
    /// train runs on separate threads
    pub parallel: bool,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        let run = |id: &str, kind, constrained| RunSpec {
            id: id.into(),
            kind,
            constrained,
        };
        Self {
            runs: vec![
                run("DNN", ModelKind::Dnn, false),
                run("C-DNN", ModelKind::Dnn, true),
                run("ASU-DNN", ModelKind::AsuDnn, false),
                run("C-ASU-DNN", ModelKind::AsuDnn, true),
                run("MNL", ModelKind::Mnl, false),
            ],
            parallel: true,
        }
    }
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(Error::Config("experiment has no runs".into()));
        }
        let mut seen = BTreeSet::new();
        for r in &self.runs {
            let valid = !r.id.is_empty() && r.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
            if !valid {
                return Err(Error::Config(format!("run id `{}` must be non-empty [A-Za-z0-9-_.]", r.id)));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Config(format!("duplicate run id `{}`", r.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n: usize,
    pub seed: u64,
    pub split: [f64; 3],
    pub truth: SyntheticMnl,
    /// Separate from `[training]`: the MNL fit is convex, so larger batches
    /// and a faster rate converge well past sampling error. Keys missing
    /// from an explicit `[synth.training]` table take the `[training]`
    /// defaults.
    pub training: TrainingSection,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            n: 50_000,
            seed: 5,
            split: DEFAULT_RATIOS,
            truth: SyntheticMnl::reference(),
            training: TrainingSection {
                max_epochs: 1000,
                batch_size: 1024,
                learning_rate: 0.02,
                patience: 50,
                ..TrainingSection::default()
            },
        }
    }
}

/// Everything a command needs, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub data: DataSection,
    pub model: ModelSection,
    pub constraints: ConstraintSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub experiment: ExperimentManifest,
    pub synth: SynthSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; relative paths inside resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.output_dir);
        rebase(&mut cfg.data.input);
        rebase(&mut cfg.data.dataset);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config(false).validate()?;
        self.train_config(true).validate()?;
        self.synth_train_config().validate()?;
        let e = &self.evaluation;
        if e.grid.is_empty() || e.grid.windows(2).any(|w| !(w[0] < w[1])) || e.grid.iter().any(|q| !(*q > -1.0)) {
            return Err(Error::Config("evaluation.grid must be ascending with values > -1".into()));
        }
        if !(e.vot_step > 0.0) {
            return Err(Error::Config("evaluation.vot_step must be > 0".into()));
        }
        let (lo, hi) = e.histogram_window;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) || e.histogram_bins == 0 {
            return Err(Error::Config("evaluation.histogram_window must satisfy 0 <= lo < hi <= 1".into()));
        }
        if e.audit_grid < 2 {
            return Err(Error::Config("evaluation.audit_grid must be >= 2".into()));
        }
        if !(self.constraints.weight >= 0.0) {
            return Err(Error::Config("constraints.weight must be >= 0".into()));
        }
        self.experiment.validate()?;
        if self.synth.n == 0 {
            return Err(Error::Config("synth.n must be >= 1".into()));
        }
        Ok(())
    }

    /// Training settings; `constrained` picks up the constraint section's
    /// lambda and pair settings, otherwise lambda is 0.
    pub fn train_config(&self, constrained: bool) -> TrainConfig {
        self.train_config_with(&self.training, constrained)
    }

    /// Training settings of the `synth` command (unconstrained).
    pub fn synth_train_config(&self) -> TrainConfig {
        self.train_config_with(&self.synth.training, false)
    }

    fn train_config_with(&self, t: &TrainingSection, constrained: bool) -> TrainConfig {
        let c = &self.constraints;
        TrainConfig {
            max_epochs: t.max_epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            optimizer: t.optimizer,
            lambda: if constrained { c.lambda } else { 0.0 },
            pairs_per_constraint: c.pairs_per_constraint,
            delta: c.delta,
            range_extension: c.range_extension,
            patience: t.patience,
            seed: t.seed,
        }
    }

    /// `--out` wins over `output_dir`.
    pub fn output_dir(&self, flag: Option<&Path>) -> Result<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .ok_or_else(|| Error::Usage("no output directory: pass --out or set output_dir".into()))
    }

    pub fn dataset_path(&self, out: &Path) -> PathBuf {
        self.data.dataset.clone().unwrap_or_else(|| out.join("dataset.json"))
    }
}
