//! MNL, DNN and ASU-DNN behind one probability interface.
//!
//! All models read the encoded (scaled, one-hot) inputs produced by
//! [`Dataset`] and emit one score per alternative; probabilities are the
//! masked softmax of the scores.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{AttributeKind, Dataset, FeatureRole};
use crate::diffcore::{ParamId, ParameterStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Mnl,
    Dnn,
    AsuDnn,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Mnl => "MNL",
            ModelKind::Dnn => "DNN",
            ModelKind::AsuDnn => "ASU-DNN",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnl" => Ok(ModelKind::Mnl),
            "dnn" => Ok(ModelKind::Dnn),
            "asu-dnn" | "asu_dnn" | "asudnn" => Ok(ModelKind::AsuDnn),
            _ => Err(Error::Config(format!("unknown model kind `{s}`"))),
        }
    }
}

/// How socio-demographic features enter MNL utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SocioTerms {
    /// One coefficient per feature and non-reference alternative.
    AlternativeSpecific,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    Mnl {
        #[serde(default = "default_socio")]
        socio: SocioTerms,
    },
    Dnn {
        #[serde(default = "default_dnn_hidden")]
        hidden: Vec<usize>,
    },
    AsuDnn {
        #[serde(default = "default_asu_alt_hidden")]
        alt_hidden: Vec<usize>,
        #[serde(default = "default_asu_socio_hidden")]
        socio_hidden: Vec<usize>,
    },
}

fn default_socio() -> SocioTerms {
    SocioTerms::AlternativeSpecific
}
fn default_dnn_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_asu_alt_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn default_asu_socio_hidden() -> Vec<usize> {
    vec![16]
}

impl Architecture {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Mnl => Architecture::Mnl {
                socio: default_socio(),
            },
            ModelKind::Dnn => Architecture::Dnn {
                hidden: default_dnn_hidden(),
            },
            ModelKind::AsuDnn => Architecture::AsuDnn {
                alt_hidden: default_asu_alt_hidden(),
                socio_hidden: default_asu_socio_hidden(),
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::Mnl { .. } => ModelKind::Mnl,
            Architecture::Dnn { .. } => ModelKind::Dnn,
            Architecture::AsuDnn { .. } => ModelKind::AsuDnn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Dense {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Network {
    Mnl {
        beta: ParamId,
        asc: ParamId,
        /// `[E, C]` 0/1 mask of identified coefficients
        beta_mask: Tensor,
        /// `[1, C]`, reference alternative 0 fixed at zero
        asc_mask: Tensor,
    },
    Dnn {
        layers: Vec<Dense>,
    },
    AsuDnn {
        alt_columns: Vec<Vec<usize>>,
        socio_columns: Vec<usize>,
        socio_layers: Vec<Dense>,
        alt_layers: Vec<Vec<Dense>>,
    },
}

/// A trained or trainable choice model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceModel {
    architecture: Architecture,
    alternatives: usize,
    input_dim: usize,
    fingerprint: String,
    network: Network,
    params: ParameterStore,
}

const MODEL_FORMAT: &str = "monochoice-model/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    model: ChoiceModel,
}

fn dense<R: rand::Rng>(store: &mut ParameterStore, name: &str, fan_in: usize, out: usize, rng: &mut R) -> Dense {
    Dense {
        weight: store.add_he_uniform(format!("{name}.w"), &[fan_in, out], fan_in, rng),
        bias: store.add(format!("{name}.b"), Tensor::zeros(&[1, out])),
    }
}

fn mlp<R: rand::Rng>(
    store: &mut ParameterStore,
    prefix: &str,
    input: usize,
    hidden: &[usize],
    output: Option<usize>,
    rng: &mut R,
) -> Vec<Dense> {
    let mut layers = Vec::new();
    let mut fan_in = input;
    for (l, &h) in hidden.iter().enumerate() {
        layers.push(dense(store, &format!("{prefix}.h{l}"), fan_in, h, rng));
        fan_in = h;
    }
    if let Some(o) = output {
        layers.push(dense(store, &format!("{prefix}.out"), fan_in, o, rng));
    }
    layers
}

/// Gathers columns of a constant input matrix.
fn gather_columns(x: &Tensor, cols: &[usize]) -> Tensor {
    let mut out = Vec::with_capacity(x.rows() * cols.len());
    for r in 0..x.rows() {
        let row = x.row_slice(r);
        out.extend(cols.iter().map(|&c| row[c]));
    }
    Tensor::new(vec![x.rows(), cols.len()], out).expect("sized above")
}

impl ChoiceModel {
    /// Builds a freshly initialized model for the encoding of `dataset`.
    /// MNL starts at zero; networks use seeded He-uniform weights.
    pub fn new(architecture: Architecture, dataset: &Dataset, seed: u64) -> Result<Self> {
        if dataset.scaling().is_none() {
            return Err(Error::Usage("model construction needs a scaled dataset".into()));
        }
        let schema = dataset.schema();
        let c = schema.alternative_count();
        let e = schema.encoded_dim();
        let layout = schema.encoded_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterStore::new(seed);

        let columns_of = |raws: &[usize]| -> Vec<usize> {
            raws.iter().flat_map(|&m| layout[m].clone()).collect()
        };

        let network = match &architecture {
            Architecture::Mnl { socio } => {
                let mut mask = Tensor::zeros(&[e, c]);
                for (m, f) in schema.features.iter().enumerate() {
                    for col in layout[m].clone() {
                        match f.role {
                            FeatureRole::Attribute(j) => mask.set(col, j, 1.0),
                            FeatureRole::Socio if *socio == SocioTerms::AlternativeSpecific => {
                                for j in 1..c {
                                    mask.set(col, j, 1.0);
                                }
                            }
                            FeatureRole::Socio => {}
                        }
                    }
                }
                let mut asc_mask = Tensor::full(&[1, c], 1.0);
                asc_mask.set(0, 0, 0.0);
                Network::Mnl {
                    beta: params.add("mnl.beta", Tensor::zeros(&[e, c])),
                    asc: params.add("mnl.asc", Tensor::zeros(&[1, c])),
                    beta_mask: mask,
                    asc_mask,
                }
            }
            Architecture::Dnn { hidden } => Network::Dnn {
                layers: mlp(&mut params, "dnn", e, hidden, Some(c), &mut rng),
            },
            Architecture::AsuDnn {
                alt_hidden,
                socio_hidden,
            } => {
                let socio_columns = columns_of(&schema.socio_features());
                let socio_layers = mlp(&mut params, "socio", socio_columns.len(), socio_hidden, None, &mut rng);
                let z_dim = socio_hidden.last().copied().unwrap_or(socio_columns.len());
                let mut alt_columns = Vec::with_capacity(c);
                let mut alt_layers = Vec::with_capacity(c);
                for j in 0..c {
                    let cols = columns_of(&schema.attributes_of(j));
                    let input = cols.len() + z_dim;
                    alt_layers.push(mlp(
                        &mut params,
                        &format!("alt{j}"),
                        input,
                        alt_hidden,
                        Some(1),
                        &mut rng,
                    ));
                    alt_columns.push(cols);
                }
                Network::AsuDnn {
                    alt_columns,
                    socio_columns,
                    socio_layers,
                    alt_layers,
                }
            }
        };
        Ok(Self {
            architecture,
            alternatives: c,
            input_dim: e,
            fingerprint: dataset.fingerprint(),
            network,
            params,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.architecture.kind()
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn alternatives(&self) -> usize {
        self.alternatives
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    /// Errors unless `dataset` uses the encoding this model was built for.
    pub fn check_compatible(&self, dataset: &Dataset) -> Result<()> {
        let fp = dataset.fingerprint();
        if fp != self.fingerprint {
            return Err(Error::Fingerprint {
                model: self.fingerprint.clone(),
                dataset: fp,
            });
        }
        Ok(())
    }

    fn run_mlp(&self, tape: &mut Tape, params: &ParameterStore, mut h: Var, layers: &[Dense], relu_last: bool) -> Result<Var> {
        for (l, d) in layers.iter().enumerate() {
            let w = tape.param(params, d.weight);
            let b = tape.param(params, d.bias);
            h = tape.affine(h, w, b)?;
            if relu_last || l + 1 < layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Records the scores `[batch, C]` of encoded inputs `x` using the
    /// parameter values in `params` (normally [`Self::params`]).
    pub fn score_with(&self, tape: &mut Tape, params: &ParameterStore, x: &Tensor) -> Result<Var> {
        if x.shape().len() != 2 || x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "model expects [batch, {}] inputs, got {:?}",
                self.input_dim,
                x.shape()
            )));
        }
        match &self.network {
            Network::Mnl {
                beta,
                asc,
                beta_mask,
                asc_mask,
            } => {
                let xv = tape.constant(x.clone());
                let w = tape.param(params, *beta);
                let w = tape.mul_const(w, beta_mask.clone())?;
                let b = tape.param(params, *asc);
                let b = tape.mul_const(b, asc_mask.clone())?;
                tape.affine(xv, w, b)
            }
            Network::Dnn { layers } => {
                let xv = tape.constant(x.clone());
                self.run_mlp(tape, params, xv, layers, false)
            }
            Network::AsuDnn {
                alt_columns,
                socio_columns,
                socio_layers,
                alt_layers,
            } => {
                let s = tape.constant(gather_columns(x, socio_columns));
                let z = self.run_mlp(tape, params, s, socio_layers, true)?;
                let mut scores = Vec::with_capacity(alt_columns.len());
                for (cols, layers) in alt_columns.iter().zip(alt_layers) {
                    let a = tape.constant(gather_columns(x, cols));
                    let input = tape.concat_cols(&[a, z])?;
                    scores.push(self.run_mlp(tape, params, input, layers, false)?);
                }
                tape.concat_cols(&scores)
            }
        }
    }

    pub fn score(&self, tape: &mut Tape, x: &Tensor) -> Result<Var> {
        self.score_with(tape, &self.params, x)
    }

    /// Records `masked_softmax(score(x), avail)`.
    pub fn probabilities_with(
        &self,
        tape: &mut Tape,
        params: &ParameterStore,
        x: &Tensor,
        avail: &[bool],
    ) -> Result<Var> {
        let s = self.score_with(tape, params, x)?;
        tape.masked_softmax(s, avail)
    }

    pub fn probabilities(&self, tape: &mut Tape, x: &Tensor, avail: &[bool]) -> Result<Var> {
        self.probabilities_with(tape, &self.params, x, avail)
    }

    /// Scores without keeping a tape.
    pub fn scores(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let s = self.score(&mut tape, x)?;
        Ok(tape.value(s).clone())
    }

    /// Probabilities `[batch, C]` without keeping a tape.
    pub fn predict_proba(&self, x: &Tensor, avail: &[bool]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let p = self.probabilities(&mut tape, x, avail)?;
        Ok(tape.value(p).clone())
    }

    /// Argmax alternative per row; ties go to the lowest index and
    /// unavailable alternatives are never chosen.
    pub fn predict(&self, x: &Tensor, avail: &[bool]) -> Result<Vec<usize>> {
        let p = self.predict_proba(x, avail)?;
        Ok(argmax_rows(&p, avail))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format: MODEL_FORMAT.into(),
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Config(format!("unsupported model format `{}`", file.format)));
        }
        let mut m = file.model;
        m.params.zero_grad();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// MNL coefficient (scaled space) of encoded column `col` in the utility
    /// of alternative `alt`, as the model actually uses it.
    pub fn mnl_coefficient(&self, col: usize, alt: usize) -> Result<f64> {
        match &self.network {
            Network::Mnl { beta, beta_mask, .. } => {
                Ok(self.params.value(*beta).get(col, alt) * beta_mask.get(col, alt))
            }
            _ => Err(Error::Usage(format!("{} has no linear coefficients", self.kind().label()))),
        }
    }

    /// MNL alternative-specific constants (scaled space), reference first.
    pub fn mnl_constants(&self) -> Result<Vec<f64>> {
        match &self.network {
            Network::Mnl { asc, asc_mask, .. } => Ok(self
                .params
                .value(*asc)
                .values()
                .iter()
                .zip(asc_mask.values())
                .map(|(a, m)| a * m)
                .collect()),
            _ => Err(Error::Usage(format!("{} has no constants", self.kind().label()))),
        }
    }

    /// MNL coefficient of continuous raw feature `m` in alternative `alt`
    /// converted back to raw units (per minute, per CHF, ...).
    pub fn mnl_raw_coefficient(&self, dataset: &Dataset, m: usize, alt: usize) -> Result<f64> {
        let col = dataset.encoded_index(m)?;
        let std = dataset.scaling().expect("encoded_index checked scaling").stats[m].std;
        Ok(self.mnl_coefficient(col, alt)? / std)
    }

    /// MNL constants in raw units (relative to the reference alternative),
    /// valid when every attribute is continuous.
    pub fn mnl_raw_constants(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        let scaled = self.mnl_constants()?;
        let stats = &dataset
            .scaling()
            .ok_or_else(|| Error::Usage("dataset has no fitted scaling".into()))?
            .stats;
        let layout = dataset.schema().encoded_layout();
        let mut raw = Vec::with_capacity(scaled.len());
        for (j, a) in scaled.iter().enumerate() {
            let mut shift = 0.0;
            for (m, f) in dataset.schema().features.iter().enumerate() {
                if f.is_continuous() {
                    let b = self.mnl_coefficient(layout[m].start, j)?;
                    shift += b * stats[m].mean / stats[m].std;
                }
            }
            raw.push(a - shift);
        }
        let r0 = raw[0];
        Ok(raw.into_iter().map(|v| v - r0).collect())
    }
}

/// Argmax over available entries of each row, lowest index on ties.
pub fn argmax_rows(p: &Tensor, avail: &[bool]) -> Vec<usize> {
    let c = p.cols();
    (0..p.rows())
        .map(|r| {
            let row = p.row_slice(r);
            let mut best: Option<usize> = None;
            for j in 0..c {
                if avail[r * c + j] && best.is_none_or(|b| row[j] > row[b]) {
                    best = Some(j);
                }
            }
            best.unwrap_or(0)
        })
        .collect()
}

/// MNL value of time of alternative `alt` in CHF/hour: the raw-unit ratio
/// of its travel-time and cost coefficients, times 60.
pub fn extract_mnl_vot(model: &ChoiceModel, dataset: &Dataset, alt: usize) -> Result<f64> {
    let schema = dataset.schema();
    let tt = schema
        .constrained_feature(alt, AttributeKind::TravelTime)
        .ok_or_else(|| Error::Config(format!("alternative {alt} has no travel-time feature")))?;
    let co = schema
        .constrained_feature(alt, AttributeKind::Cost)
        .ok_or_else(|| Error::Config(format!("alternative {alt} has no cost feature")))?;
    let b_time = model.mnl_raw_coefficient(dataset, tt, alt)?;
    let b_cost = model.mnl_raw_coefficient(dataset, co, alt)?;
    vot_from_coefficients(b_time, b_cost)
}

/// `beta_time / beta_cost * 60` with time in minutes and cost in CHF.
pub fn vot_from_coefficients(beta_time: f64, beta_cost: f64) -> Result<f64> {
    if beta_cost == 0.0 {
        return Err(Error::DegenerateRatio("cost coefficient is zero".into()));
    }
    Ok(beta_time / beta_cost * 60.0)
}
