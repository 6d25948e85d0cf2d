use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, RunSpec};
use crate::dataio::{apply_filters, generate_synthetic_mnl, load_raw, AttributeKind, Dataset, FilterRecord, Split};
use crate::error::{Error, Result};
use crate::evaluation::{
    curve_monotonicity_report, expected_directions, histogram_tsv, market_shares, probability_sweep,
    vot_per_observation, vot_records_tsv, vot_stats, vot_stats_tsv, MarketShareReport, VotStats,
};
use crate::knowledge::{audit_constraints, AuditReport, ConstraintSet};
use crate::models::{extract_mnl_vot, Architecture, ChoiceModel, ModelKind, SocioTerms};
use crate::training::{evaluate_split, train, SplitMetrics, TrainHistory};

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn filter_log_tsv(log: &[FilterRecord]) -> String {
    let mut s = String::from("rule\tpredicate\tdropped\tremaining\tnote\n");
    for r in log {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.rule,
            r.predicate,
            r.dropped,
            r.remaining,
            r.note.as_deref().unwrap_or("")
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub dataset: PathBuf,
    pub rows: usize,
    pub split_counts: [usize; 3],
    pub fingerprint: String,
    pub filters: Vec<FilterRecord>,
}

/// load → filter → split → scale; writes `dataset.json` and `filter_log.tsv`.
pub fn cmd_prepare(cfg: &RunConfig, out: &Path) -> Result<PrepareSummary> {
    let input = cfg
        .data
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("data.input is not set".into()))?;
    if !input.exists() {
        return Err(Error::io(
            input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "raw input file not found"),
        ));
    }
    let schema = cfg.data.schema.schema();
    let table = load_raw(input, cfg.data.delimiter, &schema)?;
    let (obs, log) = apply_filters(&table, &schema, &cfg.data.rules())?;
    let ds = Dataset::new(schema, obs)?
        .with_filter_log(log)
        .split(cfg.data.split, cfg.data.seed)?
        .fit_apply_scaling()?;
    let path = cfg.dataset_path(out);
    write(&path, ds.to_json()?)?;
    write(&out.join("filter_log.tsv"), filter_log_tsv(ds.filter_log()))?;
    let summary = PrepareSummary {
        dataset: path,
        rows: ds.len(),
        split_counts: Split::ALL.map(|s| ds.split_count(s)),
        fingerprint: ds.fingerprint(),
        filters: ds.filter_log().to_vec(),
    };
    write_json(&out.join("prepare.json"), &summary)?;
    Ok(summary)
}

fn load_dataset(cfg: &RunConfig, out: &Path) -> Result<Dataset> {
    let path = cfg.dataset_path(out);
    Dataset::load(&path).map_err(|e| match e {
        Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => Error::Io {
            path,
            source: std::io::Error::new(source.kind(), "prepared dataset not found; run `prepare` first"),
        },
        other => other,
    })
}

/// Metrics of one trained model on every split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub id: String,
    pub kind: ModelKind,
    pub constrained: bool,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub metrics: Vec<(Split, SplitMetrics)>,
    pub shares: Vec<MarketShareReport>,
    pub audit_max_fraction: f64,
}

struct Trained {
    model: ChoiceModel,
    history: TrainHistory,
    audit: AuditReport,
    outcome: RunOutcome,
}

fn architecture(cfg: &RunConfig, kind: ModelKind) -> Architecture {
    cfg.model.architecture_for(kind)
}

fn run_one(cfg: &RunConfig, ds: &Dataset, set: &ConstraintSet, spec: &RunSpec) -> Result<Trained> {
    let mut model = ChoiceModel::new(architecture(cfg, spec.kind), ds, cfg.model.seed)?;
    let empty = ConstraintSet::empty();
    let active = if spec.constrained { set } else { &empty };
    let history = train(&mut model, ds, active, &cfg.train_config(spec.constrained))?;
    let e = &cfg.evaluation;
    let audit = audit_constraints(&model, ds, set, e.audit_grid, e.audit_range_extension, e.audit_seed)?;
    let metrics = Split::ALL
        .iter()
        .filter(|&&s| ds.split_count(s) > 0)
        .map(|&s| Ok((s, evaluate_split(&model, ds, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let shares = metrics
        .iter()
        .map(|(s, _)| market_shares(&model, ds, *s))
        .collect::<Result<Vec<_>>>()?;
    let outcome = RunOutcome {
        id: spec.id.clone(),
        kind: spec.kind,
        constrained: spec.constrained,
        best_epoch: history.best_epoch,
        epochs_run: history.epochs.len(),
        metrics,
        shares,
        audit_max_fraction: audit.max_fraction(),
    };
    Ok(Trained {
        model,
        history,
        audit,
        outcome,
    })
}

/// Trains the `[model]` configuration, constrained iff
/// `constraints.enabled`; writes `model.json`, `history.tsv`, `audit.tsv`
/// and `train.json`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let ds = load_dataset(cfg, out)?;
    let set = cfg.constraints.build(ds.schema())?;
    let spec = RunSpec {
        id: run_label(cfg.model.kind, cfg.constraints.enabled),
        kind: cfg.model.kind,
        constrained: cfg.constraints.enabled,
    };
    let t = run_one(cfg, &ds, &set, &spec)?;
    write(&out.join("model.json"), t.model.to_json()?)?;
    write(&out.join("history.tsv"), t.history.to_tsv())?;
    write(&out.join("audit.tsv"), t.audit.to_tsv())?;
    write_json(&out.join("train.json"), &t.outcome)?;
    Ok(t.outcome)
}

fn run_label(kind: ModelKind, constrained: bool) -> String {
    if constrained {
        format!("C-{}", kind.label())
    } else {
        kind.label().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub id: String,
    /// `None` on success
    pub error: Option<String>,
    pub outcome: Option<RunOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub fingerprint: String,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Avg NLL and accuracy per model and split, full precision.
    pub fn nll_accuracy_tsv(&self) -> String {
        let mut s = String::from("model");
        for sp in Split::ALL {
            s.push_str(&format!("\t{0}_nll\t{0}_accuracy", sp.label()));
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.id);
            for sp in Split::ALL {
                match r.outcome.as_ref().and_then(|o| o.metrics.iter().find(|(x, _)| *x == sp)) {
                    Some((_, m)) => s.push_str(&format!("\t{}\t{}", m.avg_nll, m.accuracy)),
                    None => s.push_str("\tNA\tNA"),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Rounded display version: NLL to 2 decimals, accuracy in percent to 1.
    pub fn nll_accuracy_display(&self) -> String {
        let mut s = format!("{:<12}", "model");
        for sp in Split::ALL {
            s.push_str(&format!(" {:>10} {:>9}", format!("{} NLL", sp.label()), "acc"));
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{:<12}", r.id));
            match &r.outcome {
                Some(o) => {
                    for sp in Split::ALL {
                        match o.metrics.iter().find(|(x, _)| *x == sp) {
                            Some((_, m)) => s.push_str(&format!(" {:>10.2} {:>8.1}%", m.avg_nll, 100.0 * m.accuracy)),
                            None => s.push_str(&format!(" {:>10} {:>9}", "-", "-")),
                        }
                    }
                }
                None => s.push_str(&format!(" failed: {}", r.error.as_deref().unwrap_or(""))),
            }
            s.push('\n');
        }
        s
    }

    /// Observed row then one row per model with predicted shares (percent)
    /// and RMSE in percentage points.
    pub fn market_share_tsv(&self, split: Split, alternatives: &[String]) -> String {
        let mut s = String::from("model");
        for a in alternatives {
            s.push_str(&format!("\t{a}"));
        }
        s.push_str("\trmse\n");
        let reports: Vec<(&str, &MarketShareReport)> = self
            .rows
            .iter()
            .filter_map(|r| {
                let o = r.outcome.as_ref()?;
                Some((r.id.as_str(), o.shares.iter().find(|m| m.split == split)?))
            })
            .collect();
        if let Some((_, first)) = reports.first() {
            s.push_str("observed");
            for v in &first.observed {
                s.push_str(&format!("\t{}", 100.0 * v));
            }
            s.push_str("\t\n");
        }
        for (id, m) in reports {
            s.push_str(id);
            for v in &m.predicted {
                s.push_str(&format!("\t{}", 100.0 * v));
            }
            s.push_str(&format!("\t{}\n", m.rmse));
        }
        s
    }
}

/// Trains every manifest entry (concurrently when `experiment.parallel`),
/// then writes per-run models, histories and audits plus the NLL/accuracy
/// and market-share tables. A failed run is reported in its row.
pub fn cmd_experiment(cfg: &RunConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.experiment.validate()?;
    let ds = load_dataset(cfg, out)?;
    let set = cfg.constraints.build(ds.schema())?;
    let runs = &cfg.experiment.runs;
    let results: Vec<Result<Trained>> = if cfg.experiment.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = runs
                .iter()
                .map(|spec| scope.spawn(|| run_one(cfg, &ds, &set, spec)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Usage("training thread panicked".into()))))
                .collect()
        })
    } else {
        runs.iter().map(|spec| run_one(cfg, &ds, &set, spec)).collect()
    };

    let mut rows = Vec::with_capacity(runs.len());
    for (spec, res) in runs.iter().zip(results) {
        match res {
            Ok(t) => {
                write(&out.join("models").join(format!("{}.json", spec.id)), t.model.to_json()?)?;
                write(&out.join("histories").join(format!("{}.tsv", spec.id)), t.history.to_tsv())?;
                write(&out.join("audits").join(format!("{}.tsv", spec.id)), t.audit.to_tsv())?;
                rows.push(ExperimentRow {
                    id: spec.id.clone(),
                    error: None,
                    outcome: Some(t.outcome),
                });
            }
            Err(e) => rows.push(ExperimentRow {
                id: spec.id.clone(),
                error: Some(e.to_string()),
                outcome: None,
            }),
        }
    }
    let report = ExperimentReport {
        fingerprint: ds.fingerprint(),
        rows,
    };
    write(&out.join("nll_accuracy.tsv"), report.nll_accuracy_tsv())?;
    write(&out.join("nll_accuracy.txt"), report.nll_accuracy_display())?;
    for sp in Split::ALL {
        if ds.split_count(sp) > 0 {
            write(
                &out.join(format!("market_shares_{}.tsv", sp.label())),
                report.market_share_tsv(sp, &ds.schema().alternatives),
            )?;
        }
    }
    write_json(&out.join("experiment.json"), &report)?;
    Ok(report)
}

/// Explicit model, else every model under `<out>/models`, else
/// `<out>/model.json`.
fn model_paths(out: &Path, model: Option<&Path>) -> Result<Vec<PathBuf>> {
    if let Some(m) = model {
        return Ok(vec![m.to_path_buf()]);
    }
    let dir = out.join("models");
    if dir.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        if !paths.is_empty() {
            return Ok(paths);
        }
    }
    Ok(vec![out.join("model.json")])
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub model: String,
    pub kind: ModelKind,
    pub curve_violations: usize,
    pub audit_max_fraction: f64,
    pub audit_violations: usize,
    pub vot: Vec<(String, Option<VotStats>)>,
    /// closed-form coefficient ratio per alternative (MNL only)
    pub mnl_vot: Option<Vec<f64>>,
}

/// Sweeps of every time/cost feature with monotonicity reports, per
/// observation VOT with statistics and histograms, and a constraint audit,
/// under `<out>/analysis/<model>/`.
pub fn cmd_analyze(cfg: &RunConfig, out: &Path, model: Option<&Path>) -> Result<Vec<AnalysisSummary>> {
    let ds = load_dataset(cfg, out)?;
    let set = cfg.constraints.build(ds.schema())?;
    let e = &cfg.evaluation;
    let schema = ds.schema();
    let mut summaries = Vec::new();
    for path in model_paths(out, model)? {
        let m = ChoiceModel::load(&path)?;
        m.check_compatible(&ds)?;
        let name = stem(&path);
        let dir = out.join("analysis").join(&name);

        let mut mono = String::new();
        let mut curve_violations = 0;
        for j in 0..schema.alternative_count() {
            for kind in [AttributeKind::TravelTime, AttributeKind::Cost] {
                let Some(f) = schema.constrained_feature(j, kind) else {
                    continue;
                };
                let curve = probability_sweep(&m, &ds, e.sweep_split, f, &e.grid)?;
                write(&dir.join("sweeps").join(format!("{}.tsv", curve.feature)), curve.to_tsv())?;
                let report = curve_monotonicity_report(&curve, &expected_directions(schema, f))?;
                curve_violations += report.violation_count();
                let table = report.to_tsv();
                if mono.is_empty() {
                    mono.push_str(&table);
                } else {
                    mono.push_str(table.split_once('\n').map_or("", |(_, rest)| rest));
                }
            }
        }
        write(&dir.join("monotonicity.tsv"), &mono)?;

        let mut vot = Vec::new();
        let mut stats_rows = Vec::new();
        for j in 0..schema.alternative_count() {
            let alt = schema.alternatives[j].clone();
            let records = vot_per_observation(&m, &ds, e.vot_split, j, e.vot_step)?;
            write(&dir.join("vot").join(format!("{alt}_records.tsv")), vot_records_tsv(&records))?;
            match vot_stats(&records, e.histogram_window, e.histogram_bins) {
                Ok(st) => {
                    write(&dir.join("vot").join(format!("{alt}_histogram.tsv")), histogram_tsv(&st.histogram))?;
                    stats_rows.push((alt.clone(), st.clone()));
                    vot.push((alt, Some(st)));
                }
                Err(Error::Domain(_)) => vot.push((alt, None)),
                Err(err) => return Err(err),
            }
        }
        write(&dir.join("vot_stats.tsv"), vot_stats_tsv(&stats_rows))?;
        let mnl_vot = match m.kind() {
            ModelKind::Mnl => Some(
                (0..schema.alternative_count())
                    .map(|j| extract_mnl_vot(&m, &ds, j))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };

        let audit = audit_constraints(&m, &ds, &set, e.audit_grid, e.audit_range_extension, e.audit_seed)?;
        write(&dir.join("audit.tsv"), audit.to_tsv())?;
        let summary = AnalysisSummary {
            model: name,
            kind: m.kind(),
            curve_violations,
            audit_max_fraction: audit.max_fraction(),
            audit_violations: audit.total_violations(),
            vot,
            mnl_vot,
        };
        write_json(&dir.join("analysis.json"), &summary)?;
        summaries.push(summary);
    }
    Ok(summaries)
}

/// Constraint audit of each model into `<out>/audit/<model>.tsv`.
pub fn cmd_audit(cfg: &RunConfig, out: &Path, model: Option<&Path>) -> Result<Vec<(String, AuditReport)>> {
    let ds = load_dataset(cfg, out)?;
    let set = cfg.constraints.build(ds.schema())?;
    let e = &cfg.evaluation;
    let mut reports = Vec::new();
    for path in model_paths(out, model)? {
        let m = ChoiceModel::load(&path)?;
        m.check_compatible(&ds)?;
        let report = audit_constraints(&m, &ds, &set, e.audit_grid, e.audit_range_extension, e.audit_seed)?;
        let name = stem(&path);
        write(&out.join("audit").join(format!("{name}.tsv")), report.to_tsv())?;
        reports.push((name, report));
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub parameter: String,
    pub truth: f64,
    pub estimate: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub n: usize,
    pub rows: Vec<RecoveryRow>,
    /// Largest relative error over the time and cost coefficients. The
    /// constants are reported but excluded: with alternative-specific
    /// slopes their sampling error is several times larger.
    pub max_coefficient_error: f64,
}

/// Generates a known-truth MNL dataset, fits an unconstrained MNL to it and
/// tabulates recovered against generating coefficients.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<SynthReport> {
    let s = &cfg.synth;
    let ds = generate_synthetic_mnl(&s.truth, s.n, s.seed)?
        .split(s.split, s.seed)?
        .fit_apply_scaling()?;
    let arch = Architecture::Mnl {
        socio: SocioTerms::Excluded,
    };
    let mut model = ChoiceModel::new(arch, &ds, cfg.model.seed)?;
    let history = train(&mut model, &ds, &ConstraintSet::empty(), &cfg.synth_train_config())?;
    let rows = synth_recovery(&model, &ds, &s.truth)?;
    let max_coefficient_error = rows
        .iter()
        .filter(|r| r.parameter.starts_with("beta"))
        .map(|r| r.relative_error)
        .fold(0.0, f64::max);
    let mut tsv = String::from("parameter\ttruth\testimate\trelative_error\n");
    for r in &rows {
        tsv.push_str(&format!("{}\t{}\t{}\t{}\n", r.parameter, r.truth, r.estimate, r.relative_error));
    }
    write(&out.join("synth_dataset.json"), ds.to_json()?)?;
    write(&out.join("synth_model.json"), model.to_json()?)?;
    write(&out.join("synth_history.tsv"), history.to_tsv())?;
    write(&out.join("recovery.tsv"), tsv)?;
    let report = SynthReport {
        n: s.n,
        rows,
        max_coefficient_error,
    };
    write_json(&out.join("synth.json"), &report)?;
    Ok(report)
}

/// Raw-unit estimates of every generating parameter of `truth`.
pub fn synth_recovery(model: &ChoiceModel, ds: &Dataset, truth: &crate::dataio::SyntheticMnl) -> Result<Vec<RecoveryRow>> {
    let row = |parameter: String, truth: f64, estimate: f64| RecoveryRow {
        parameter,
        truth,
        estimate,
        relative_error: ((estimate - truth) / truth).abs(),
    };
    let mut rows = Vec::new();
    let asc = model.mnl_raw_constants(ds)?;
    for j in 1..truth.alternatives() {
        rows.push(row(format!("asc_{j}"), truth.asc[j] - truth.asc[0], asc[j]));
    }
    for j in 0..truth.alternatives() {
        rows.push(row(format!("beta_time_{j}"), truth.beta_time[j], model.mnl_raw_coefficient(ds, 2 * j, j)?));
        rows.push(row(format!("beta_cost_{j}"), truth.beta_cost[j], model.mnl_raw_coefficient(ds, 2 * j + 1, j)?));
    }
    Ok(rows)
}
