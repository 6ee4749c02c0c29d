//! Experiment reports: a canonical JSON document and a flat CSV mirror.
//!
//! Reports contain no timestamps or host details, so identical inputs give
//! identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SynthSpec;
use crate::eval::{summarize_boosts, BoostSummary, Metrics};
use crate::models::{FittedKernel, ModelKind, Predictor};
use crate::pipeline::ExperimentOutcome;
use crate::tuning::{GridResolution, Objective};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParam(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub version: String,
    pub grid: GridResolution,
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
}

impl ReportMetadata {
    pub fn new(grid: GridResolution, seed: u64, test_fraction: f64, folds: usize) -> Self {
        Self {
            tool: "ncr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            grid,
            seed,
            test_fraction,
            folds,
        }
    }
}

/// Selected hyperparameters; fields that do not apply to the model are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_stim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tube: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset_id: String,
    pub model: ModelKind,
    pub augmented: bool,
    pub hyperparams: Hyperparams,
    pub objective: Objective,
    pub cv_score: f64,
    pub train_metrics: Metrics<f64>,
    pub test_metrics: Metrics<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mmse: Option<f64>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub synthetic: Option<SynthSpec>,
}

impl RunRecord {
    pub fn from_outcome(o: &ExperimentOutcome<f64>) -> Self {
        let spec = &o.search.best.model;
        let model = &o.pipeline.model;
        let (kernel, gamma) = match &model.predictor {
            Predictor::Kernel { kernel, .. } => match kernel {
                FittedKernel::Linear => (Some("linear".to_string()), None),
                FittedKernel::Rbf { gamma } => (Some("rbf".to_string()), Some(*gamma)),
            },
            Predictor::Linear { .. } => (None, None),
        };
        let is_penalized = matches!(spec.kind, ModelKind::Ridge | ModelKind::Lasso);
        let is_svr = spec.kind == ModelKind::Svr;
        Self {
            dataset_id: o.dataset_id.clone(),
            model: spec.kind,
            augmented: o.pipeline.chaos.is_some(),
            hyperparams: Hyperparams {
                q: o.pipeline.chaos.map(|p| p.q),
                eps_stim: o.pipeline.chaos.map(|p| p.eps_stim),
                alpha: is_penalized.then_some(spec.alpha),
                c: is_svr.then_some(spec.c),
                tube: is_svr.then_some(spec.tube),
                kernel,
                gamma,
            },
            objective: o.search.objective,
            cv_score: o.search.best_cv_score,
            train_metrics: o.train_metrics,
            test_metrics: o.test_metrics,
            mmse: o.mmse,
            converged: model.converged,
            synthetic: o.synthetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub dataset_id: String,
    pub model: ModelKind,
    pub augmented: bool,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBoost {
    pub model: ModelKind,
    /// Boosts use test-set R².
    pub summary: BoostSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub metadata: ReportMetadata,
    pub runs: Vec<RunRecord>,
    pub boost_summary: Vec<ModelBoost>,
    pub failures: Vec<RunFailure>,
}

/// (dataset_id, baseline test R², augmented test R²)
type Pair = (String, Option<f64>, Option<f64>);

/// Pairs baseline and augmented runs per (model, dataset) and summarizes their test-R² boosts.
fn boost_table(runs: &[RunRecord]) -> Vec<ModelBoost> {
    let mut pairs: BTreeMap<ModelKind, Vec<Pair>> = BTreeMap::new();
    for r in runs {
        let list = pairs.entry(r.model).or_default();
        let idx = match list.iter().position(|(id, _, _)| *id == r.dataset_id) {
            Some(i) => i,
            None => {
                list.push((r.dataset_id.clone(), None, None));
                list.len() - 1
            }
        };
        if r.augmented {
            list[idx].2 = Some(r.test_metrics.r2);
        } else {
            list[idx].1 = Some(r.test_metrics.r2);
        }
    }
    pairs
        .into_iter()
        .filter_map(|(model, list)| {
            let complete: Vec<(String, f64, f64)> = list
                .into_iter()
                .filter_map(|(id, b, a)| Some((id, b?, a?)))
                .collect();
            (!complete.is_empty()).then(|| ModelBoost {
                model,
                summary: summarize_boosts(complete),
            })
        })
        .collect()
}

pub fn build_report(metadata: ReportMetadata, runs: Vec<RunRecord>, failures: Vec<RunFailure>) -> ExperimentReport {
    let boost_summary = boost_table(&runs);
    ExperimentReport {
        schema_version: SCHEMA_VERSION,
        metadata,
        runs,
        boost_summary,
        failures,
    }
}

const CSV_HEADER: [&str; 20] = [
    "dataset_id",
    "model",
    "augmented",
    "q",
    "eps_stim",
    "alpha",
    "c",
    "objective",
    "cv_score",
    "train_r2",
    "train_mse",
    "train_mae",
    "test_r2",
    "test_mse",
    "test_mae",
    "mmse",
    "n_train",
    "n_test",
    "converged",
    "kernel",
];

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParam(format!(
                "unsupported report schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.runs {
            let h = &r.hyperparams;
            w.write_record([
                r.dataset_id.clone(),
                r.model.to_string(),
                r.augmented.to_string(),
                opt(h.q),
                opt(h.eps_stim),
                opt(h.alpha),
                opt(h.c),
                r.objective.name().to_string(),
                r.cv_score.to_string(),
                r.train_metrics.r2.to_string(),
                r.train_metrics.mse.to_string(),
                r.train_metrics.mae.to_string(),
                r.test_metrics.r2.to_string(),
                r.test_metrics.mse.to_string(),
                r.test_metrics.mae.to_string(),
                opt(r.mmse),
                r.train_metrics.n.to_string(),
                r.test_metrics.n.to_string(),
                r.converged.to_string(),
                h.kernel.clone().unwrap_or_default(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::InvalidParam(e.to_string()))
    }

    /// Test MSE against MMSE for every synthetic run, sorted by n, variance, slope, model.
    pub fn mse_vs_n_csv(&self) -> Result<Vec<u8>> {
        let mut rows: Vec<&RunRecord> = self.runs.iter().filter(|r| r.synthetic.is_some()).collect();
        rows.sort_by(|a, b| {
            let (sa, sb) = (a.synthetic.unwrap(), b.synthetic.unwrap());
            sa.n.cmp(&sb.n)
                .then(sb.noise_variance.total_cmp(&sa.noise_variance))
                .then(sb.slope.total_cmp(&sa.slope))
                .then(a.model.cmp(&b.model))
                .then(a.augmented.cmp(&b.augmented))
        });
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "slope",
            "noise_variance",
            "model",
            "augmented",
            "test_mse",
            "train_mse",
            "mmse",
            "test_mse_over_mmse",
        ])?;
        for r in rows {
            let s = r.synthetic.unwrap();
            let ratio = r.mmse.filter(|&m| m > 0.0).map(|m| r.test_metrics.mse / m);
            w.write_record([
                s.n.to_string(),
                s.slope.to_string(),
                s.noise_variance.to_string(),
                r.model.to_string(),
                r.augmented.to_string(),
                r.test_metrics.mse.to_string(),
                r.train_metrics.mse.to_string(),
                opt(r.mmse),
                opt(ratio),
            ])?;
        }
        w.into_inner().map_err(|e| Error::InvalidParam(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv()?)
    }

    pub fn write_mse_vs_n(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.mse_vs_n_csv()?)
    }
}

/// Concatenates the runs and failures of several reports (in the given order)
/// and recomputes the boost table. Metadata comes from the first report.
pub fn merge_reports(reports: Vec<ExperimentReport>) -> Result<ExperimentReport> {
    let mut it = reports.into_iter();
    let first = it.next().ok_or(Error::Empty("report list"))?;
    let metadata = first.metadata.clone();
    let mut runs = first.runs;
    let mut failures = first.failures;
    for r in it {
        if r.metadata.grid != metadata.grid {
            log::warn!("merging reports produced with different grid resolutions");
        }
        runs.extend(r.runs);
        failures.extend(r.failures);
    }
    Ok(build_report(metadata, runs, failures))
}
