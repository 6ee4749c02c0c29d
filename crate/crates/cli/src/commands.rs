use std::path::{Path, PathBuf};

use anyhow::Context;

use ncr_core::data::{generate_synthetic, load_csv, SynthSpec, DEFAULT_FOLDS, DEFAULT_TEST_FRACTION};
use ncr_core::models::{Kernel, ModelKind};
use ncr_core::pipeline::{run_experiment, ExperimentConfig};
use ncr_core::report::{build_report, merge_reports, write_atomic, ExperimentReport, ReportMetadata, RunFailure, RunRecord};
use ncr_core::tuning::Objective;
use ncr_core::{Dataset, GridSpec, ModelSpec};

use crate::config::{usage, DataSource, RunConfig};

/// Starting point for a model's grid; the tuned value (alpha or C) is overwritten per cell.
pub fn base_spec(kind: ModelKind, kernel: Kernel<f64>) -> ModelSpec {
    match kind {
        ModelKind::Ols => ModelSpec::ols(),
        ModelKind::Ridge => ModelSpec::ridge(1.0),
        ModelKind::Lasso => ModelSpec::lasso(1.0),
        ModelKind::Svr => ModelSpec::svr(1.0, kernel),
    }
}

fn grid_for(kind: ModelKind, augmented: bool, objective: Objective, rc: &RunConfig) -> GridSpec {
    GridSpec::new(base_spec(kind, rc.kernel()), augmented, objective)
        .with_resolution(rc.resolution)
        .with_alpha_grid(rc.alpha_grid)
}

/// Runs `f` on a pool of `workers` threads, or on rayon's global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> anyhow::Result<R> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building worker pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn metadata(rc: &RunConfig) -> ReportMetadata {
    ReportMetadata::new(rc.resolution, rc.seed, DEFAULT_TEST_FRACTION, DEFAULT_FOLDS)
}

fn create_out_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn generate(spec: &SynthSpec, out: &Path) -> anyhow::Result<()> {
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let data: Dataset = generate_synthetic(spec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_out_dir(dir)?;
    }
    data.write_csv(out)?;
    println!("{}: {} rows -> {}", spec.dataset_id(), data.len(), out.display());
    Ok(())
}

fn load(rc: &RunConfig) -> anyhow::Result<(Dataset, String, Option<SynthSpec>)> {
    match &rc.source {
        None => Err(usage("no dataset: give --dataset/--target or --n")),
        Some(DataSource::Synthetic(spec)) => Ok((generate_synthetic(spec)?, spec.dataset_id(), Some(*spec))),
        Some(DataSource::Csv { path, target }) => {
            let loaded = load_csv(path, target).map_err(|e| usage(format!("cannot load {}: {e}", path.display())))?;
            if !loaded.dropped_columns.is_empty() {
                log::warn!("dropped non-numeric columns: {}", loaded.dropped_columns.join(", "));
            }
            if loaded.dropped_rows > 0 {
                log::warn!("dropped {} rows with missing or non-numeric values", loaded.dropped_rows);
            }
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            Ok((loaded.dataset, id, None))
        }
    }
}

pub fn benchmark(rc: &RunConfig) -> anyhow::Result<()> {
    let (data, id, synthetic) = load(rc)?;
    if data.len() < DEFAULT_FOLDS {
        return Err(usage(format!("{id} has {} usable rows; need at least {DEFAULT_FOLDS}", data.len())));
    }
    let objective = rc.objective();
    let cfg = ExperimentConfig::new(grid_for(rc.model, rc.augmented, objective, rc), rc.seed);
    let outcome = with_workers(rc.workers, || run_experiment(&data, &id, synthetic, &cfg))?
        .map_err(|e| anyhow::Error::new(e).context(format!("{id}: {} run failed", rc.model)))?;

    let record = RunRecord::from_outcome(&outcome);
    let report = build_report(metadata(rc), vec![record], Vec::new());
    create_out_dir(&rc.out)?;
    let json = rc.out.join("report.json");
    report.write_json(&json)?;
    report.write_csv(&rc.out.join("report.csv"))?;
    let model = serde_json::to_string_pretty(&outcome.pipeline)? + "\n";
    write_atomic(&rc.out.join("model.json"), model.as_bytes())?;
    if rc.dump_cells {
        outcome.search.write_cells_csv(&rc.out.join("cells.csv"))?;
    }

    let m = &outcome.test_metrics;
    let floor = outcome.mmse.map_or(String::new(), |v| format!(" mmse {v:.4}"));
    println!(
        "{id} {} {}: test r2 {:.4} mse {:.4}{floor} -> {}",
        rc.model,
        if rc.augmented { "augmented" } else { "baseline" },
        m.r2,
        m.mse,
        json.display()
    );
    Ok(())
}

/// Options for `matrix` beyond the shared run configuration.
#[derive(Debug, Clone, Default)]
pub struct MatrixFilter {
    pub models: Vec<ModelKind>,
    pub sizes: Vec<usize>,
}

pub fn matrix(rc: &RunConfig, filter: &MatrixFilter) -> anyhow::Result<()> {
    let specs: Vec<SynthSpec> = SynthSpec::experiment_grid(rc.seed)
        .into_iter()
        .filter(|s| filter.sizes.is_empty() || filter.sizes.contains(&s.n))
        .collect();
    if specs.is_empty() {
        return Err(usage("no synthetic datasets match --sizes"));
    }
    let models: Vec<ModelKind> = if filter.models.is_empty() {
        ModelKind::ALL.to_vec()
    } else {
        filter.models.clone()
    };
    let objective = rc.objective.unwrap_or(Objective::MinimizeMse);
    let kernel = rc.kernel.unwrap_or(Kernel::Linear);
    let rc = RunConfig {
        kernel: Some(kernel),
        ..rc.clone()
    };

    let total = specs.len() * models.len() * 2;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut done = 0;
    for spec in &specs {
        let data: Dataset = generate_synthetic(spec)?;
        let id = spec.dataset_id();
        for &kind in &models {
            for augmented in [false, true] {
                done += 1;
                log::info!("[{done}/{total}] {id} {kind} {}", if augmented { "augmented" } else { "baseline" });
                let cfg = ExperimentConfig::new(grid_for(kind, augmented, objective, &rc), rc.seed);
                match with_workers(rc.workers, || run_experiment(&data, &id, Some(*spec), &cfg))? {
                    Ok(o) => runs.push(RunRecord::from_outcome(&o)),
                    Err(e) => {
                        log::error!("{id} {kind}: {e}");
                        failures.push(RunFailure {
                            dataset_id: id.clone(),
                            model: kind,
                            augmented,
                            error: e.to_string(),
                        });
                    }
                }
            }
        }
    }

    let report = build_report(metadata(&rc), runs, failures);
    write_all(&report, &rc.out)?;
    println!(
        "{} runs, {} failures -> {}",
        report.runs.len(),
        report.failures.len(),
        rc.out.join("report.json").display()
    );
    Ok(())
}

fn write_all(report: &ExperimentReport, out: &Path) -> anyhow::Result<()> {
    create_out_dir(out)?;
    report.write_json(&out.join("report.json"))?;
    report.write_csv(&out.join("report.csv"))?;
    report.write_mse_vs_n(&out.join("mse_vs_n.csv"))?;
    Ok(())
}

pub fn report(inputs: &[PathBuf], out: &Path) -> anyhow::Result<()> {
    let reports = inputs
        .iter()
        .map(|p| ExperimentReport::read(p).map_err(|e| usage(format!("cannot read report {}: {e}", p.display()))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let merged = merge_reports(reports)?;
    write_all(&merged, out)?;
    for b in &merged.boost_summary {
        let avg = b
            .summary
            .average_boost_over_improved
            .map_or("-".to_string(), |v| format!("{:.2}%", v * 100.0));
        println!("{}: improved {} / {}, average boost {avg}", b.model, b.summary.improved_count, b.summary.per_dataset.len());
    }
    println!("{} runs merged -> {}", merged.runs.len(), out.join("report.json").display());
    Ok(())
}

pub fn parse_models(list: &[String]) -> anyhow::Result<Vec<ModelKind>> {
    list.iter()
        .map(|s| s.parse::<ModelKind>().map_err(|e| usage(e.to_string())))
        .collect()
}
