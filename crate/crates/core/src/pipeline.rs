//! Split, tune, refit and evaluate one (dataset, model, augmentation) run.

use serde::{Deserialize, Serialize};

use crate::chaos::{augment, ChaosParams};
use crate::data::{apply_normalizer, fit_normalizer, make_split, Dataset, NormStats, SplitPlan, SynthSpec};
use crate::eval::{compute_metrics, mmse, Metrics};
use crate::linalg::DenseMatrix;
use crate::models::{self, FittedModel, ModelSpec};
use crate::scalar::Scalar;
use crate::tuning::{grid_search, GridSearchResult, GridSpec};
use crate::Result;

pub const PIPELINE_SCHEMA_VERSION: u32 = 1;

/// Everything needed to predict from raw (unnormalized) features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedPipeline<T> {
    pub schema_version: u32,
    pub norm: NormStats<T>,
    /// `None` for the baseline, which feeds normalized features straight to the model.
    pub chaos: Option<ChaosParams<T>>,
    pub model: FittedModel<T>,
}

impl<T: Scalar> FittedPipeline<T> {
    pub fn fit(x: &DenseMatrix<T>, y: &[T], chaos: Option<ChaosParams<T>>, spec: &ModelSpec<T>) -> Result<Self> {
        let norm = fit_normalizer(x)?;
        let z = apply_normalizer(x, &norm)?;
        let features = match &chaos {
            Some(p) => augment(&z, p)?,
            None => z,
        };
        let model = models::fit(&features, y, spec)?;
        Ok(Self {
            schema_version: PIPELINE_SCHEMA_VERSION,
            norm,
            chaos,
            model,
        })
    }

    pub fn features(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let z = apply_normalizer(x, &self.norm)?;
        match &self.chaos {
            Some(p) => augment(&z, p),
            None => Ok(z),
        }
    }

    pub fn predict(&self, x: &DenseMatrix<T>) -> Result<Vec<T>> {
        self.model.predict(&self.features(x)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub grid: GridSpec<T>,
    pub seed: u64,
    pub test_fraction: f64,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(grid: GridSpec<T>, seed: u64) -> Self {
        Self {
            grid,
            seed,
            test_fraction: crate::data::DEFAULT_TEST_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome<T> {
    pub dataset_id: String,
    pub plan: SplitPlan,
    pub search: GridSearchResult<T>,
    pub pipeline: FittedPipeline<T>,
    pub train_metrics: Metrics<T>,
    pub test_metrics: Metrics<T>,
    /// Least-squares noise floor of the full dataset, for synthetic runs.
    pub mmse: Option<T>,
    pub synthetic: Option<SynthSpec>,
}

/// Splits `data`, grid-searches on the training part, refits the best cell
/// on the whole training part and scores it on both parts.
pub fn run_experiment<T: Scalar>(
    data: &Dataset<T>,
    dataset_id: &str,
    synthetic: Option<SynthSpec>,
    cfg: &ExperimentConfig<T>,
) -> Result<ExperimentOutcome<T>> {
    let plan = make_split(data.len(), cfg.test_fraction, cfg.seed, cfg.grid.folds)?;
    log::info!(
        "{dataset_id}: {} {} ({} train / {} test, {} cells)",
        cfg.grid.base.kind,
        if cfg.grid.augmented { "augmented" } else { "baseline" },
        plan.train.len(),
        plan.test.len(),
        cfg.grid.n_cells()
    );
    let search = grid_search(data, &cfg.grid, &plan)?;
    let train = data.subset(&plan.train);
    let test = data.subset(&plan.test);
    let pipeline = FittedPipeline::fit(&train.x, &train.y, search.best.chaos, &search.best.model)?;
    let train_metrics = compute_metrics(&train.y, &pipeline.predict(&train.x)?)?;
    let test_metrics = compute_metrics(&test.y, &pipeline.predict(&test.x)?)?;
    let mmse = synthetic.map(|_| mmse(data)).transpose()?;
    Ok(ExperimentOutcome {
        dataset_id: dataset_id.to_string(),
        plan,
        search,
        pipeline,
        train_metrics,
        test_metrics,
        mmse,
        synthetic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::models::{Kernel, ModelKind};
    use crate::tuning::{GridResolution, Objective};

    #[test]
    fn baseline_pipeline_is_direct_training() {
        let spec = SynthSpec::new(50, 2.0, 1.0, 7);
        let d: Dataset<f64> = generate_synthetic(&spec).unwrap();
        for kind in ModelKind::ALL {
            let base = match kind {
                ModelKind::Svr => ModelSpec::svr(1.0, Kernel::Linear),
                _ => ModelSpec::new(kind),
            };
            let cfg = ExperimentConfig::new(GridSpec::new(base, false, Objective::MinimizeMse), 3);
            let out = run_experiment(&d, "d", Some(spec), &cfg).unwrap();
            let train = d.subset(&out.plan.train);
            let z = apply_normalizer(&train.x, &fit_normalizer(&train.x).unwrap()).unwrap();
            let direct = models::fit(&z, &train.y, &out.search.best.model).unwrap();
            assert_eq!(out.pipeline.model, direct);
            assert!(out.pipeline.chaos.is_none());
        }
    }

    #[test]
    fn augmented_run_reports_everything() {
        let spec = SynthSpec::new(40, -2.0, 0.1, 1);
        let d: Dataset<f64> = generate_synthetic(&spec).unwrap();
        let mut grid = GridSpec::new(ModelSpec::ridge(0.0), true, Objective::MinimizeMse).with_resolution(GridResolution::Coarse);
        grid.q_grid.truncate(3);
        grid.eps_grid.truncate(2);
        let out = run_experiment(&d, "d", Some(spec), &ExperimentConfig::new(grid, 42)).unwrap();
        assert_eq!(out.search.cells.len(), 3 * 2 * 3);
        assert!(out.pipeline.chaos.is_some());
        assert_eq!(out.test_metrics.n, 8);
        assert_eq!(out.train_metrics.n, 32);
        assert!(out.mmse.unwrap() > 0.0);
        let json = serde_json::to_string(&out.pipeline).unwrap();
        let back: FittedPipeline<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out.pipeline);
    }
}
