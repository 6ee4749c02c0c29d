//! K-fold cross-validated grid search over `(q, eps_stim)` and the model
//! hyperparameter (α for ridge/lasso, C for SVR).
//!
//! Cells are ordered lexicographically: `q` ascending, then `eps_stim`, then
//! the model hyperparameter in grid order. The best cell is the first one
//! whose mean fold score is strictly better than everything before it, so
//! ties go to the earliest cell regardless of how the work was scheduled.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{augment, ChaosParams};
use crate::data::{apply_normalizer, fit_normalizer, Dataset, SplitPlan};
use crate::eval::{compute_metrics, Metrics};
use crate::linalg::DenseMatrix;
use crate::models::{self, fit_svr_with_gram, kernel_matrix, resolve_kernel, ModelKind, ModelSpec};
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[serde(rename = "r2")]
    MaximizeR2,
    #[serde(rename = "mse")]
    MinimizeMse,
}

impl Objective {
    pub fn score<T: Scalar>(self, m: &Metrics<T>) -> T {
        match self {
            Objective::MaximizeR2 => m.r2,
            Objective::MinimizeMse => m.mse,
        }
    }

    /// Whether `a` is strictly better than `b`. NaN loses to any number.
    pub fn better<T: Scalar>(self, a: T, b: T) -> bool {
        match (a.is_nan(), b.is_nan()) {
            (true, _) => false,
            (false, true) => true,
            _ => match self {
                Objective::MaximizeR2 => a > b,
                Objective::MinimizeMse => a < b,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::MaximizeR2 => "r2",
            Objective::MinimizeMse => "mse",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r2" => Ok(Objective::MaximizeR2),
            "mse" => Ok(Objective::MinimizeMse),
            other => Err(Error::InvalidParam(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridResolution {
    /// `q` in 0.01..=0.99 and `eps_stim` in 0.01..=0.45, both with step 0.01.
    Full,
    /// Same ranges with steps 0.07 and 0.05.
    Coarse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaGrid {
    /// {0.1, 1, 10}
    Standard,
    /// {0.0001, 0.001, 0.01}
    Small,
}

impl AlphaGrid {
    pub fn values<T: Scalar>(self) -> Vec<T> {
        let v: &[f64] = match self {
            AlphaGrid::Standard => &[0.1, 1.0, 10.0],
            AlphaGrid::Small => &[0.0001, 0.001, 0.01],
        };
        v.iter().map(|&a| T::lit(a)).collect()
    }
}

impl std::str::FromStr for AlphaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(AlphaGrid::Standard),
            "small" => Ok(AlphaGrid::Small),
            other => Err(Error::InvalidParam(format!("unknown alpha grid `{other}`"))),
        }
    }
}

pub const C_GRID: [f64; 4] = [1.0, 10.0, 50.0, 100.0];

fn hundredths<T: Scalar>(start: usize, end: usize, step: usize) -> Vec<T> {
    (start..=end).step_by(step).map(|k| T::lit(k as f64 / 100.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GridSpec<T> {
    /// Model kind plus everything that is not tuned (kernel, tube, solver limits).
    pub base: ModelSpec<T>,
    pub augmented: bool,
    pub objective: Objective,
    pub resolution: GridResolution,
    pub q_grid: Vec<T>,
    pub eps_grid: Vec<T>,
    pub alpha_grid: Vec<T>,
    pub c_grid: Vec<T>,
    pub folds: usize,
    /// Trace length cap used for every chaos cell.
    pub max_iters: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(base: ModelSpec<T>, augmented: bool, objective: Objective) -> Self {
        Self {
            base,
            augmented,
            objective,
            resolution: GridResolution::Full,
            q_grid: hundredths(1, 99, 1),
            eps_grid: hundredths(1, 45, 1),
            alpha_grid: AlphaGrid::Standard.values(),
            c_grid: C_GRID.iter().map(|&c| T::lit(c)).collect(),
            folds: crate::data::DEFAULT_FOLDS,
            max_iters: crate::chaos::DEFAULT_MAX_ITERS,
        }
    }

    pub fn with_resolution(mut self, resolution: GridResolution) -> Self {
        self.resolution = resolution;
        match resolution {
            GridResolution::Full => {
                self.q_grid = hundredths(1, 99, 1);
                self.eps_grid = hundredths(1, 45, 1);
            }
            GridResolution::Coarse => {
                self.q_grid = hundredths(1, 99, 7);
                self.eps_grid = hundredths(1, 45, 5);
            }
        }
        self
    }

    pub fn with_alpha_grid(mut self, grid: AlphaGrid) -> Self {
        self.alpha_grid = grid.values();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.folds < 2 {
            return Err(Error::InvalidParam(format!("need at least 2 folds, got {}", self.folds)));
        }
        let nonempty = |name: &str, v: &[T]| {
            if v.is_empty() {
                Err(Error::InvalidParam(format!("{name} grid is empty")))
            } else {
                Ok(())
            }
        };
        if self.augmented {
            nonempty("q", &self.q_grid)?;
            nonempty("eps_stim", &self.eps_grid)?;
            for &q in &self.q_grid {
                ChaosParams::new(q, T::lit(0.5))?;
            }
            for &e in &self.eps_grid {
                ChaosParams::new(T::lit(0.5), e)?;
            }
        }
        match self.base.kind {
            ModelKind::Ridge | ModelKind::Lasso => nonempty("alpha", &self.alpha_grid)?,
            ModelKind::Svr => nonempty("C", &self.c_grid)?,
            ModelKind::Ols => {}
        }
        Ok(())
    }

    /// `(q, eps_stim)` pairs in evaluation order; a single `None` when not augmented.
    fn chaos_cells(&self) -> Result<Vec<Option<ChaosParams<T>>>> {
        if !self.augmented {
            return Ok(vec![None]);
        }
        let mut out = Vec::with_capacity(self.q_grid.len() * self.eps_grid.len());
        for &q in &self.q_grid {
            for &e in &self.eps_grid {
                let mut p = ChaosParams::new(q, e)?;
                p.max_iters = self.max_iters;
                out.push(Some(p));
            }
        }
        Ok(out)
    }

    fn model_cells(&self) -> Vec<ModelSpec<T>> {
        match self.base.kind {
            ModelKind::Ols => vec![self.base.clone()],
            ModelKind::Ridge | ModelKind::Lasso => self
                .alpha_grid
                .iter()
                .map(|&alpha| ModelSpec {
                    alpha,
                    ..self.base.clone()
                })
                .collect(),
            ModelKind::Svr => self
                .c_grid
                .iter()
                .map(|&c| ModelSpec { c, ..self.base.clone() })
                .collect(),
        }
    }

    pub fn n_cells(&self) -> usize {
        let chaos = if self.augmented {
            self.q_grid.len() * self.eps_grid.len()
        } else {
            1
        };
        chaos * self.model_cells().len()
    }
}

/// One point of the search grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GridCell<T> {
    pub chaos: Option<ChaosParams<T>>,
    pub model: ModelSpec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CellScore<T> {
    pub cell: GridCell<T>,
    pub fold_scores: Vec<T>,
    pub mean: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GridSearchResult<T> {
    pub best: GridCell<T>,
    pub best_cv_score: T,
    pub best_fold_scores: Vec<T>,
    pub objective: Objective,
    /// Every evaluated cell in lexicographic order.
    pub cells: Vec<CellScore<T>>,
}

impl<T: Scalar> GridSearchResult<T> {
    /// Writes one row per cell: q, eps_stim, alpha, C, fold scores, mean.
    pub fn write_cells_csv(&self, path: &Path) -> Result<()> {
        let folds = self.cells.first().map_or(0, |c| c.fold_scores.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["q", "eps_stim", "alpha", "c"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=folds).map(|k| format!("fold_{k}")));
        header.push("mean".into());
        w.write_record(&header)?;
        for cs in &self.cells {
            let opt = |v: Option<T>| v.map_or(String::new(), |v| v.to_string());
            let mut rec = vec![
                opt(cs.cell.chaos.map(|p| p.q)),
                opt(cs.cell.chaos.map(|p| p.eps_stim)),
                opt(matches!(cs.cell.model.kind, ModelKind::Ridge | ModelKind::Lasso).then_some(cs.cell.model.alpha)),
                opt((cs.cell.model.kind == ModelKind::Svr).then_some(cs.cell.model.c)),
            ];
            rec.extend(cs.fold_scores.iter().map(|s| s.to_string()));
            rec.push(cs.mean.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        crate::report::write_atomic(path, &bytes)
    }
}

/// Normalized fold-train and validation features for one fold.
struct Fold<T> {
    z_train: DenseMatrix<T>,
    y_train: Vec<T>,
    z_val: DenseMatrix<T>,
    y_val: Vec<T>,
}

fn prepare_folds<T: Scalar>(data: &Dataset<T>, plan: &SplitPlan) -> Result<Vec<Fold<T>>> {
    if plan.folds.len() < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {}", plan.folds.len())));
    }
    let mut out = Vec::with_capacity(plan.folds.len());
    for (k, val_idx) in plan.folds.iter().enumerate() {
        let train_idx = plan.fold_train(k);
        if val_idx.is_empty() || train_idx.is_empty() {
            return Err(Error::DegenerateFold(k));
        }
        if let Some(&bad) = val_idx.iter().chain(&train_idx).find(|&&i| i >= data.len()) {
            return Err(Error::DimensionMismatch {
                context: "fold index vs dataset rows",
                expected: data.len(),
                actual: bad,
            });
        }
        let x_train = data.x.select_rows(&train_idx);
        let stats = fit_normalizer(&x_train)?;
        out.push(Fold {
            z_train: apply_normalizer(&x_train, &stats)?,
            y_train: train_idx.iter().map(|&i| data.y[i]).collect(),
            z_val: apply_normalizer(&data.x.select_rows(val_idx), &stats)?,
            y_val: val_idx.iter().map(|&i| data.y[i]).collect(),
        });
    }
    Ok(out)
}

/// Fold scores for every model cell at one chaos cell, `[model][fold]`.
fn score_chaos_cell<T: Scalar>(
    folds: &[Fold<T>],
    chaos: Option<&ChaosParams<T>>,
    models: &[ModelSpec<T>],
    objective: Objective,
) -> Result<Vec<Vec<T>>> {
    let mut scores = vec![Vec::with_capacity(folds.len()); models.len()];
    for fold in folds {
        let (xt, xv) = match chaos {
            Some(p) => (augment(&fold.z_train, p)?, augment(&fold.z_val, p)?),
            None => (fold.z_train.clone(), fold.z_val.clone()),
        };
        // The Gram matrix depends only on the features, so SVR cells share it.
        let gram = match models.first() {
            Some(s) if s.kind == ModelKind::Svr => {
                let kernel = resolve_kernel(&s.kernel, &xt);
                let k = kernel_matrix(&xt, &kernel);
                Some((kernel, k))
            }
            _ => None,
        };
        for (spec, out) in models.iter().zip(scores.iter_mut()) {
            let model = match &gram {
                Some((kernel, k)) => fit_svr_with_gram(&xt, &fold.y_train, spec, *kernel, k)?,
                None => models::fit(&xt, &fold.y_train, spec)?,
            };
            let pred = model.predict(&xv)?;
            out.push(objective.score(&compute_metrics(&fold.y_val, &pred)?));
        }
    }
    Ok(scores)
}

fn mean_score<T: Scalar>(scores: &[T]) -> T {
    scores.iter().fold(T::zero(), |a, &b| a + b) / T::lit(scores.len() as f64)
}

/// Mean validation score of one cell over the folds of `plan`.
///
/// `plan` indexes rows of `data`. Each fold fits its own normalizer on the
/// fold-train rows, then augments (if `cell.chaos` is set) and fits the model.
pub fn cross_validate<T: Scalar>(
    data: &Dataset<T>,
    cell: &GridCell<T>,
    plan: &SplitPlan,
    objective: Objective,
) -> Result<T> {
    cell.model.validate()?;
    let folds = prepare_folds(data, plan)?;
    let scores = score_chaos_cell(&folds, cell.chaos.as_ref(), std::slice::from_ref(&cell.model), objective)?;
    Ok(mean_score(&scores[0]))
}

/// Exhaustive search over `spec`'s grid using the folds of `plan`.
///
/// Chaos cells are scored in parallel on the current rayon pool; the
/// reduction is serial over the ordered results.
pub fn grid_search<T: Scalar>(data: &Dataset<T>, spec: &GridSpec<T>, plan: &SplitPlan) -> Result<GridSearchResult<T>> {
    spec.validate()?;
    if plan.folds.len() != spec.folds {
        return Err(Error::InvalidParam(format!(
            "split has {} folds, grid expects {}",
            plan.folds.len(),
            spec.folds
        )));
    }
    let folds = prepare_folds(data, plan)?;
    let chaos_cells = spec.chaos_cells()?;
    let models = spec.model_cells();
    log::debug!(
        "grid search: {} {} cells, {} folds",
        spec.n_cells(),
        spec.base.kind,
        folds.len()
    );

    let per_chaos: Vec<Result<Vec<Vec<T>>>> = chaos_cells
        .par_iter()
        .map(|c| score_chaos_cell(&folds, c.as_ref(), &models, spec.objective))
        .collect();

    let mut cells = Vec::with_capacity(spec.n_cells());
    for (chaos, scores) in chaos_cells.iter().zip(per_chaos) {
        for (model, fold_scores) in models.iter().zip(scores?) {
            cells.push(CellScore {
                cell: GridCell {
                    chaos: *chaos,
                    model: model.clone(),
                },
                mean: mean_score(&fold_scores),
                fold_scores,
            });
        }
    }

    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        if spec.objective.better(c.mean, cells[best].mean) {
            best = i;
        }
    }
    let b = &cells[best];
    Ok(GridSearchResult {
        best: b.cell.clone(),
        best_cv_score: b.mean,
        best_fold_scores: b.fold_scores.clone(),
        objective: spec.objective,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_split;

    fn line_data(m: usize) -> Dataset<f64> {
        let xs: Vec<f64> = (0..m).map(|i| i as f64 * 0.37 - 3.0).collect();
        let y = xs.iter().map(|v| 1.5 * v - 0.5).collect();
        Dataset::new(DenseMatrix::column_vector(&xs).unwrap(), y, vec!["x".into()], "y").unwrap()
    }

    fn noisy_data(m: usize) -> Dataset<f64> {
        let xs: Vec<f64> = (0..m).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let y = xs
            .iter()
            .enumerate()
            .map(|(i, v)| 2.0 * v + ((i * 31) % 7) as f64 * 0.3 - 1.0)
            .collect();
        Dataset::new(DenseMatrix::column_vector(&xs).unwrap(), y, vec!["x".into()], "y").unwrap()
    }

    #[test]
    fn grid_sizes() {
        let g = GridSpec::<f64>::new(ModelSpec::ridge(0.0), true, Objective::MinimizeMse);
        assert_eq!(g.q_grid.len(), 99);
        assert_eq!(g.eps_grid.len(), 45);
        assert_eq!(g.q_grid[0], 0.01);
        assert_eq!(*g.q_grid.last().unwrap(), 0.99);
        assert_eq!(*g.eps_grid.last().unwrap(), 0.45);
        assert_eq!(g.n_cells(), 99 * 45 * 3);
        let c = g.with_resolution(GridResolution::Coarse);
        assert_eq!(c.q_grid.len(), 15);
        assert_eq!(*c.q_grid.last().unwrap(), 0.99);
        assert_eq!(c.eps_grid.len(), 9);
        assert_eq!(*c.eps_grid.last().unwrap(), 0.41);
        let base = GridSpec::<f64>::new(ModelSpec::svr(1.0, models::Kernel::Linear), false, Objective::MaximizeR2);
        assert_eq!(base.n_cells(), 4);
        assert_eq!(AlphaGrid::Small.values::<f64>(), vec![0.0001, 0.001, 0.01]);
    }

    #[test]
    fn empty_grid_rejected() {
        let mut g = GridSpec::<f64>::new(ModelSpec::lasso(0.0), false, Objective::MinimizeMse);
        g.alpha_grid.clear();
        assert!(g.validate().is_err());
    }

    #[test]
    fn perfect_line_has_zero_cv_mse() {
        // Six copies of each endpoint put both extremes in every fold-train
        // part, so no validation value is clipped by the normalizer.
        let mut xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.37 - 3.0).collect();
        xs.extend([-3.0; 6]);
        xs.extend([19.0 * 0.37 - 3.0; 6]);
        let y = xs.iter().map(|v| 1.5 * v - 0.5).collect();
        let d = Dataset::new(DenseMatrix::column_vector(&xs).unwrap(), y, vec!["x".into()], "y").unwrap();
        let plan = make_split(d.len(), 0.2, 3, 5).unwrap();
        let cell = GridCell {
            chaos: None,
            model: ModelSpec::ols(),
        };
        assert!(cross_validate(&d, &cell, &plan, Objective::MinimizeMse).unwrap() < 1e-10);
    }

    #[test]
    fn constant_target_scores_zero_r2() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let d = Dataset::new(DenseMatrix::column_vector(&xs).unwrap(), vec![3.0; 20], vec!["x".into()], "y").unwrap();
        let plan = make_split(d.len(), 0.2, 1, 5).unwrap();
        let cell = GridCell {
            chaos: None,
            model: ModelSpec::ridge(1.0),
        };
        assert_eq!(cross_validate(&d, &cell, &plan, Objective::MaximizeR2).unwrap(), 0.0);
    }

    #[test]
    fn empty_fold_is_an_error() {
        let d = line_data(10);
        let mut plan = make_split(d.len(), 0.2, 1, 5).unwrap();
        plan.folds[2].clear();
        let cell = GridCell {
            chaos: None,
            model: ModelSpec::ols(),
        };
        assert!(matches!(
            cross_validate(&d, &cell, &plan, Objective::MinimizeMse),
            Err(Error::DegenerateFold(2))
        ));
    }

    #[test]
    fn single_cell_grid() {
        let d = noisy_data(40);
        let plan = make_split(d.len(), 0.2, 9, 5).unwrap();
        let mut g = GridSpec::new(ModelSpec::ridge(0.0), true, Objective::MinimizeMse);
        g.q_grid = vec![0.3];
        g.eps_grid = vec![0.2];
        g.alpha_grid = vec![0.5];
        let r = grid_search(&d, &g, &plan).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.best.chaos.unwrap().q, 0.3);
        assert_eq!(r.best.model.alpha, 0.5);
        let direct = cross_validate(&d, &r.best, &plan, Objective::MinimizeMse).unwrap();
        assert_eq!(direct, r.best_cv_score);
    }

    #[test]
    fn perfect_cell_wins_under_both_objectives() {
        let d = line_data(40);
        let plan = make_split(d.len(), 0.2, 2, 5).unwrap();
        for obj in [Objective::MinimizeMse, Objective::MaximizeR2] {
            let mut g = GridSpec::new(ModelSpec::ridge(0.0), false, obj);
            g.alpha_grid = vec![100.0, 1e-12, 10.0];
            let r = grid_search(&d, &g, &plan).unwrap();
            assert_eq!(r.best.model.alpha, 1e-12);
        }
    }

    #[test]
    fn ties_go_to_first_cell() {
        // With a huge neighbourhood every trace stops at q, so the Tracemean
        // column is constant and all eps cells score identically.
        let d = noisy_data(30);
        let plan = make_split(d.len(), 0.2, 4, 5).unwrap();
        let mut g = GridSpec::new(ModelSpec::ols(), true, Objective::MinimizeMse);
        g.q_grid = vec![0.5];
        g.eps_grid = vec![0.9, 0.8, 0.7];
        let r = grid_search(&d, &g, &plan).unwrap();
        assert_eq!(r.cells[0].mean, r.cells[1].mean);
        assert_eq!(r.cells[1].mean, r.cells[2].mean);
        assert_eq!(r.best.chaos.unwrap().eps_stim, 0.9);
    }

    #[test]
    fn best_is_optimum_of_table_and_schedule_independent() {
        let d = noisy_data(50);
        let plan = make_split(d.len(), 0.2, 5, 5).unwrap();
        let mut g = GridSpec::new(ModelSpec::lasso(0.0), true, Objective::MinimizeMse).with_resolution(GridResolution::Coarse);
        g.q_grid.truncate(4);
        g.eps_grid.truncate(3);
        let a = grid_search(&d, &g, &plan).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| grid_search(&d, &g, &plan).unwrap());
        assert_eq!(a, b);
        let min = a.cells.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
        assert_eq!(a.best_cv_score, min);
        let first = a.cells.iter().position(|c| c.mean == min).unwrap();
        assert_eq!(a.cells[first].cell, a.best);
    }

    #[test]
    fn svr_gram_reuse_matches_plain_fit() {
        let d = noisy_data(30);
        let plan = make_split(d.len(), 0.2, 6, 5).unwrap();
        let g = GridSpec::new(ModelSpec::svr(1.0, models::Kernel::Linear), false, Objective::MinimizeMse);
        let r = grid_search(&d, &g, &plan).unwrap();
        for cs in &r.cells {
            let direct = cross_validate(&d, &cs.cell, &plan, Objective::MinimizeMse).unwrap();
            assert_eq!(direct, cs.mean);
        }
    }

    #[test]
    fn cells_csv_dump() {
        let d = noisy_data(30);
        let plan = make_split(d.len(), 0.2, 6, 5).unwrap();
        let g = GridSpec::new(ModelSpec::ridge(0.0), false, Objective::MinimizeMse);
        let r = grid_search(&d, &g, &plan).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cells.csv");
        r.write_cells_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "q,eps_stim,alpha,c,fold_1,fold_2,fold_3,fold_4,fold_5,mean");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with(",,0.1,,"));
    }
}
