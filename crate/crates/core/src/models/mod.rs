//! Regressors behind one fit/predict interface: ordinary least squares,
//! ridge, lasso (cyclic coordinate descent) and epsilon-insensitive SVR
//! (SMO on the dual).
//!
//! Loss conventions, with `Xc`, `yc` the column-centred data and `m` rows:
//!
//! * OLS:   `‖yc − Xc β‖²`
//! * Ridge: `‖yc − Xc β‖² + α ‖β‖²`
//! * Lasso: `(1 / 2m) ‖yc − Xc β‖² + α ‖β‖₁`
//!
//! The intercept is never penalized and is recovered as `ȳ − x̄ᵀβ`.

mod lasso;
mod linear;
mod svr;

pub(crate) use svr::{fit_svr_with_gram, resolve_kernel};

pub use lasso::{fit_lasso, lasso_coordinate_descent, soft_threshold, LassoFit};
pub use linear::{fit_ols, fit_ridge};
pub use svr::{fit_svr, kernel_matrix, linear_svr_weights, rbf_kernel, solve_svr_dual, SvrDual};

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::scalar::{dot, Scalar};
use crate::{Error, Result};

pub const DEFAULT_LASSO_MAX_ITERS: usize = 10_000;
pub const DEFAULT_LASSO_TOL: f64 = 1e-4;
pub const DEFAULT_SVR_TOL: f64 = 1e-3;
pub const DEFAULT_SVR_MAX_PASSES: usize = 200;
pub const DEFAULT_SVR_TUBE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Ridge,
    Lasso,
    Svr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Ols, ModelKind::Ridge, ModelKind::Lasso, ModelKind::Svr];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::Svr => "svr",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "lr" | "linear" => Ok(ModelKind::Ols),
            "ridge" | "rr" => Ok(ModelKind::Ridge),
            "lasso" | "ls" => Ok(ModelKind::Lasso),
            "svr" => Ok(ModelKind::Svr),
            other => Err(Error::InvalidParam(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "lowercase")]
pub enum Gamma<T> {
    /// `1 / (n_features · var(X))` computed on the training matrix.
    Auto,
    Value(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "lowercase")]
pub enum Kernel<T> {
    Linear,
    Rbf { gamma: Gamma<T> },
}

/// Kernel with `gamma` resolved against the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "lowercase")]
pub enum FittedKernel<T> {
    Linear,
    Rbf { gamma: T },
}

impl<T: Scalar> FittedKernel<T> {
    #[inline]
    pub fn eval(&self, u: &[T], v: &[T]) -> T {
        match *self {
            FittedKernel::Linear => dot(u, v),
            FittedKernel::Rbf { gamma } => svr::rbf_unchecked(u, v, gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelSpec<T> {
    pub kind: ModelKind,
    /// Ridge/lasso penalty strength.
    pub alpha: T,
    /// SVR box constraint.
    pub c: T,
    /// SVR epsilon-insensitive tube half-width.
    pub tube: T,
    pub kernel: Kernel<T>,
    pub lasso_max_iters: usize,
    pub lasso_tol: T,
    pub svr_tol: T,
    pub svr_max_passes: usize,
}

impl<T: Scalar> ModelSpec<T> {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            alpha: T::zero(),
            c: T::one(),
            tube: T::lit(DEFAULT_SVR_TUBE),
            kernel: Kernel::Linear,
            lasso_max_iters: DEFAULT_LASSO_MAX_ITERS,
            lasso_tol: T::lit(DEFAULT_LASSO_TOL),
            svr_tol: T::lit(DEFAULT_SVR_TOL),
            svr_max_passes: DEFAULT_SVR_MAX_PASSES,
        }
    }

    pub fn ols() -> Self {
        Self::new(ModelKind::Ols)
    }

    pub fn ridge(alpha: T) -> Self {
        Self {
            alpha,
            ..Self::new(ModelKind::Ridge)
        }
    }

    pub fn lasso(alpha: T) -> Self {
        Self {
            alpha,
            ..Self::new(ModelKind::Lasso)
        }
    }

    pub fn svr(c: T, kernel: Kernel<T>) -> Self {
        Self {
            c,
            kernel,
            ..Self::new(ModelKind::Svr)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero()) || !self.alpha.is_finite() {
            return Err(Error::InvalidParam(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return Err(Error::InvalidParam(format!("C = {} must be > 0", self.c)));
        }
        if !(self.tube >= T::zero()) || !self.tube.is_finite() {
            return Err(Error::InvalidParam(format!("tube = {} must be >= 0", self.tube)));
        }
        if let Kernel::Rbf { gamma: Gamma::Value(g) } = self.kernel {
            if !(g > T::zero()) {
                return Err(Error::InvalidParam(format!("gamma = {g} must be > 0")));
            }
        }
        if !(self.lasso_tol > T::zero()) || !(self.svr_tol > T::zero()) {
            return Err(Error::InvalidParam("solver tolerances must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "lowercase")]
pub enum Predictor<T> {
    Linear {
        coefficients: Vec<T>,
        intercept: T,
    },
    /// `f(x) = Σ dual_coef_i · K(sv_i, x) + intercept`, with `dual_coef_i = α_i − α*_i`.
    Kernel {
        support_vectors: DenseMatrix<T>,
        dual_coef: Vec<T>,
        intercept: T,
        kernel: FittedKernel<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedModel<T> {
    pub spec: ModelSpec<T>,
    pub n_features: usize,
    pub predictor: Predictor<T>,
    /// False when an iterative solver hit its cap; the best iterate is kept.
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> FittedModel<T> {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn predict(&self, x: &DenseMatrix<T>) -> Result<Vec<T>> {
        predict(self, x)
    }

    /// Slopes and intercept of a linear predictor.
    pub fn linear_coefficients(&self) -> Option<(&[T], T)> {
        match &self.predictor {
            Predictor::Linear {
                coefficients,
                intercept,
            } => Some((coefficients, *intercept)),
            Predictor::Kernel { .. } => None,
        }
    }
}

pub(crate) fn check_xy<T: Scalar>(x: &DenseMatrix<T>, y: &[T]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "design rows vs targets",
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("training set"));
    }
    crate::scalar::ensure_finite(y)
}

/// Fits the regressor described by `spec`.
pub fn fit<T: Scalar>(x: &DenseMatrix<T>, y: &[T], spec: &ModelSpec<T>) -> Result<FittedModel<T>> {
    spec.validate()?;
    match spec.kind {
        ModelKind::Ols => fit_ols(x, y),
        ModelKind::Ridge => fit_ridge(x, y, spec.alpha),
        ModelKind::Lasso => fit_lasso(x, y, spec.alpha, spec.lasso_max_iters, spec.lasso_tol),
        ModelKind::Svr => fit_svr(x, y, spec),
    }
}

pub fn predict<T: Scalar>(model: &FittedModel<T>, x: &DenseMatrix<T>) -> Result<Vec<T>> {
    if x.cols() != model.n_features {
        return Err(Error::DimensionMismatch {
            context: "prediction features",
            expected: model.n_features,
            actual: x.cols(),
        });
    }
    match &model.predictor {
        Predictor::Linear {
            coefficients,
            intercept,
        } => Ok(x.row_iter().map(|r| *intercept + dot(r, coefficients)).collect()),
        Predictor::Kernel {
            support_vectors,
            dual_coef,
            intercept,
            kernel,
        } => Ok(x
            .row_iter()
            .map(|r| {
                support_vectors
                    .row_iter()
                    .zip(dual_coef)
                    .fold(*intercept, |acc, (sv, &a)| acc + a * kernel.eval(sv, r))
            })
            .collect()),
    }
}

/// Column-centred copy of `x` and `y` together with the means removed.
pub(crate) struct Centered<T> {
    pub x: DenseMatrix<T>,
    pub y: Vec<T>,
    pub x_mean: Vec<T>,
    pub y_mean: T,
}

pub(crate) fn center<T: Scalar>(x: &DenseMatrix<T>, y: &[T]) -> Centered<T> {
    let x_mean = x.column_means();
    let y_mean = crate::scalar::mean(y);
    Centered {
        x: x.centered(&x_mean),
        y: y.iter().map(|&v| v - y_mean).collect(),
        x_mean,
        y_mean,
    }
}

pub(crate) fn linear_model<T: Scalar>(
    spec: ModelSpec<T>,
    centered: &Centered<T>,
    coefficients: Vec<T>,
    converged: bool,
    iterations: usize,
) -> FittedModel<T> {
    let intercept = centered.y_mean - dot(&centered.x_mean, &coefficients);
    FittedModel {
        spec,
        n_features: coefficients.len(),
        predictor: Predictor::Linear {
            coefficients,
            intercept,
        },
        converged,
        iterations,
    }
}
