//! Error metrics, the least-squares noise floor and augmentation boosts.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::linalg::{pseudo_inverse, DEFAULT_PINV_TOL};
use crate::scalar::{mean, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Metrics<T> {
    pub r2: T,
    pub mse: T,
    pub mae: T,
    pub n: usize,
}

/// R², MSE and MAE of `y_pred` against `y_true`.
///
/// R² is `1 − SS_res / SS_tot`; when `y_true` is constant it is defined as 0.
pub fn compute_metrics<T: Scalar>(y_true: &[T], y_pred: &[T]) -> Result<Metrics<T>> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            context: "metrics inputs",
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("metrics inputs"));
    }
    let n = T::lit(y_true.len() as f64);
    let ybar = mean(y_true);
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    let mut abs = T::zero();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        ss_res = ss_res + e * e;
        abs = abs + e.abs();
        ss_tot = ss_tot + (t - ybar) * (t - ybar);
    }
    let r2 = if ss_tot > T::zero() {
        T::one() - ss_res / ss_tot
    } else {
        T::zero()
    };
    Ok(Metrics {
        r2,
        mse: ss_res / n,
        mae: abs / n,
        n: y_true.len(),
    })
}

/// Mean squared residual of the least-squares fit (with intercept) of the
/// whole dataset, computed through the pseudo-inverse.
pub fn mmse<T: Scalar>(dataset: &Dataset<T>) -> Result<T> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let a = dataset.x.with_intercept_column();
    let pinv = pseudo_inverse(&a, T::lit(DEFAULT_PINV_TOL))?;
    let w = pinv.matvec(&dataset.y)?;
    let fitted = a.matvec(&w)?;
    let sse = dataset
        .y
        .iter()
        .zip(&fitted)
        .fold(T::zero(), |acc, (&t, &p)| acc + (t - p) * (t - p));
    Ok(sse / T::lit(dataset.len() as f64))
}

/// Relative improvement `(augmented − baseline) / baseline`; undefined for a zero baseline.
pub fn boost<T: Scalar>(augmented: T, baseline: T) -> Option<T> {
    if baseline == T::zero() || !baseline.is_finite() || !augmented.is_finite() {
        None
    } else {
        Some((augmented - baseline) / baseline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBoost {
    pub dataset_id: String,
    pub baseline: f64,
    pub augmented: f64,
    /// `None` when the baseline score is not positive.
    pub boost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostSummary {
    pub per_dataset: Vec<DatasetBoost>,
    pub improved_count: usize,
    /// Mean boost over the improved datasets only.
    pub average_boost_over_improved: Option<f64>,
}

/// Summarizes `(dataset_id, baseline_score, augmented_score)` triples.
/// Datasets whose baseline score is not positive are excluded.
pub fn summarize_boosts<I, S>(pairs: I) -> BoostSummary
where
    I: IntoIterator<Item = (S, f64, f64)>,
    S: Into<String>,
{
    let per_dataset: Vec<DatasetBoost> = pairs
        .into_iter()
        .map(|(id, baseline, augmented)| DatasetBoost {
            dataset_id: id.into(),
            baseline,
            augmented,
            boost: if baseline > 0.0 { boost(augmented, baseline) } else { None },
        })
        .collect();
    let improved: Vec<f64> = per_dataset.iter().filter_map(|d| d.boost).filter(|&b| b > 0.0).collect();
    let average_boost_over_improved = if improved.is_empty() {
        None
    } else {
        Some(improved.iter().sum::<f64>() / improved.len() as f64)
    };
    BoostSummary {
        improved_count: improved.len(),
        average_boost_over_improved,
        per_dataset,
    }
}
