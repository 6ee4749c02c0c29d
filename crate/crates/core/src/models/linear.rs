use crate::linalg::{cholesky_solve, solve_least_squares, svd, DenseMatrix, DEFAULT_PINV_TOL};
use crate::scalar::Scalar;
use crate::{Error, Result};

use super::{center, check_xy, linear_model, FittedModel, ModelSpec};

/// Ordinary least squares with an unpenalized intercept.
pub fn fit_ols<T: Scalar>(x: &DenseMatrix<T>, y: &[T]) -> Result<FittedModel<T>> {
    check_xy(x, y)?;
    let c = center(x, y);
    let beta = if x.cols() == 0 {
        Vec::new()
    } else {
        solve_least_squares(&c.x, &c.y)?
    };
    Ok(linear_model(ModelSpec::ols(), &c, beta, true, 1))
}

/// Ridge regression minimizing `‖yc − Xc β‖² + α‖β‖²` on centred data.
pub fn fit_ridge<T: Scalar>(x: &DenseMatrix<T>, y: &[T], alpha: T) -> Result<FittedModel<T>> {
    check_xy(x, y)?;
    if !(alpha >= T::zero()) {
        return Err(Error::InvalidParam(format!("alpha = {alpha} must be >= 0")));
    }
    let c = center(x, y);
    let n = x.cols();
    let beta = if n == 0 {
        Vec::new()
    } else {
        let mut a = c.x.gram();
        let rhs = c.x.t_matvec(&c.y)?;
        for j in 0..n {
            a.set(j, j, a.get(j, j) + alpha);
        }
        match cholesky_solve(&a, &rhs) {
            Ok(b) => b,
            Err(Error::NotPositiveDefinite { .. }) => ridge_via_svd(&c.x, &c.y, alpha)?,
            Err(e) => return Err(e),
        }
    };
    Ok(linear_model(ModelSpec::ridge(alpha), &c, beta, true, 1))
}

/// `β = V diag(σ / (σ² + α)) Uᵀ y`; reduces to the pseudo-inverse solution at α = 0.
fn ridge_via_svd<T: Scalar>(x: &DenseMatrix<T>, y: &[T], alpha: T) -> Result<Vec<T>> {
    let d = svd(x)?;
    let smax = d.singular_values.iter().fold(T::zero(), |m, &s| m.max(s));
    let cutoff = T::lit(DEFAULT_PINV_TOL) * smax;
    let uty = d.u.t_matvec(y)?;
    let n = x.cols();
    let mut beta = vec![T::zero(); n];
    for (k, &s) in d.singular_values.iter().enumerate() {
        if s <= cutoff || s == T::zero() {
            continue;
        }
        let w = s / (s * s + alpha) * uty[k];
        for (i, b) in beta.iter_mut().enumerate() {
            *b = *b + d.v.get(i, k) * w;
        }
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (DenseMatrix<f64>, Vec<f64>) {
        let x = DenseMatrix::from_rows(&[vec![-1.0], vec![0.5], vec![2.0], vec![3.0]]).unwrap();
        let y = x.as_slice().iter().map(|v| 2.0 * v).collect();
        (x, y)
    }

    #[test]
    fn ols_exact_line() {
        let (x, y) = line();
        let m = fit_ols(&x, &y).unwrap();
        let (b, b0) = m.linear_coefficients().unwrap();
        assert!((b[0] - 2.0).abs() < 1e-10 && b0.abs() < 1e-10);
    }

    #[test]
    fn ols_constant_target() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 1.0], vec![4.0, 0.0]]).unwrap();
        let m = fit_ols(&x, &[7.0f64, 7.0, 7.0]).unwrap();
        let (b, b0) = m.linear_coefficients().unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-10));
        assert!((b0 - 7.0).abs() < 1e-10);
    }

    #[test]
    fn ols_single_row_and_no_features() {
        let x = DenseMatrix::from_rows(&[vec![3.0f64]]).unwrap();
        let m = fit_ols(&x, &[4.0]).unwrap();
        assert!((m.predict(&x).unwrap()[0] - 4.0).abs() < 1e-12);
        let empty = DenseMatrix::<f64>::zeros(3, 0);
        let m = fit_ols(&empty, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.linear_coefficients().unwrap().1, 2.0);
    }

    #[test]
    fn ridge_zero_alpha_is_ols() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.2], vec![2.0, -1.0], vec![0.0, 3.0], vec![5.0, 1.0]])
            .unwrap();
        let y = [1.0f64, 0.0, 4.0, 2.0];
        let a = fit_ols(&x, &y).unwrap();
        let b = fit_ridge(&x, &y, 0.0).unwrap();
        let (ca, ia) = a.linear_coefficients().unwrap();
        let (cb, ib) = b.linear_coefficients().unwrap();
        for (p, q) in ca.iter().zip(cb) {
            assert!((p - q).abs() < 1e-8);
        }
        assert!((ia - ib).abs() < 1e-8);
    }

    #[test]
    fn ridge_huge_alpha_predicts_mean() {
        let (x, y) = line();
        let m = fit_ridge(&x, &y, 1e9).unwrap();
        let (b, b0) = m.linear_coefficients().unwrap();
        assert!(b[0].abs() < 1e-6);
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        assert!((b0 - ybar).abs() < 1e-5);
    }

    #[test]
    fn ridge_collinear_zero_alpha_uses_svd() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let m = fit_ridge(&x, &[2.0f64, 4.0, 6.0], 0.0).unwrap();
        let (b, _) = m.linear_coefficients().unwrap();
        assert!((b[0] - 1.0).abs() < 1e-10 && (b[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ridge_rejects_negative_alpha() {
        let (x, y) = line();
        assert!(fit_ridge(&x, &y, -0.5).is_err());
    }
}
