//! Epsilon-insensitive support vector regression.
//!
//! The dual is written over `2l` variables `a = [α; α*]` with signs
//! `s = [+1; −1]`:
//!
//! ```text
//! min ½ aᵀQa + pᵀa   s.t.  0 ≤ a_t ≤ C,  Σ s_t a_t = 0
//! Q_ts = s_t s_s K(x_t, x_s),  p = [ε − y; ε + y]
//! ```
//!
//! and solved by SMO with second-order working-set selection.

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::{Error, Result};

use super::{check_xy, FittedKernel, FittedModel, Gamma, Kernel, ModelSpec, Predictor};

const TAU: f64 = 1e-12;

#[inline]
pub(crate) fn rbf_unchecked<T: Scalar>(u: &[T], v: &[T], gamma: T) -> T {
    let d2 = u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| {
        let d = a - b;
        acc + d * d
    });
    (-gamma * d2).exp()
}

/// `exp(−γ ‖u − v‖²)`.
pub fn rbf_kernel<T: Scalar>(u: &[T], v: &[T], gamma: T) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            context: "rbf kernel arguments",
            expected: u.len(),
            actual: v.len(),
        });
    }
    if !(gamma > T::zero()) {
        return Err(Error::InvalidParam(format!("gamma = {gamma} must be > 0")));
    }
    Ok(rbf_unchecked(u, v, gamma))
}

/// Gram matrix `K_ij = k(x_i, x_j)` of the rows of `x`.
pub fn kernel_matrix<T: Scalar>(x: &DenseMatrix<T>, kernel: &FittedKernel<T>) -> DenseMatrix<T> {
    let l = x.rows();
    let mut data = vec![T::zero(); l * l];
    for i in 0..l {
        let xi = x.row(i);
        for j in 0..=i {
            let v = kernel.eval(xi, x.row(j));
            data[i * l + j] = v;
            data[j * l + i] = v;
        }
    }
    DenseMatrix::from_raw(l, l, data)
}

pub(crate) fn resolve_kernel<T: Scalar>(kernel: &Kernel<T>, x: &DenseMatrix<T>) -> FittedKernel<T> {
    match *kernel {
        Kernel::Linear => FittedKernel::Linear,
        Kernel::Rbf { gamma: Gamma::Value(g) } => FittedKernel::Rbf { gamma: g },
        Kernel::Rbf { gamma: Gamma::Auto } => {
            let vals = x.as_slice();
            let var = if vals.is_empty() {
                T::zero()
            } else {
                let mu = crate::scalar::mean(vals);
                vals.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / T::lit(vals.len() as f64)
            };
            let denom = T::lit(x.cols() as f64) * var;
            let gamma = if denom > T::zero() { T::one() / denom } else { T::one() };
            FittedKernel::Rbf { gamma }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrDual<T> {
    pub alpha: Vec<T>,
    pub alpha_star: Vec<T>,
    /// Bias of `f(x) = Σ (α_i − α*_i) K(x_i, x) + intercept`.
    pub intercept: T,
    /// Value of the minimized dual objective.
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO on the SVR dual for a precomputed kernel matrix.
///
/// Stops when the maximal KKT violation `m(a) − M(a)` drops below `tol` or
/// after `max_iter` pair updates.
pub fn solve_svr_dual<T: Scalar>(
    k: &DenseMatrix<T>,
    y: &[T],
    c: T,
    tube: T,
    tol: T,
    max_iter: usize,
) -> Result<SvrDual<T>> {
    let l = y.len();
    if k.rows() != l || k.cols() != l {
        return Err(Error::DimensionMismatch {
            context: "kernel matrix vs targets",
            expected: l,
            actual: k.rows(),
        });
    }
    if l == 0 {
        return Err(Error::Empty("training set"));
    }
    if !(c > T::zero()) || !(tube >= T::zero()) || !(tol > T::zero()) {
        return Err(Error::InvalidParam(format!("invalid SVR parameters C={c}, tube={tube}, tol={tol}")));
    }

    let n2 = 2 * l;
    let sign = |t: usize| if t < l { T::one() } else { -T::one() };
    let tau = T::lit(TAU);
    let kd = k.as_slice();
    let qd: Vec<T> = (0..n2).map(|t| kd[(t % l) * l + t % l]).collect();
    let mut a = vec![T::zero(); n2];
    let mut g: Vec<T> = (0..n2)
        .map(|t| if t < l { tube - y[t] } else { tube + y[t - l] })
        .collect();
    let p = g.clone();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // First index: maximal violation among the feasible up-directions.
        let mut gmax = T::neg_infinity();
        let mut i_sel = None;
        for t in 0..n2 {
            if t < l {
                if a[t] < c && -g[t] >= gmax {
                    gmax = -g[t];
                    i_sel = Some(t);
                }
            } else if a[t] > T::zero() && g[t] >= gmax {
                gmax = g[t];
                i_sel = Some(t);
            }
        }
        // Second index: largest second-order decrease paired with i.
        let mut gmax2 = T::neg_infinity();
        let mut j_sel = None;
        let mut best = T::infinity();
        if let Some(i) = i_sel {
            let si = sign(i);
            let ki = &kd[(i % l) * l..(i % l + 1) * l];
            for t in 0..n2 {
                let qit = si * sign(t) * ki[t % l];
                if t < l {
                    if a[t] > T::zero() {
                        let diff = gmax + g[t];
                        gmax2 = gmax2.max(g[t]);
                        if diff > T::zero() {
                            let quad = qd[i] + qd[t] - T::lit(2.0) * si * qit;
                            let quad = if quad > T::zero() { quad } else { tau };
                            let obj = -(diff * diff) / quad;
                            if obj <= best {
                                best = obj;
                                j_sel = Some(t);
                            }
                        }
                    }
                } else if a[t] < c {
                    let diff = gmax - g[t];
                    gmax2 = gmax2.max(-g[t]);
                    if diff > T::zero() {
                        let quad = qd[i] + qd[t] + T::lit(2.0) * si * qit;
                        let quad = if quad > T::zero() { quad } else { tau };
                        let obj = -(diff * diff) / quad;
                        if obj <= best {
                            best = obj;
                            j_sel = Some(t);
                        }
                    }
                }
            }
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gmax + gmax2 >= tol => (i, j),
            _ => {
                converged = true;
                break;
            }
        };
        iterations += 1;

        let (si, sj) = (sign(i), sign(j));
        let kij = kd[(i % l) * l + j % l];
        let qij = si * sj * kij;
        let (old_i, old_j) = (a[i], a[j]);
        if si != sj {
            let quad = qd[i] + qd[j] + T::lit(2.0) * qij;
            let quad = if quad > T::zero() { quad } else { tau };
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] = a[i] + delta;
            a[j] = a[j] + delta;
            if diff > T::zero() {
                if a[j] < T::zero() {
                    a[j] = T::zero();
                    a[i] = diff;
                }
            } else if a[i] < T::zero() {
                a[i] = T::zero();
                a[j] = -diff;
            }
            if diff > T::zero() {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let quad = qd[i] + qd[j] - T::lit(2.0) * qij;
            let quad = if quad > T::zero() { quad } else { tau };
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] = a[i] - delta;
            a[j] = a[j] + delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < T::zero() {
                a[j] = T::zero();
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < T::zero() {
                a[i] = T::zero();
                a[j] = sum;
            }
        }

        let di = si * (a[i] - old_i);
        let dj = sj * (a[j] - old_j);
        let ki = &kd[(i % l) * l..(i % l + 1) * l];
        let kj = &kd[(j % l) * l..(j % l + 1) * l];
        for s in 0..l {
            let v = di * ki[s] + dj * kj[s];
            g[s] = g[s] + v;
            g[s + l] = g[s + l] - v;
        }
    }
    if !converged {
        log::debug!("svr: iteration cap {max_iter} reached");
    }

    // Bias from the free variables, or the midpoint of the feasible interval.
    let mut ub = T::infinity();
    let mut lb = T::neg_infinity();
    let mut free = 0usize;
    let mut free_sum = T::zero();
    for t in 0..n2 {
        let yg = sign(t) * g[t];
        let at_upper = a[t] >= c;
        let at_lower = a[t] <= T::zero();
        if at_upper {
            if t >= l {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if t < l {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum = free_sum + yg;
        }
    }
    let rho = if free > 0 {
        free_sum / T::lit(free as f64)
    } else {
        (ub + lb) / T::lit(2.0)
    };
    let objective = (0..n2).fold(T::zero(), |acc, t| acc + a[t] * (g[t] + p[t])) / T::lit(2.0);
    let alpha_star = a.split_off(l);
    Ok(SvrDual {
        alpha: a,
        alpha_star,
        intercept: -rho,
        objective,
        iterations,
        converged,
    })
}

pub fn fit_svr<T: Scalar>(x: &DenseMatrix<T>, y: &[T], spec: &ModelSpec<T>) -> Result<FittedModel<T>> {
    check_xy(x, y)?;
    spec.validate()?;
    let kernel = resolve_kernel(&spec.kernel, x);
    let k = kernel_matrix(x, &kernel);
    fit_svr_with_gram(x, y, spec, kernel, &k)
}

/// SVR fit reusing a Gram matrix already computed for `x` under `kernel`.
pub(crate) fn fit_svr_with_gram<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &[T],
    spec: &ModelSpec<T>,
    kernel: FittedKernel<T>,
    k: &DenseMatrix<T>,
) -> Result<FittedModel<T>> {
    let max_iter = spec.svr_max_passes.saturating_mul(2 * y.len()).max(1);
    let dual = solve_svr_dual(k, y, spec.c, spec.tube, spec.svr_tol, max_iter)?;

    let mut sv_rows = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, (&a, &b)) in dual.alpha.iter().zip(&dual.alpha_star).enumerate() {
        let coef = a - b;
        if coef != T::zero() {
            sv_rows.push(i);
            dual_coef.push(coef);
        }
    }
    Ok(FittedModel {
        spec: spec.clone(),
        n_features: x.cols(),
        predictor: Predictor::Kernel {
            support_vectors: x.select_rows(&sv_rows),
            dual_coef,
            intercept: dual.intercept,
            kernel,
        },
        converged: dual.converged,
        iterations: dual.iterations,
    })
}

/// Slopes of a linear-kernel SVR, `w = Σ (α_i − α*_i) x_i`.
pub fn linear_svr_weights<T: Scalar>(model: &FittedModel<T>) -> Option<Vec<T>> {
    match &model.predictor {
        Predictor::Kernel {
            support_vectors,
            dual_coef,
            kernel: FittedKernel::Linear,
            ..
        } => {
            let mut w = vec![T::zero(); model.n_features];
            for (sv, &c) in support_vectors.row_iter().zip(dual_coef) {
                for (wj, &v) in w.iter_mut().zip(sv) {
                    *wj = *wj + c * v;
                }
            }
            Some(w)
        }
        _ => None,
    }
}
