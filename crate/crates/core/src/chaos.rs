//! Skew-tent-map neurons and the Tracemean feature.
//!
//! A neuron starts at the initial activity `q` and iterates the skew tent
//! map until its value comes within `eps_stim` of the stimulus (a normalized
//! feature value). The visited values form the neural trace; its arithmetic
//! mean is the Tracemean.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const DEFAULT_SKEW: f64 = 0.499;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

static NEURON_RUNS: AtomicU64 = AtomicU64::new(0);

/// Number of neuron trajectories started in this process so far.
pub fn neuron_runs() -> u64 {
    NEURON_RUNS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChaosParams<T> {
    /// Skew (peak location) of the tent map.
    pub b: T,
    /// Initial neural activity.
    pub q: T,
    /// Half-width of the stopping neighbourhood around the stimulus.
    pub eps_stim: T,
    /// Maximum number of values in a trace.
    pub max_iters: usize,
}

impl<T: Scalar> ChaosParams<T> {
    /// Default skew and iteration cap with the given `q` and `eps_stim`.
    pub fn new(q: T, eps_stim: T) -> Result<Self> {
        let p = Self {
            b: T::lit(DEFAULT_SKEW),
            q,
            eps_stim,
            max_iters: DEFAULT_MAX_ITERS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: T| v > T::zero() && v < T::one();
        if !open_unit(self.b) {
            return Err(Error::InvalidParam(format!("skew b = {} not in (0,1)", self.b)));
        }
        if !open_unit(self.q) {
            return Err(Error::InvalidParam(format!("q = {} not in (0,1)", self.q)));
        }
        if !(self.eps_stim > T::zero()) || !self.eps_stim.is_finite() {
            return Err(Error::InvalidParam(format!(
                "eps_stim = {} must be positive",
                self.eps_stim
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    NeighborhoodHit,
    IterCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub values: Vec<T>,
    pub terminated_by: Termination,
}

#[inline]
fn step_unchecked<T: Scalar>(x: T, b: T) -> T {
    if x < b {
        x / b
    } else {
        (T::one() - x) / (T::one() - b)
    }
}

/// One application of the skew tent map `x/b` on `[0,b)`, `(1-x)/(1-b)` on `[b,1]`.
pub fn skew_tent_step<T: Scalar>(x: T, b: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::OutOfDomain {
            what: "skew tent map input",
            value: x.to_f64_lossy(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(b > T::zero() && b < T::one()) {
        return Err(Error::InvalidParam(format!("skew b = {b} not in (0,1)")));
    }
    Ok(step_unchecked(x, b))
}

fn check_stimulus<T: Scalar>(stimulus: T) -> Result<()> {
    if stimulus >= T::zero() && stimulus <= T::one() {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            what: "stimulus",
            value: stimulus.to_f64_lossy(),
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// Iterates the neuron from `q`, keeping every visited value, until a value
/// lands strictly inside the stimulus neighbourhood or the cap is reached.
pub fn generate_trace<T: Scalar>(stimulus: T, p: &ChaosParams<T>) -> Result<Trace<T>> {
    check_stimulus(stimulus)?;
    p.validate()?;
    NEURON_RUNS.fetch_add(1, Ordering::Relaxed);
    let mut values = Vec::new();
    let mut x = p.q;
    loop {
        values.push(x);
        if (x - stimulus).abs() < p.eps_stim {
            return Ok(Trace {
                values,
                terminated_by: Termination::NeighborhoodHit,
            });
        }
        if values.len() >= p.max_iters {
            return Ok(Trace {
                values,
                terminated_by: Termination::IterCap,
            });
        }
        x = step_unchecked(x, p.b);
    }
}

/// Arithmetic mean of the trace values.
pub fn tracemean<T: Scalar>(t: &Trace<T>) -> T {
    let mut sum = T::zero();
    for &v in &t.values {
        sum = sum + v;
    }
    sum / T::lit(t.values.len() as f64)
}

/// Tracemean of the trace for `stimulus` without materializing the trace.
/// Produces the same bits as `tracemean(&generate_trace(..))`.
pub fn stimulus_tracemean<T: Scalar>(stimulus: T, p: &ChaosParams<T>) -> Result<T> {
    check_stimulus(stimulus)?;
    p.validate()?;
    NEURON_RUNS.fetch_add(1, Ordering::Relaxed);
    Ok(tracemean_unchecked(stimulus, p))
}

#[inline]
fn tracemean_unchecked<T: Scalar>(stimulus: T, p: &ChaosParams<T>) -> T {
    let mut x = p.q;
    let mut sum = T::zero();
    let mut len = 0usize;
    loop {
        sum = sum + x;
        len += 1;
        if (x - stimulus).abs() < p.eps_stim || len >= p.max_iters {
            return sum / T::lit(len as f64);
        }
        x = step_unchecked(x, p.b);
    }
}

/// Tracemean of every entry of `z` (which must lie in `[0,1]`).
pub fn tracemean_features<T: Scalar>(z: &DenseMatrix<T>, p: &ChaosParams<T>) -> Result<DenseMatrix<T>> {
    p.validate()?;
    for &v in z.as_slice() {
        check_stimulus(v)?;
    }
    NEURON_RUNS.fetch_add(z.as_slice().len() as u64, Ordering::Relaxed);
    let data = z
        .as_slice()
        .iter()
        .map(|&s| tracemean_unchecked(s, p))
        .collect();
    Ok(DenseMatrix::from_raw(z.rows(), z.cols(), data))
}

/// `[Z | TM(Z)]`: the normalized features followed by their Tracemeans (`m × 2n`).
pub fn augment<T: Scalar>(z: &DenseMatrix<T>, p: &ChaosParams<T>) -> Result<DenseMatrix<T>> {
    let tm = tracemean_features(z, p)?;
    z.hstack(&tm)
}
