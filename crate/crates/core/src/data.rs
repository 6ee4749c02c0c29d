//! Datasets: CSV ingestion, min-max normalization, train/test/fold splits
//! and the seeded `y = m·x + c + ε` generator.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: DenseMatrix<T>,
    /// Targets in original units; never normalized.
    pub y: Vec<T>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(x: DenseMatrix<T>, y: Vec<T>, feature_names: Vec<String>, target_name: impl Into<String>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows vs targets",
                expected: x.rows(),
                actual: y.len(),
            });
        }
        if feature_names.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                context: "dataset feature names",
                expected: x.cols(),
                actual: feature_names.len(),
            });
        }
        crate::scalar::ensure_finite(&y)?;
        Ok(Self {
            x,
            y,
            feature_names,
            target_name: target_name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Writes the dataset as CSV with a header row (features, then target).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.feature_names.clone();
        header.push(self.target_name.clone());
        w.write_record(&header)?;
        for (row, y) in self.x.row_iter().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
        crate::report::write_atomic(path, &bytes)
    }
}

/// Result of [`load_csv`]: the parsed dataset plus bookkeeping about what was discarded.
#[derive(Debug, Clone)]
pub struct CsvLoad<T> {
    pub dataset: Dataset<T>,
    pub dropped_rows: usize,
    pub dropped_columns: Vec<String>,
}

/// Reads a headed, comma-separated file. Feature columns whose non-empty cells
/// are mostly non-numeric are discarded as categorical; remaining rows with a
/// missing or unparseable cell are dropped.
pub fn load_csv<T: Scalar>(path: &Path, target_column: &str) -> Result<CsvLoad<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_string()))?;

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }

    let parse = |s: &str| -> Option<f64> { s.parse::<f64>().ok().filter(|v| v.is_finite()) };

    let mut keep = Vec::new();
    let mut dropped_columns = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        let (mut ok, mut non_empty) = (0usize, 0usize);
        for r in &records {
            if let Some(cell) = r.get(j).filter(|c| !c.is_empty()) {
                non_empty += 1;
                if parse(cell).is_some() {
                    ok += 1;
                }
            }
        }
        if ok > 0 && 2 * ok >= non_empty {
            keep.push(j);
        } else {
            dropped_columns.push(name.clone());
        }
    }
    if !dropped_columns.is_empty() {
        log::warn!("{}: ignoring non-numeric columns {:?}", path.display(), dropped_columns);
    }

    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut dropped_rows = 0usize;
    'rows: for r in &records {
        let target = match r.get(target_idx).and_then(|c| parse(c)) {
            Some(v) => v,
            None => {
                dropped_rows += 1;
                continue;
            }
        };
        let mut row = Vec::with_capacity(keep.len());
        for &j in &keep {
            match r.get(j).and_then(|c| parse(c)) {
                Some(v) => row.push(T::lit(v)),
                None => {
                    dropped_rows += 1;
                    continue 'rows;
                }
            }
        }
        data.extend(row);
        y.push(T::lit(target));
    }
    if dropped_rows > 0 {
        log::warn!("{}: dropped {} rows with missing or non-numeric values", path.display(), dropped_rows);
    }
    if y.is_empty() {
        return Err(Error::NoUsableRows(path.to_path_buf()));
    }
    let x = DenseMatrix::new(y.len(), keep.len(), data)?;
    let names = keep.iter().map(|&j| headers[j].clone()).collect();
    Ok(CsvLoad {
        dataset: Dataset::new(x, y, names, target_column)?,
        dropped_rows,
        dropped_columns,
    })
}

/// Per-column minimum and maximum of a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormStats<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

pub fn fit_normalizer<T: Scalar>(x: &DenseMatrix<T>) -> Result<NormStats<T>> {
    if x.rows() == 0 {
        return Err(Error::Empty("normalizer input"));
    }
    let mut min = x.row(0).to_vec();
    let mut max = min.clone();
    for row in x.row_iter().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(NormStats { min, max })
}

/// `(x - min) / (max - min)` clipped to `[0,1]`; constant columns map to 0.
pub fn apply_normalizer<T: Scalar>(x: &DenseMatrix<T>, s: &NormStats<T>) -> Result<DenseMatrix<T>> {
    if x.cols() != s.min.len() {
        return Err(Error::DimensionMismatch {
            context: "normalizer columns",
            expected: s.min.len(),
            actual: x.cols(),
        });
    }
    let cols = x.cols();
    let data = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let j = k % cols;
            let range = s.max[j] - s.min[j];
            if range > T::zero() {
                ((v - s.min[j]) / range).max(T::zero()).min(T::one())
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(DenseMatrix::from_raw(x.rows(), cols, data))
}

/// Deterministic shuffled train/test split plus a k-fold partition of the training part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Partition of `train`; each fold sorted ascending.
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitPlan {
    /// Fold id of every sample, `None` for test samples.
    pub fn fold_assignment(&self, m: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; m];
        for (k, fold) in self.folds.iter().enumerate() {
            for &i in fold {
                out[i] = Some(k);
            }
        }
        out
    }

    /// Training indices outside fold `k`, ascending.
    pub fn fold_train(&self, k: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }
}

pub fn make_split(m: usize, test_fraction: f64, seed: u64, k: usize) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {k}")));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParam(format!("test fraction {test_fraction} not in [0,1)")));
    }
    let n_test = (m as f64 * test_fraction).round() as usize;
    if m < k || m - n_test < k {
        return Err(Error::TooFewSamples { samples: m, folds: k });
    }
    let mut perm: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let (test, train_order) = perm.split_at(n_test);
    let mut folds = vec![Vec::new(); k];
    for (pos, &i) in train_order.iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    let mut train = train_order.to_vec();
    train.sort_unstable();
    let mut test = test.to_vec();
    test.sort_unstable();
    Ok(SplitPlan {
        train,
        test,
        folds,
        seed,
    })
}

/// Parameters of a generated `y = slope·x + intercept + ε` dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Variance of the Gaussian noise.
    pub noise_variance: f64,
    pub seed: u64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl SynthSpec {
    pub fn new(n: usize, slope: f64, noise_variance: f64, seed: u64) -> Self {
        Self {
            n,
            slope,
            intercept: 0.0,
            noise_variance,
            seed,
            x_lo: -10.0,
            x_hi: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParam(format!("synthetic size {} < 2", self.n)));
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidParam(format!(
                "noise variance {} must be positive",
                self.noise_variance
            )));
        }
        if !(self.x_lo < self.x_hi) || !self.slope.is_finite() || !self.intercept.is_finite() {
            return Err(Error::InvalidParam("invalid slope, intercept or x range".into()));
        }
        Ok(())
    }

    pub fn dataset_id(&self) -> String {
        format!(
            "synth_n{}_m{}_c{}_var{}_seed{}",
            self.n, self.slope, self.intercept, self.noise_variance, self.seed
        )
    }

    /// The 24 generated datasets: sizes {10,50,100,1000} × noise variance
    /// {5,1,0.1} × slope {2,-2}, intercept 0.
    pub fn experiment_grid(seed: u64) -> Vec<SynthSpec> {
        let mut out = Vec::with_capacity(24);
        for n in [10, 50, 100, 1000] {
            for var in [5.0, 1.0, 0.1] {
                for slope in [2.0, -2.0] {
                    out.push(SynthSpec::new(n, slope, var, seed));
                }
            }
        }
        out
    }
}

/// Draws `x` uniformly from the open interval `(x_lo, x_hi)`, then Gaussian noise.
pub fn generate_synthetic<T: Scalar>(spec: &SynthSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ux = Uniform::new(spec.x_lo, spec.x_hi);
    let xs: Vec<f64> = (0..spec.n)
        .map(|_| loop {
            let v = ux.sample(&mut rng);
            if v > spec.x_lo {
                break v;
            }
        })
        .collect();
    let noise = Normal::new(0.0, spec.noise_variance.sqrt())
        .map_err(|e| Error::InvalidParam(e.to_string()))?;
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| spec.slope * x + spec.intercept + noise.sample(&mut rng))
        .collect();
    let x = DenseMatrix::new(spec.n, 1, xs.iter().map(|&v| T::lit(v)).collect())?;
    Dataset::new(x, ys.into_iter().map(T::lit).collect(), vec!["x".into()], "y")
}
