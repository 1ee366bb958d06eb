//! Datasets, centering, variation explained and seeded train/test/fold splits.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::linalg::{column_means, frob2, select_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Uncentered data as read from disk. Classification responses are stored
/// one-hot.
#[derive(Debug, Clone)]
pub struct RawData {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub task: Task,
    pub feature_names: Option<Vec<String>>,
    /// Response column names (regression) or class labels (classification).
    pub response_names: Option<Vec<String>>,
}

impl RawData {
    /// Build raw data from a predictor matrix and a response matrix.
    ///
    /// For classification `raw_y` is either a single column of nonnegative
    /// integer labels (one-hot encoded with `max + 1` classes) or an already
    /// one-hot `n×q` matrix.
    pub fn new(raw_x: DMatrix<f64>, raw_y: DMatrix<f64>, task: Task) -> Result<Self> {
        if raw_x.nrows() != raw_y.nrows() {
            return Err(SpcaError::Dimension(format!(
                "X has {} rows but Y has {}",
                raw_x.nrows(),
                raw_y.nrows()
            )));
        }
        let y = match task {
            Task::Regression => raw_y,
            Task::Classification if raw_y.ncols() == 1 => {
                let labels = raw_y
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if *v >= 0.0 && v.fract() == 0.0 {
                            Ok(*v as usize)
                        } else {
                            Err(SpcaError::Data(format!(
                                "row {i}: class label {v} is not a nonnegative integer"
                            )))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let q = labels.iter().max().map_or(1, |m| m + 1);
                one_hot(&labels, q)?
            }
            Task::Classification => {
                check_one_hot(&raw_y)?;
                raw_y
            }
        };
        let data = RawData {
            x: raw_x,
            y,
            task,
            feature_names: None,
            response_names: None,
        };
        data.check_shape()?;
        Ok(data)
    }

    pub fn classification(raw_x: DMatrix<f64>, labels: &[usize], n_classes: usize) -> Result<Self> {
        let y = one_hot(labels, n_classes)?;
        RawData::new(raw_x, y, Task::Classification)
    }

    fn check_shape(&self) -> Result<()> {
        if self.x.nrows() < 2 {
            return Err(SpcaError::Data(format!(
                "need at least 2 samples, got {}",
                self.x.nrows()
            )));
        }
        if self.x.ncols() == 0 || self.y.ncols() == 0 {
            return Err(SpcaError::Data("need p ≥ 1 and q ≥ 1".into()));
        }
        if let Some((i, j)) = first_non_finite(&self.x) {
            return Err(SpcaError::Data(format!("X[{i},{j}] is not finite")));
        }
        if let Some((i, j)) = first_non_finite(&self.y) {
            return Err(SpcaError::Data(format!("Y[{i},{j}] is not finite")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn labels(&self) -> Option<Vec<usize>> {
        (self.task == Task::Classification).then(|| labels_of(&self.y))
    }

    pub fn subset(&self, idx: &[usize]) -> RawData {
        RawData {
            x: select_rows(&self.x, idx),
            y: select_rows(&self.y, idx),
            task: self.task,
            feature_names: self.feature_names.clone(),
            response_names: self.response_names.clone(),
        }
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .find(|&(i, j)| !m[(i, j)].is_finite())
}

pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    let mut y = DMatrix::zeros(labels.len(), n_classes);
    for (i, &c) in labels.iter().enumerate() {
        if c >= n_classes {
            return Err(SpcaError::Data(format!(
                "row {i}: class {c} out of range for {n_classes} classes"
            )));
        }
        y[(i, c)] = 1.0;
    }
    Ok(y)
}

fn check_one_hot(y: &DMatrix<f64>) -> Result<()> {
    for (i, row) in y.row_iter().enumerate() {
        let ones = row.iter().filter(|v| **v == 1.0).count();
        let zeros = row.iter().filter(|v| **v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(SpcaError::Data(format!(
                "row {i} of the class matrix is not a standard basis vector"
            )));
        }
    }
    Ok(())
}

/// Argmax per row, ties resolved to the lowest index.
pub fn labels_of(y: &DMatrix<f64>) -> Vec<usize> {
    y.row_iter()
        .map(|row| {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Training-set statistics applied to any rows entering the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Centering {
    pub x_means: DVector<f64>,
    /// Per-column divisors when standardisation is enabled.
    pub x_scales: Option<DVector<f64>>,
    /// Response means (regression only).
    pub y_means: Option<DVector<f64>>,
}

impl Centering {
    pub fn apply_x(&self, raw_x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw_x.ncols() != self.x_means.len() {
            return Err(SpcaError::Dimension(format!(
                "expected {} feature columns, got {}",
                self.x_means.len(),
                raw_x.ncols()
            )));
        }
        let mut x = raw_x.clone();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.x_means[j]);
            if let Some(s) = &self.x_scales {
                col.unscale_mut(s[j]);
            }
        }
        Ok(x)
    }

    pub fn apply_y(&self, raw_y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.y_means {
            None => Ok(raw_y.clone()),
            Some(m) => {
                if raw_y.ncols() != m.len() {
                    return Err(SpcaError::Dimension(format!(
                        "expected {} response columns, got {}",
                        m.len(),
                        raw_y.ncols()
                    )));
                }
                let mut y = raw_y.clone();
                for (j, mut col) in y.column_iter_mut().enumerate() {
                    col.add_scalar_mut(-m[j]);
                }
                Ok(y)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CenterOptions {
    /// Divide each centered column by its sample standard deviation.
    pub standardize: bool,
}

/// Column-centered predictors paired with responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub task: Task,
    pub centering: Centering,
    pub feature_names: Option<Vec<String>>,
    pub response_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn center(raw_x: DMatrix<f64>, raw_y: DMatrix<f64>, task: Task) -> Result<Self> {
        let raw = RawData::new(raw_x, raw_y, task)?;
        Dataset::from_raw(&raw, CenterOptions::default())
    }

    pub fn from_raw(raw: &RawData, opts: CenterOptions) -> Result<Self> {
        raw.check_shape()?;
        let n = raw.n();
        let x_means = column_means(&raw.x);
        let x_scales = opts.standardize.then(|| {
            DVector::from_iterator(
                raw.p(),
                raw.x.column_iter().enumerate().map(|(j, c)| {
                    let ss: f64 = c.iter().map(|v| (v - x_means[j]).powi(2)).sum();
                    let sd = (ss / (n - 1) as f64).sqrt();
                    // constant columns stay at zero after centering
                    if sd > 0.0 {
                        sd
                    } else {
                        1.0
                    }
                }),
            )
        });
        let y_means = (raw.task == Task::Regression).then(|| column_means(&raw.y));
        let centering = Centering {
            x_means,
            x_scales,
            y_means,
        };
        let x = centering.apply_x(&raw.x)?;
        let y = centering.apply_y(&raw.y)?;
        Ok(Dataset {
            x,
            y,
            task: raw.task,
            centering,
            feature_names: raw.feature_names.clone(),
            response_names: raw.response_names.clone(),
        })
    }

    /// Build a dataset from explicit centered matrices (no further centering).
    pub fn from_centered(x: DMatrix<f64>, y: DMatrix<f64>, task: Task) -> Result<Self> {
        let centering = Centering {
            x_means: DVector::zeros(x.ncols()),
            x_scales: None,
            y_means: (task == Task::Regression).then(|| DVector::zeros(y.ncols())),
        };
        let ds = Dataset {
            x,
            y,
            task,
            centering,
            feature_names: None,
            response_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() != self.y.nrows() {
            return Err(SpcaError::Dimension(format!(
                "X has {} rows but Y has {}",
                self.x.nrows(),
                self.y.nrows()
            )));
        }
        if self.n() < 2 || self.p() == 0 || self.q() == 0 {
            return Err(SpcaError::Data("need n ≥ 2, p ≥ 1, q ≥ 1".into()));
        }
        let tol = 1e-10;
        for (j, m) in column_means(&self.x).iter().enumerate() {
            if m.abs() > tol * (1.0 + self.x.column(j).amax()) {
                return Err(SpcaError::Data(format!("column {j} of X is not centered")));
            }
        }
        match self.task {
            Task::Regression => {
                for (j, m) in column_means(&self.y).iter().enumerate() {
                    if m.abs() > tol * (1.0 + self.y.column(j).amax()) {
                        return Err(SpcaError::Data(format!("column {j} of Y is not centered")));
                    }
                }
            }
            Task::Classification => check_one_hot(&self.y)?,
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn labels(&self) -> Option<Vec<usize>> {
        (self.task == Task::Classification).then(|| labels_of(&self.y))
    }
}

/// `‖XL‖_F² / ‖X‖_F²`, the fraction of total variation captured by `span(L)`.
pub fn variation_explained(x: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<f64> {
    if x.ncols() != l.nrows() {
        return Err(SpcaError::Dimension(format!(
            "X has {} columns but L has {} rows",
            x.ncols(),
            l.nrows()
        )));
    }
    let total = frob2(x);
    if total <= 0.0 {
        return Err(SpcaError::Data(
            "variation explained is undefined for a zero data matrix".into(),
        ));
    }
    Ok(frob2(&(x * l)) / total)
}

/// Seed for an independent stream identified by `coords` under `master`.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    coords
        .iter()
        .fold(splitmix(master), |acc, c| splitmix(acc ^ splitmix(*c)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub test_fraction: f64,
    pub n_folds: usize,
    pub n_repeats: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            seed: 0,
            test_fraction: 0.2,
            n_folds: 10,
            n_repeats: 10,
        }
    }
}

/// Indices of one repeat: a held-out test set and CV folds over the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

impl Split {
    /// Training indices with fold `k` held out.
    pub fn fold_train(&self, k: usize) -> Vec<usize> {
        let held = &self.folds[k];
        self.train
            .iter()
            .copied()
            .filter(|i| held.binary_search(i).is_err())
            .collect()
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(SpcaError::InvalidArgument(format!(
                "test fraction {} must lie in (0,1)",
                self.test_fraction
            )));
        }
        if self.n_folds == 0 || self.n_repeats == 0 {
            return Err(SpcaError::InvalidArgument(
                "fold and repeat counts must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Deterministic split of `0..n` for the given repeat.
    pub fn split(&self, n: usize, repeat: usize) -> Result<Split> {
        self.validate()?;
        if n < 2 {
            return Err(SpcaError::Data(format!("cannot split {n} samples")));
        }
        let n_test = ((n as f64 * self.test_fraction).round() as usize).clamp(1, n - 1);
        let n_train = n - n_test;
        if self.n_folds > n_train {
            return Err(SpcaError::InvalidArgument(format!(
                "{} folds exceed the {} training samples",
                self.n_folds, n_train
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[repeat as u64]));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut test = perm[..n_test].to_vec();
        let shuffled_train = &perm[n_test..];
        let mut folds = vec![Vec::new(); self.n_folds];
        for (pos, &idx) in shuffled_train.iter().enumerate() {
            folds[pos % self.n_folds].push(idx);
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        let mut train = shuffled_train.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok(Split { train, test, folds })
    }
}
