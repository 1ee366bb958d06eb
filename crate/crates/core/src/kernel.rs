//! Kernel variants: Gram matrices, double centering, kernel PCA and
//! out-of-sample projection. Kernel models are fitted by running the linear
//! solvers with the centered Gram matrix in place of `X`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, SpcaError};
use crate::grassmann::GrassmannPoint;
use crate::linalg::fix_column_signs;
use crate::model::Family;
use crate::solver::{fit_matrices, FitConfig, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF width `σ` in `exp(−‖x − y‖²/(2σ²))`.
    pub bandwidth: Option<f64>,
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            bandwidth: None,
        }
    }

    pub fn rbf(bandwidth: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            bandwidth: Some(bandwidth),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.bandwidth) {
            (KernelKind::Rbf, Some(b)) if b > 0.0 && b.is_finite() => Ok(()),
            (KernelKind::Rbf, b) => Err(SpcaError::InvalidArgument(format!(
                "RBF bandwidth must be positive, got {b:?}"
            ))),
            (KernelKind::Linear, _) => Ok(()),
        }
    }

    /// Fill in the median-distance bandwidth for an RBF kernel without one.
    pub fn resolved(&self, x: &DMatrix<f64>) -> Result<KernelSpec> {
        match (self.kind, self.bandwidth) {
            (KernelKind::Rbf, None) => Ok(KernelSpec::rbf(median_bandwidth(x)?)),
            _ => {
                self.validate()?;
                Ok(*self)
            }
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => a.iter().zip(b).map(|(u, v)| u * v).sum(),
            KernelKind::Rbf => {
                let s = self.bandwidth.unwrap_or(f64::NAN);
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-d2 / (2.0 * s * s)).exp()
            }
        }
    }
}

fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// Cross-Gram matrix `K_ij = k(a_i, b_j)`.
pub fn cross_gram(a: &DMatrix<f64>, b: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if a.ncols() != b.ncols() {
        return Err(SpcaError::Dimension(format!(
            "kernel inputs have {} and {} features",
            a.ncols(),
            b.ncols()
        )));
    }
    if spec.kind == KernelKind::Linear {
        return Ok(a * b.transpose());
    }
    let (ra, rb) = (rows(a), rows(b));
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| spec.eval(&ra[i], &rb[j])))
}

/// Gram matrix of the rows of `x`; symmetric by construction.
pub fn gram(x: &DMatrix<f64>, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = x.nrows();
    let rx = rows(x);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = if i == j && spec.kind == KernelKind::Rbf {
                1.0
            } else {
                spec.eval(&rx[i], &rx[j])
            };
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Median pairwise Euclidean distance between rows.
pub fn median_bandwidth(x: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    let rx = rows(x);
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in 0..i {
            let s: f64 = rx[i].iter().zip(&rx[j]).map(|(u, v)| (u - v) * (u - v)).sum();
            d.push(s.sqrt());
        }
    }
    if d.is_empty() {
        return Err(SpcaError::Data("bandwidth heuristic needs at least two rows".into()));
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if !(med > 0.0) {
        return Err(SpcaError::Data(
            "median pairwise distance is zero; give an explicit bandwidth".into(),
        ));
    }
    Ok(med)
}

/// Candidate bandwidths around the median heuristic.
pub fn bandwidth_grid(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = median_bandwidth(x)?;
    Ok([0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * m).collect())
}

/// `HKH` with `H = I − 11'/n`.
pub fn center_gram(k: &DMatrix<f64>) -> DMatrix<f64> {
    let (row_means, grand) = gram_aggregates(k);
    center_with(k, &row_means, &row_means, grand)
}

fn gram_aggregates(k: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let n = k.nrows().max(1) as f64;
    let row_means = DVector::from_iterator(k.nrows(), k.row_iter().map(|r| r.sum() / n));
    let grand = row_means.sum() / n;
    (row_means, grand)
}

fn center_with(k: &DMatrix<f64>, row_means: &DVector<f64>, col_means: &DVector<f64>, grand: f64) -> DMatrix<f64> {
    let mut out = k.clone();
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            out[(i, j)] += grand - row_means[i] - col_means[j];
        }
    }
    out
}

/// Training inputs with their centered Gram matrix and the aggregates needed to
/// center kernel rows of new points.
#[derive(Debug, Clone)]
pub struct CenteredKernel {
    pub spec: KernelSpec,
    /// Training rows (after feature centering).
    pub train_x: DMatrix<f64>,
    pub k_tilde: DMatrix<f64>,
    /// Row means of the uncentered training Gram matrix.
    pub row_means: DVector<f64>,
    pub grand_mean: f64,
}

impl CenteredKernel {
    pub fn new(train_x: &DMatrix<f64>, spec: &KernelSpec) -> Result<Self> {
        let spec = spec.resolved(train_x)?;
        let k = gram(train_x, &spec)?;
        let (row_means, grand_mean) = gram_aggregates(&k);
        let mut k_tilde = center_with(&k, &row_means, &row_means, grand_mean);
        // exact symmetry
        let kt = k_tilde.transpose();
        k_tilde = (k_tilde + kt) * 0.5;
        Ok(CenteredKernel {
            spec,
            train_x: train_x.clone(),
            k_tilde,
            row_means,
            grand_mean,
        })
    }

    pub fn n(&self) -> usize {
        self.train_x.nrows()
    }

    /// Centered kernel rows `k̃(x, x_j)` for new (feature-centered) rows.
    pub fn centered_rows(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = cross_gram(x_new, &self.train_x, &self.spec)?;
        let n = self.n() as f64;
        let new_means = DVector::from_iterator(k.nrows(), k.row_iter().map(|r| r.sum() / n));
        Ok(center_with(&k, &new_means, &self.row_means, self.grand_mean))
    }

    /// `k̃(x, ·) L` for each new row.
    pub fn project_new(&self, l: &DMatrix<f64>, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if l.nrows() != self.n() {
            return Err(SpcaError::Dimension(format!(
                "kernel basis has {} rows, expected {}",
                l.nrows(),
                self.n()
            )));
        }
        Ok(self.centered_rows(x_new)? * l)
    }

    /// `‖K̃L‖²/‖K̃‖²`.
    pub fn variation_explained(&self, l: &DMatrix<f64>) -> Result<f64> {
        crate::data::variation_explained(&self.k_tilde, l)
    }
}

/// Top-`r` unit eigenvectors of a centered Gram matrix.
pub fn kpca(k_tilde: &DMatrix<f64>, r: usize) -> Result<GrassmannPoint> {
    let n = k_tilde.nrows();
    if k_tilde.ncols() != n {
        return Err(SpcaError::Dimension("kernel matrix must be square".into()));
    }
    if r == 0 || r > n {
        return Err(SpcaError::InvalidArgument(format!("kPCA rank {r} must be in 1..={n}")));
    }
    let eig = k_tilde.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) || eig.eigenvalues[order[r - 1]] < 1e-10 * top {
        return Err(SpcaError::InvalidArgument(format!(
            "kPCA rank {r} exceeds the numerical rank of the kernel matrix"
        )));
    }
    let mut l = DMatrix::from_fn(n, r, |i, j| eig.eigenvectors[(i, order[j])]);
    fix_column_signs(&mut l);
    GrassmannPoint::new(l)
}

/// A kernel model: the fit on `(K̃, Y)` plus what is needed to embed new rows.
#[derive(Debug, Clone)]
pub struct KernelFit {
    pub kernel: CenteredKernel,
    pub result: FitResult,
}

pub fn fit_kernel_spca(dataset: &Dataset, spec: &KernelSpec, config: &FitConfig) -> Result<KernelFit> {
    if Family::for_task(dataset.task) != config.family {
        return Err(SpcaError::InvalidArgument(format!(
            "{:?} model requested for a {:?} dataset",
            config.family, dataset.task
        )));
    }
    let kernel = CenteredKernel::new(&dataset.x, spec)?;
    let result = fit_matrices(&kernel.k_tilde, &dataset.y, config)?;
    Ok(KernelFit { kernel, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rbf_closed_form() {
        let spec = KernelSpec::rbf(1.0);
        assert_eq!(spec.eval(&[0.3, -1.0], &[0.3, -1.0]), 1.0);
        let v = spec.eval(&[0.0, 0.0], &[1.0, 1.0]);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(KernelSpec::rbf(0.0).validate().is_err());
    }

    #[test]
    fn constant_kernel_centers_to_zero() {
        let k = DMatrix::from_element(5, 5, 2.5);
        assert!(center_gram(&k).amax() < 1e-15);
    }

    #[test]
    fn diagonal_kernel_pca_picks_largest_entries() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 3.0, 0.5]));
        let l = kpca(&k, 2).unwrap();
        assert!((l.basis()[(1, 0)] - 1.0).abs() < 1e-12);
        assert!((l.basis()[(2, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_bandwidth_of_a_line() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 3.0]);
        assert_eq!(median_bandwidth(&x).unwrap(), 2.0);
    }

    #[test]
    fn rank_limit_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_normal(6, 1, &mut rng);
        let k = &v * v.transpose();
        assert!(kpca(&k, 2).is_err());
        let l = kpca(&k, 1).unwrap();
        let u = &v / v.norm();
        assert!((l.basis().column(0).dot(&u.column(0)).abs() - 1.0).abs() < 1e-12);
    }
}
