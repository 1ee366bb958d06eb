//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SpcaError};

/// Thin SVD `m = U diag(s) V'` with singular values in descending order.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SpcaError::Numerical(
            "SVD input contains non-finite entries".into(),
        ));
    }
    let svd = m.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| SpcaError::Numerical("SVD did not produce U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| SpcaError::Numerical("SVD did not produce V'".into()))?;
    Ok(ThinSvd {
        u,
        singular_values: svd.singular_values,
        v: v_t.transpose(),
    })
}

pub fn frob2(m: &DMatrix<f64>) -> f64 {
    m.norm_squared()
}

/// Trace inner product `tr(A'B)`.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// `‖L'L − I‖_F`.
pub fn orthonormality_error(l: &DMatrix<f64>) -> f64 {
    let gram = l.tr_mul(l);
    let r = gram.nrows();
    (gram - DMatrix::<f64>::identity(r, r)).norm()
}

/// QR factorisation with the diagonal of `R` forced nonnegative, so the
/// orthonormal factor is a deterministic function of the input.
pub fn qr_positive(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..r.nrows() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// Orthonormal basis for the column space of a full-column-rank matrix.
pub fn orthonormal_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (q, r) = qr_positive(m);
    let scale = r.diagonal().amax().max(f64::MIN_POSITIVE);
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(SpcaError::Numerical(
            "matrix is column-rank deficient; no orthonormal basis of full rank".into(),
        ));
    }
    Ok(q)
}

/// Minimum-norm least-squares solution `A⁺B` via the SVD.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(SpcaError::Dimension(format!(
            "least squares with {} design rows and {} response rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let svd = thin_svd(a)?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    let utb = svd.u.tr_mul(b);
    let mut scaled = utb;
    for (i, s) in svd.singular_values.iter().enumerate() {
        let inv = if *s > cutoff { 1.0 / s } else { 0.0 };
        scaled.row_mut(i).scale_mut(inv);
    }
    Ok(&svd.v * scaled)
}

/// Numerical rank with relative tolerance `rtol` on the singular values.
pub fn numerical_rank(m: &DMatrix<f64>, rtol: f64) -> Result<usize> {
    let svd = thin_svd(m)?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    Ok(svd
        .singular_values
        .iter()
        .filter(|s| **s > rtol * smax && **s > 0.0)
        .count())
}

/// Chordal distance `‖L1L1' − L2L2'‖_F / √2` between two subspaces given by
/// orthonormal bases.
pub fn chordal_distance(l1: &DMatrix<f64>, l2: &DMatrix<f64>) -> f64 {
    if l1.ncols() == l2.ncols() {
        // For equal dimensions this equals ‖(I − L1L1')L2‖_F, which avoids cancellation.
        let resid = l2 - l1 * l1.tr_mul(l2);
        resid.norm()
    } else {
        let diff = l1 * l1.transpose() - l2 * l2.transpose();
        diff.norm() / std::f64::consts::SQRT_2
    }
}

pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-ish random orthonormal `p×r` matrix (QR of a Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(p: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let g = random_normal(p, r, rng);
    qr_positive(&g).0
}

/// Column sign convention: the largest-magnitude entry of each column is positive.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Select rows by index, preserving order.
pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Log-spaced grid of `count` points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pinv_matches_normal_equations_on_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_normal(12, 3, &mut rng);
        let b = random_normal(12, 2, &mut rng);
        let x = pinv_solve(&a, &b).unwrap();
        let ne = (a.tr_mul(&a)).try_inverse().unwrap() * a.tr_mul(&b);
        assert!((x - ne).norm() < 1e-10);
    }

    #[test]
    fn qr_positive_has_nonnegative_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_normal(7, 3, &mut rng);
        let (q, r) = qr_positive(&a);
        assert!(r.diagonal().iter().all(|d| *d >= 0.0));
        assert!((&q * &r - &a).norm() < 1e-12);
        assert!(orthonormality_error(&q) < 1e-12);
    }

    #[test]
    fn chordal_distance_matches_projector_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_orthonormal(6, 2, &mut rng);
        let b = random_orthonormal(6, 2, &mut rng);
        let direct = (&a * a.transpose() - &b * b.transpose()).norm() / 2f64.sqrt();
        assert!((chordal_distance(&a, &b) - direct).abs() < 1e-12);
        assert!(chordal_distance(&a, &a) < 1e-14);
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(1e-2, 1e2, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1e-2).abs() < 1e-15);
        assert!((g[2] - 1.0).abs() < 1e-12);
        assert!((g[4] - 1e2).abs() < 1e-10);
    }
}
