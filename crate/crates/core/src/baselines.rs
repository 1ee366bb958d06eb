//! Reference methods: PCA, principal component regression/classification and
//! closed-form reduced-rank regression.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::data::variation_explained;
use crate::error::{Result, SpcaError};
use crate::grassmann::GrassmannPoint;
use crate::linalg::{fix_column_signs, orthonormal_basis, pinv_solve, thin_svd};
use crate::model::{solve_beta, Family};

/// Relative gap between `σ_r` and `σ_{r+1}` below which the subspace is
/// reported as ambiguous.
pub const TIE_GAP: f64 = 1e-10;

/// Top-`r` right singular vectors of `x`, largest-magnitude entry of each
/// column made positive.
pub fn pca(x: &DMatrix<f64>, r: usize) -> Result<GrassmannPoint> {
    let (n, p) = x.shape();
    if r == 0 || r > p {
        return Err(SpcaError::InvalidArgument(format!(
            "PCA rank {r} must be in 1..={p}"
        )));
    }
    let svd = thin_svd(x)?;
    let s = &svd.singular_values;
    let s1 = if s.is_empty() { 0.0 } else { s[0] };
    if r > s.len() || !(s[r - 1] > 1e-12 * s1) {
        return Err(SpcaError::InvalidArgument(format!(
            "PCA rank {r} exceeds the numerical rank of the {n}×{p} data"
        )));
    }
    if r < s.len() && s[r - 1] - s[r] < TIE_GAP * s1 {
        log::warn!(
            "singular values {} and {} are tied; the rank-{r} PCA subspace is not unique",
            s[r - 1],
            s[r]
        );
    }
    let mut l = svd.v.columns(0, r).into_owned();
    fix_column_signs(&mut l);
    GrassmannPoint::new(l)
}

/// A subspace with coefficients, fitted without a trade-off parameter.
#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub family: Family,
    pub l: GrassmannPoint,
    pub beta: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub variation_explained: f64,
    pub wall_time: std::time::Duration,
}

/// PCA followed by least squares (regression) or logistic regression
/// (classification) on the scores.
pub fn pcr_pcc(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    family: Family,
    r: usize,
    reg: f64,
) -> Result<BaselineFit> {
    let start = Instant::now();
    let l = pca(x, r)?;
    let beta = solve_beta(family, x, y, l.basis(), reg)?;
    let z = x * l.basis();
    let ve = variation_explained(x, l.basis())?;
    Ok(BaselineFit {
        family,
        l,
        beta,
        z,
        variation_explained: ve,
        wall_time: start.elapsed(),
    })
}

/// Reduced-rank regression: `B = B_ols V_r V_r'` with `V_r` the top right
/// singular vectors of the OLS fit `X B_ols`. Returns an orthonormal basis
/// `L` of `col(B_ols V_r)` and `β = L'B`, so that `XLβ = XB`.
pub fn rrr(x: &DMatrix<f64>, y: &DMatrix<f64>, r: usize) -> Result<(GrassmannPoint, DMatrix<f64>)> {
    let (p, q) = (x.ncols(), y.ncols());
    if r == 0 || r > p.min(q) {
        return Err(SpcaError::InvalidArgument(format!(
            "reduced rank {r} must be in 1..={}",
            p.min(q)
        )));
    }
    let b_ols = pinv_solve(x, y)?;
    let fitted = x * &b_ols;
    let svd = thin_svd(&fitted)?;
    if svd.v.ncols() < r {
        return Err(SpcaError::InvalidArgument(format!(
            "OLS fit has fewer than {r} singular directions"
        )));
    }
    let v_r = svd.v.columns(0, r).into_owned();
    let b_vr = &b_ols * &v_r;
    let l = orthonormal_basis(&b_vr).map_err(|_| {
        SpcaError::Numerical(format!("the OLS coefficients have rank below {r}"))
    })?;
    let coef = &b_vr * v_r.transpose();
    let beta = l.tr_mul(&coef);
    Ok((GrassmannPoint::new(l)?, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob2, random_normal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_rank_pca_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_normal(10, 4, &mut rng);
        let l = pca(&x, 4).unwrap();
        let b = l.basis();
        assert!(frob2(&(&x - &x * b * b.transpose())) < 1e-10);
    }

    #[test]
    fn rank_too_large_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 0.0]);
        assert!(pca(&x, 2).is_err());
        assert!(pca(&x, 1).is_ok());
    }

    #[test]
    fn sign_convention_is_applied() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_normal(20, 5, &mut rng);
        let l = pca(&x, 3).unwrap();
        for col in l.basis().column_iter() {
            let idx = col.iamax();
            assert!(col[idx] > 0.0);
        }
    }

    #[test]
    fn scalar_response_rrr_is_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_normal(30, 5, &mut rng);
        let y = random_normal(30, 1, &mut rng);
        let (l, beta) = rrr(&x, &y, 1).unwrap();
        let ols = &x * pinv_solve(&x, &y).unwrap();
        assert!((&x * l.basis() * beta - ols).norm() < 1e-9);
    }
}
