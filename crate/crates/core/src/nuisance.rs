//! Noise-scale parameters of the generative model and their closed-form
//! maximum-likelihood updates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpcaError};
use crate::linalg::frob2;
use crate::model::Family;

/// Below this the previous `γ` is treated as zero.
pub const GAMMA_ZERO: f64 = 1e-15;

/// `(σ_x², α, σ_y²)`. `σ_y²` is present only for the Gaussian family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    pub sigma_x2: f64,
    pub alpha: f64,
    pub sigma_y2: Option<f64>,
}

impl Nuisance {
    pub fn validate(&self, family: Family) -> Result<()> {
        if !(self.sigma_x2 > 0.0) || !self.sigma_x2.is_finite() {
            return Err(SpcaError::DegenerateNoise(format!(
                "σ_x² = {} must be positive",
                self.sigma_x2
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(SpcaError::InvalidArgument(format!(
                "α = {} must be nonnegative",
                self.alpha
            )));
        }
        match (family, self.sigma_y2) {
            (Family::Gaussian, Some(s)) if s > 0.0 && s.is_finite() => Ok(()),
            (Family::Gaussian, Some(s)) => Err(SpcaError::DegenerateNoise(format!(
                "σ_y² = {s} must be positive"
            ))),
            (Family::Gaussian, None) => Err(SpcaError::InvalidArgument(
                "Gaussian family requires σ_y²".into(),
            )),
            (Family::Categorical, None) => Ok(()),
            (Family::Categorical, Some(_)) => Err(SpcaError::InvalidArgument(
                "categorical family has no σ_y²".into(),
            )),
        }
    }

    pub fn gamma(&self) -> f64 {
        gamma_from(self.sigma_x2, self.alpha)
    }

    /// `σ_y²/σ_x²` (Gaussian) or `1/(2σ_x²)` (categorical).
    pub fn lambda(&self, family: Family) -> f64 {
        match family {
            Family::Gaussian => self.sigma_y2.unwrap_or(f64::NAN) / self.sigma_x2,
            Family::Categorical => 0.5 / self.sigma_x2,
        }
    }

    /// Factor multiplying the conditional loss in the full NLL.
    pub fn loss_scale(&self, family: Family) -> f64 {
        match family {
            Family::Gaussian => 0.5 / self.sigma_y2.unwrap_or(f64::NAN),
            Family::Categorical => 1.0,
        }
    }
}

/// `γ = 1 − sqrt(σ_x²/(σ_x² + α))`.
pub fn gamma_from(sigma_x2: f64, alpha: f64) -> f64 {
    1.0 - (sigma_x2 / (sigma_x2 + alpha)).sqrt()
}

/// Closed-form noise updates at fixed `(L, β)`.
///
/// `σ_x²` uses the residual outside `span(L)` when `γ_prev > 0` and the total
/// variance otherwise; `α` is the excess variance inside the subspace, floored
/// at zero; `σ_y²` is the mean squared residual.
pub fn update_params(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    gamma_prev: f64,
    family: Family,
) -> Result<Nuisance> {
    let (n, p) = x.shape();
    let r = l.ncols();
    if l.nrows() != p {
        return Err(SpcaError::Dimension(format!(
            "L has {} rows but X has {p} columns",
            l.nrows()
        )));
    }
    if r >= p {
        return Err(SpcaError::InvalidArgument(format!(
            "noise updates need r < p (r = {r}, p = {p})"
        )));
    }
    if !(0.0..=1.0).contains(&gamma_prev) {
        return Err(SpcaError::InvalidArgument(format!(
            "γ = {gamma_prev} outside [0, 1]"
        )));
    }
    let (nf, pf, rf) = (n as f64, p as f64, r as f64);
    let z = x * l;
    let total = frob2(x);
    let inside = frob2(&z);
    let sigma_x2 = if gamma_prev > GAMMA_ZERO {
        (total - inside).max(0.0) / (nf * (pf - rf))
    } else {
        total / (nf * pf)
    };
    if !(sigma_x2 > 0.0) {
        return Err(SpcaError::DegenerateNoise(
            "σ_x² estimate is zero; the data lie inside the subspace".into(),
        ));
    }
    let alpha = (inside / (nf * rf) - sigma_x2).max(0.0);
    let sigma_y2 = match family {
        Family::Gaussian => {
            if y.nrows() != n || beta.nrows() != r || beta.ncols() != y.ncols() {
                return Err(SpcaError::Dimension(
                    "Y and β do not match X and L".into(),
                ));
            }
            let resid = y - &z * beta;
            let s = frob2(&resid) / (nf * y.ncols() as f64);
            if !(s > 0.0) {
                return Err(SpcaError::DegenerateNoise(
                    "σ_y² estimate is zero; the responses are fitted exactly".into(),
                ));
            }
            Some(s)
        }
        Family::Categorical => None,
    };
    let out = Nuisance {
        sigma_x2,
        alpha,
        sigma_y2,
    };
    out.validate(family)?;
    Ok(out)
}

/// `λ·γ(2 − γ)`: the weight that makes the `γ = 1` objective share minimisers
/// with the objective at `(λ, γ)`, since
/// `‖X − γXLL'‖² = ‖X‖² − γ(2 − γ)‖XL‖²` for orthonormal `L`.
pub fn cv_equivalent_lambda(lambda: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(SpcaError::InvalidArgument(format!(
            "γ = {gamma} outside (0, 1]"
        )));
    }
    Ok(lambda * gamma * (2.0 - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_normal, random_orthonormal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_subspace_gives_zero_alpha() {
        let mut x = DMatrix::zeros(5, 3);
        for i in 0..5 {
            x[(i, 0)] = i as f64 - 2.0;
            x[(i, 1)] = (i as f64 - 2.0).powi(2) - 2.0;
        }
        let mut l = DMatrix::zeros(3, 1);
        l[(2, 0)] = 1.0;
        let y = DMatrix::from_element(5, 1, 1.0);
        let beta = DMatrix::zeros(1, 1);
        let nu = update_params(&x, &y, &l, &beta, 1.0, Family::Gaussian).unwrap();
        assert!((nu.sigma_x2 - frob2(&x) / 10.0).abs() < 1e-14);
        assert_eq!(nu.alpha, 0.0);
        assert_eq!(nu.gamma(), 0.0);
    }

    #[test]
    fn zero_gamma_uses_total_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_normal(12, 5, &mut rng);
        let l = random_orthonormal(5, 2, &mut rng);
        let y = random_normal(12, 1, &mut rng);
        let beta = random_normal(2, 1, &mut rng);
        let nu = update_params(&x, &y, &l, &beta, 0.0, Family::Gaussian).unwrap();
        assert!((nu.sigma_x2 - frob2(&x) / 60.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_scaling_in_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_normal(30, 6, &mut rng);
        let l = random_orthonormal(6, 2, &mut rng);
        let y = random_normal(30, 2, &mut rng);
        let beta = random_normal(2, 2, &mut rng);
        let a = update_params(&x, &y, &l, &beta, 1.0, Family::Categorical).unwrap();
        let b = update_params(&(&x * 3.0), &y, &l, &beta, 1.0, Family::Categorical).unwrap();
        assert!((b.sigma_x2 - 9.0 * a.sigma_x2).abs() <= 1e-12 * b.sigma_x2);
        assert!((b.alpha - 9.0 * a.alpha).abs() <= 1e-12 * b.alpha.max(1.0));
        assert!(a.alpha >= 0.0 && (0.0..1.0).contains(&a.gamma()));
        assert_eq!(a.gamma() == 0.0, a.alpha == 0.0);
    }

    #[test]
    fn degenerate_cases_are_rejected() {
        let x = DMatrix::zeros(4, 3);
        let l = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let y = DMatrix::from_element(4, 1, 1.0);
        let beta = DMatrix::zeros(1, 1);
        let err = update_params(&x, &y, &l, &beta, 1.0, Family::Gaussian).unwrap_err();
        assert!(matches!(err, SpcaError::DegenerateNoise(_)));
        let l_full = DMatrix::identity(3, 3);
        let beta3 = DMatrix::zeros(3, 1);
        assert!(update_params(&x, &y, &l_full, &beta3, 1.0, Family::Gaussian).is_err());
    }

    #[test]
    fn equivalent_lambda() {
        assert_eq!(cv_equivalent_lambda(2.5, 1.0).unwrap(), 2.5);
        assert!(cv_equivalent_lambda(1.0, 1e-12).unwrap() < 1e-11);
        assert!(cv_equivalent_lambda(1.0, 0.0).is_err());
        assert!(cv_equivalent_lambda(1.0, 1.5).is_err());
    }
}
