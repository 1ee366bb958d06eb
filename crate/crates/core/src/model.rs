//! LSPCA and LRPCA objectives, their gradients in `L`, and prediction.
//!
//! The objective is
//! `G(L, β) = loss(Y, XLβ) + λ‖X − γXLL'‖_F²`
//! where the loss is the squared error (Gaussian family) or the multinomial
//! cross-entropy (categorical family).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{labels_of, Centering, Task};
use crate::error::{ensure_finite, Result, SpcaError};
use crate::grassmann::{CostFunction, GrassmannPoint};
use crate::linalg::frob2;
use crate::nuisance::Nuisance;
use crate::regression::{
    cross_entropy, least_squares, multinomial_logistic, softmax_rows, LogisticOptions,
};

/// Response distribution: Gaussian for LSPCA, categorical for LRPCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Categorical,
}

impl Family {
    pub fn for_task(task: Task) -> Family {
        match task {
            Task::Regression => Family::Gaussian,
            Task::Classification => Family::Categorical,
        }
    }

    pub fn task(self) -> Task {
        match self {
            Family::Gaussian => Task::Regression,
            Family::Categorical => Task::Classification,
        }
    }
}

/// Which value [`nll`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// `loss + λ‖X − γXLL'‖²` with the caller's `(λ, γ)`.
    Cv,
    /// Full negative log-likelihood (without `2π` constants) under the stored
    /// noise parameters.
    Mle,
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub family: Family,
    pub l: GrassmannPoint,
    /// `r×q`; for the categorical family the last column is zero.
    pub beta: DMatrix<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub nuisance: Option<Nuisance>,
}

impl ModelParams {
    pub fn new(
        family: Family,
        l: GrassmannPoint,
        beta: DMatrix<f64>,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        let params = ModelParams {
            family,
            l,
            beta,
            lambda,
            gamma,
            nuisance: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters whose `(λ, γ)` follow from the noise scales.
    pub fn from_nuisance(
        family: Family,
        l: GrassmannPoint,
        beta: DMatrix<f64>,
        nuisance: Nuisance,
    ) -> Result<Self> {
        nuisance.validate(family)?;
        let params = ModelParams {
            family,
            l,
            beta,
            lambda: nuisance.lambda(family),
            gamma: nuisance.gamma(),
            nuisance: Some(nuisance),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(SpcaError::InvalidArgument(format!(
                "λ = {} must be positive and finite",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(SpcaError::InvalidArgument(format!(
                "γ = {} outside [0, 1]",
                self.gamma
            )));
        }
        if self.beta.nrows() != self.l.rank() {
            return Err(SpcaError::Dimension(format!(
                "β has {} rows but L has rank {}",
                self.beta.nrows(),
                self.l.rank()
            )));
        }
        if let Some(nu) = &self.nuisance {
            nu.validate(self.family)?;
        }
        Ok(())
    }

    pub fn embed(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x * self.l.basis()
    }
}

fn check_shapes(
    family: Family,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    beta: &DMatrix<f64>,
) -> Result<()> {
    let (n, p) = x.shape();
    if y.nrows() != n {
        return Err(SpcaError::Dimension(format!(
            "X has {n} rows, Y has {}",
            y.nrows()
        )));
    }
    if l.nrows() != p {
        return Err(SpcaError::Dimension(format!(
            "L has {} rows, X has {p} columns",
            l.nrows()
        )));
    }
    if beta.shape() != (l.ncols(), y.ncols()) {
        return Err(SpcaError::Dimension(format!(
            "β is {}×{}, expected {}×{}",
            beta.nrows(),
            beta.ncols(),
            l.ncols(),
            y.ncols()
        )));
    }
    if family == Family::Categorical && y.ncols() < 2 {
        return Err(SpcaError::Data(
            "categorical responses need at least two one-hot columns".into(),
        ));
    }
    Ok(())
}

/// Prediction loss of the family on the embedding `z`: `‖Y − Zβ‖_F²` or the
/// cross-entropy of `softmax(Zβ)`.
pub fn conditional_loss(
    family: Family,
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    beta: &DMatrix<f64>,
) -> f64 {
    let fitted = z * beta;
    match family {
        Family::Gaussian => frob2(&(y - fitted)),
        Family::Categorical => cross_entropy(&fitted, y),
    }
}

/// `‖X − γZL'‖_F²` with `Z = XL`.
pub fn pca_term(x: &DMatrix<f64>, z: &DMatrix<f64>, l: &DMatrix<f64>, gamma: f64) -> f64 {
    frob2(&(x - z * l.transpose() * gamma))
}

/// Weighted objective `s·loss + λ‖X − γXLL'‖²` and its Euclidean gradient in
/// `L` at fixed `β`.
fn objective_and_gradient(
    family: Family,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    loss_scale: f64,
    lambda: f64,
    gamma: f64,
    want_gradient: bool,
) -> (f64, Option<DMatrix<f64>>) {
    let z = x * l;
    let fitted = &z * beta;
    let recon = x - &z * l.transpose() * gamma;
    let (loss, dloss) = match family {
        Family::Gaussian => {
            let resid = y - &fitted;
            (frob2(&resid), resid * -2.0)
        }
        Family::Categorical => (cross_entropy(&fitted, y), softmax_rows(&fitted) - y),
    };
    let value = loss_scale * loss + lambda * frob2(&recon);
    if !want_gradient {
        return (value, None);
    }
    // d‖Y − XLβ‖² = X'(dloss)β'; d‖X − γXLL'‖² = −2γ(X'ML + M'XL), M = X − γXLL'
    let g_loss = x.tr_mul(&(dloss * beta.transpose()));
    let g_pca = (x.tr_mul(&(&recon * l)) + recon.tr_mul(&z)) * (-2.0 * gamma);
    (value, Some(g_loss * loss_scale + g_pca * lambda))
}

/// Objective value. `Cv` gives `loss + λ‖X − γXLL'‖²`; `Mle` gives the full
/// negative log-likelihood under the stored noise parameters.
pub fn nll(params: &ModelParams, x: &DMatrix<f64>, y: &DMatrix<f64>, mode: ObjectiveMode) -> Result<f64> {
    let l = params.l.basis();
    check_shapes(params.family, x, y, l, &params.beta)?;
    let value = match mode {
        ObjectiveMode::Cv => {
            objective_and_gradient(
                params.family,
                x,
                y,
                l,
                &params.beta,
                1.0,
                params.lambda,
                params.gamma,
                false,
            )
            .0
        }
        ObjectiveMode::Mle => {
            let nu = params.nuisance.ok_or_else(|| {
                SpcaError::InvalidArgument("likelihood mode needs noise parameters".into())
            })?;
            full_nll(params.family, x, y, l, &params.beta, &nu)?
        }
    };
    ensure_finite(value, "objective")
}

/// Full negative log-likelihood at explicit noise parameters (additive `2π`
/// constants dropped).
pub fn full_nll(
    family: Family,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    nu: &Nuisance,
) -> Result<f64> {
    check_shapes(family, x, y, l, beta)?;
    nu.validate(family)?;
    let (n, p) = x.shape();
    let r = l.ncols();
    let (nf, qf) = (n as f64, y.ncols() as f64);
    let gamma = nu.gamma();
    let (value, _) = objective_and_gradient(
        family,
        x,
        y,
        l,
        beta,
        nu.loss_scale(family),
        0.5 / nu.sigma_x2,
        gamma,
        false,
    );
    let mut logdet = 0.5
        * (nf * (p - r.min(p)) as f64 * nu.sigma_x2.ln()
            + nf * r as f64 * (nu.sigma_x2 + nu.alpha).ln());
    if let (Family::Gaussian, Some(sy)) = (family, nu.sigma_y2) {
        logdet += 0.5 * nf * qf * sy.ln();
    }
    ensure_finite(value + logdet, "negative log-likelihood")
}

/// Euclidean gradient `∂G/∂L` of the `Cv` objective at fixed `β`, `λ`, `γ`.
pub fn euclidean_grad_l(params: &ModelParams, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = params.l.basis();
    check_shapes(params.family, x, y, l, &params.beta)?;
    let (_, g) = objective_and_gradient(
        params.family,
        x,
        y,
        l,
        &params.beta,
        1.0,
        params.lambda,
        params.gamma,
        true,
    );
    let g = g.expect("gradient requested");
    if g.iter().any(|v| !v.is_finite()) {
        return Err(SpcaError::Numerical("gradient has non-finite entries".into()));
    }
    Ok(g)
}

/// How `β` is obtained when the cost is evaluated at some `L`.
#[derive(Debug, Clone)]
pub enum BetaPolicy {
    /// Held fixed (the `L` step of the alternating scheme).
    Fixed(DMatrix<f64>),
    /// Least-squares optimum `(XL)⁺Y` recomputed at every `L`.
    Substituted,
}

/// `G(L) = s·loss(Y, XLβ) + λ‖X − γXLL'‖²` as a cost on the Grassmannian.
#[derive(Debug, Clone)]
pub struct SpcaCost<'a> {
    pub family: Family,
    pub x: &'a DMatrix<f64>,
    pub y: &'a DMatrix<f64>,
    pub beta: BetaPolicy,
    pub loss_scale: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl<'a> SpcaCost<'a> {
    pub fn new(
        family: Family,
        x: &'a DMatrix<f64>,
        y: &'a DMatrix<f64>,
        beta: BetaPolicy,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        if let BetaPolicy::Substituted = beta {
            if family != Family::Gaussian {
                return Err(SpcaError::InvalidArgument(
                    "β substitution is only available for the Gaussian family".into(),
                ));
            }
        }
        Ok(SpcaCost {
            family,
            x,
            y,
            beta,
            loss_scale: 1.0,
            lambda,
            gamma,
        })
    }

    pub fn with_loss_scale(mut self, scale: f64) -> Self {
        self.loss_scale = scale;
        self
    }

    pub fn beta_at(&self, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.beta {
            BetaPolicy::Fixed(b) => Ok(b.clone()),
            BetaPolicy::Substituted => least_squares(&(self.x * l), self.y),
        }
    }

    fn eval(&self, l: &DMatrix<f64>, want_gradient: bool) -> Result<(f64, Option<DMatrix<f64>>)> {
        let beta = self.beta_at(l)?;
        check_shapes(self.family, self.x, self.y, l, &beta)?;
        // with β at its least-squares optimum the β-derivative vanishes, so the
        // gradient at fixed β is also the gradient of the substituted cost
        Ok(objective_and_gradient(
            self.family,
            self.x,
            self.y,
            l,
            &beta,
            self.loss_scale,
            self.lambda,
            self.gamma,
            want_gradient,
        ))
    }
}

impl CostFunction for SpcaCost<'_> {
    fn cost(&self, l: &DMatrix<f64>) -> Result<f64> {
        Ok(self.eval(l, false)?.0)
    }

    fn euclidean_gradient(&self, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.eval(l, true)?.1.expect("gradient requested"))
    }

    fn cost_and_gradient(&self, l: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let (f, g) = self.eval(l, true)?;
        Ok((f, g.expect("gradient requested")))
    }
}

/// Least-squares `β` for the embedding `XL`.
pub fn solve_beta_ls(x: &DMatrix<f64>, y: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    least_squares(&(x * l), y)
}

/// Multinomial logistic `β` for the embedding `XL`, ridge weight `reg`.
pub fn solve_beta_lr(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    reg: f64,
) -> Result<DMatrix<f64>> {
    Ok(multinomial_logistic(&(x * l), y, &LogisticOptions::with_reg(reg))?.beta)
}

pub fn solve_beta(
    family: Family,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    reg: f64,
) -> Result<DMatrix<f64>> {
    match family {
        Family::Gaussian => solve_beta_ls(x, y, l),
        Family::Categorical => solve_beta_lr(x, y, l, reg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    /// Fitted responses on the original scale.
    Regression(DMatrix<f64>),
    Classification {
        probabilities: DMatrix<f64>,
        labels: Vec<usize>,
    },
}

impl Prediction {
    /// Regression values, or probabilities for classification.
    pub fn values(&self) -> &DMatrix<f64> {
        match self {
            Prediction::Regression(y) => y,
            Prediction::Classification { probabilities, .. } => probabilities,
        }
    }
}

/// Predictions from an embedding `Z` and coefficients `β`. `y_means` is added
/// back for regression.
pub fn predict_from_embedding(
    family: Family,
    z: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    y_means: Option<&DVector<f64>>,
) -> Result<Prediction> {
    if z.ncols() != beta.nrows() {
        return Err(SpcaError::Dimension(format!(
            "embedding has {} columns, β has {} rows",
            z.ncols(),
            beta.nrows()
        )));
    }
    let fitted = z * beta;
    match family {
        Family::Gaussian => {
            let mut out = fitted;
            if let Some(m) = y_means {
                if m.len() != out.ncols() {
                    return Err(SpcaError::Dimension("response means do not match β".into()));
                }
                for (j, mut col) in out.column_iter_mut().enumerate() {
                    col.add_scalar_mut(m[j]);
                }
            }
            Ok(Prediction::Regression(out))
        }
        Family::Categorical => {
            let probabilities = softmax_rows(&fitted);
            let labels = labels_of(&probabilities);
            Ok(Prediction::Classification {
                probabilities,
                labels,
            })
        }
    }
}

/// Predict for raw (uncentered) rows using training centering statistics.
pub fn predict(params: &ModelParams, raw_x: &DMatrix<f64>, centering: &Centering) -> Result<Prediction> {
    let x = centering.apply_x(raw_x)?;
    if x.ncols() != params.l.ambient_dim() {
        return Err(SpcaError::Dimension(format!(
            "model expects {} features, got {}",
            params.l.ambient_dim(),
            x.ncols()
        )));
    }
    predict_from_embedding(
        params.family,
        &params.embed(&x),
        &params.beta,
        centering.y_means.as_ref(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_normal, random_orthonormal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn point(l: DMatrix<f64>) -> GrassmannPoint {
        GrassmannPoint::new(l).unwrap()
    }

    #[test]
    fn exact_fit_leaves_only_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_normal(12, 4, &mut rng);
        let l = random_orthonormal(4, 2, &mut rng);
        let beta = random_normal(2, 1, &mut rng);
        let y = &x * &l * &beta;
        let params = ModelParams::new(Family::Gaussian, point(l.clone()), beta, 3.0, 1.0).unwrap();
        let v = nll(&params, &x, &y, ObjectiveMode::Cv).unwrap();
        let want = 3.0 * frob2(&(&x - &x * &l * l.transpose()));
        assert!((v - want).abs() < 1e-10 * want);
    }

    #[test]
    fn zero_gamma_ignores_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_normal(10, 4, &mut rng);
        let y = DMatrix::zeros(10, 1);
        let beta = DMatrix::zeros(2, 1);
        for _ in 0..3 {
            let l = random_orthonormal(4, 2, &mut rng);
            let params = ModelParams::new(Family::Gaussian, point(l), beta.clone(), 2.0, 0.0).unwrap();
            let v = nll(&params, &x, &y, ObjectiveMode::Cv).unwrap();
            assert!((v - 2.0 * frob2(&x)).abs() < 1e-10 * v);
        }
    }

    #[test]
    fn zero_beta_predicts_uniform() {
        let z = DMatrix::from_element(3, 2, 0.7);
        let beta = DMatrix::zeros(2, 4);
        let pred = predict_from_embedding(Family::Categorical, &z, &beta, None).unwrap();
        assert!(pred.values().iter().all(|p| (p - 0.25).abs() < 1e-15));
        match pred {
            Prediction::Classification { labels, .. } => assert_eq!(labels, vec![0, 0, 0]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let l = point(DMatrix::identity(3, 1));
        let beta = DMatrix::zeros(1, 1);
        assert!(ModelParams::new(Family::Gaussian, l.clone(), beta.clone(), 0.0, 1.0).is_err());
        assert!(ModelParams::new(Family::Gaussian, l.clone(), beta.clone(), 1.0, 1.5).is_err());
        assert!(ModelParams::new(Family::Gaussian, l, DMatrix::zeros(2, 1), 1.0, 1.0).is_err());
    }
}
