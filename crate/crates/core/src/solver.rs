//! Fitting drivers: block-coordinate alternation over (noise, `L`, `β`) and the
//! least-squares variant with `β` eliminated.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::pca;
use crate::data::{variation_explained, Dataset};
use crate::error::{Result, ResultExt, SpcaError};
use crate::grassmann::{mcgd, GrassmannPoint, McgdOptions};
use crate::linalg::orthonormality_error;
use crate::model::{
    full_nll, solve_beta, BetaPolicy, Family, ModelParams, ObjectiveMode, SpcaCost,
};
use crate::nuisance::{update_params, Nuisance};

/// Relative slack allowed when checking that the objective never increases.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Alternate `L` (manifold CG at fixed `β`) and `β` (closed form / Newton).
    Alternating,
    /// Optimise `G(L, β*(L))` with the least-squares `β*` substituted.
    Substitution,
}

/// How `λ` and `γ` are set during a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuisanceMode {
    /// Fixed `λ` with `γ = 1`, typically chosen by cross-validation.
    Cv { lambda: f64 },
    /// `(σ_x², α, σ_y²)` re-estimated in closed form every outer iteration.
    Mle,
}

impl NuisanceMode {
    pub fn objective_mode(&self) -> ObjectiveMode {
        match self {
            NuisanceMode::Cv { .. } => ObjectiveMode::Cv,
            NuisanceMode::Mle => ObjectiveMode::Mle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initialization {
    /// Top-`r` principal subspace.
    Pca,
    /// Random orthonormal basis drawn from the config seed.
    Random,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub family: Family,
    pub algorithm: Algorithm,
    pub mode: NuisanceMode,
    pub r: usize,
    /// Stop once the relative objective change over an outer iteration is at
    /// most this.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Inner solver options; `None` scales the defaults to `‖X‖_F`.
    pub mcgd: Option<McgdOptions>,
    /// Ridge weight for the logistic `β` step.
    pub lr_reg: f64,
    pub init: Initialization,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(family: Family, mode: NuisanceMode, r: usize) -> Self {
        FitConfig {
            family,
            algorithm: Algorithm::Alternating,
            mode,
            r,
            outer_tol: 1e-8,
            max_outer: 100,
            mcgd: None,
            lr_reg: 0.0,
            init: Initialization::Pca,
            seed: 0,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn validate(&self, n: usize, p: usize, q: usize) -> Result<()> {
        if self.r == 0 || self.r > p {
            return Err(SpcaError::InvalidArgument(format!(
                "target dimension r = {} must be in 1..={p}",
                self.r
            )));
        }
        if self.r > n {
            return Err(SpcaError::InvalidArgument(format!(
                "target dimension r = {} exceeds the sample count {n}",
                self.r
            )));
        }
        match self.mode {
            NuisanceMode::Cv { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                return Err(SpcaError::InvalidArgument(format!(
                    "λ = {lambda} must be positive and finite"
                )));
            }
            NuisanceMode::Mle if self.r >= p => {
                return Err(SpcaError::InvalidArgument(format!(
                    "likelihood mode needs r < p (r = {}, p = {p})",
                    self.r
                )));
            }
            _ => {}
        }
        if self.algorithm == Algorithm::Substitution && self.family != Family::Gaussian {
            return Err(SpcaError::InvalidArgument(
                "the substitution algorithm applies to least-squares models only".into(),
            ));
        }
        if self.family == Family::Categorical && q < 2 {
            return Err(SpcaError::Data(
                "classification needs at least two classes".into(),
            ));
        }
        if !(self.outer_tol >= 0.0) || self.max_outer == 0 {
            return Err(SpcaError::InvalidArgument(
                "outer tolerance must be nonnegative and max_outer positive".into(),
            ));
        }
        if !(self.lr_reg >= 0.0) {
            return Err(SpcaError::InvalidArgument(format!(
                "ridge weight {} must be nonnegative",
                self.lr_reg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    /// Training embedding `XL`.
    pub z: DMatrix<f64>,
    /// Objective after initialisation and after every outer iteration.
    pub nll_trace: Vec<f64>,
    pub objective_mode: ObjectiveMode,
    pub variation_explained: f64,
    pub converged: bool,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub wall_time: Duration,
    /// Largest `‖L'L − I‖_F` seen at any iterate.
    pub max_orthonormality_error: f64,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        self.nll_trace.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    if Family::for_task(dataset.task) != config.family {
        return Err(SpcaError::InvalidArgument(format!(
            "{:?} model requested for a {:?} dataset",
            config.family, dataset.task
        )));
    }
    fit_matrices(&dataset.x, &dataset.y, config)
}

pub fn fit_alternating(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    fit(dataset, &config.clone().with_algorithm(Algorithm::Alternating))
}

pub fn fit_substitution(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    fit(dataset, &config.clone().with_algorithm(Algorithm::Substitution))
}

/// State of one block-coordinate iterate.
struct Iterate {
    l: GrassmannPoint,
    beta: DMatrix<f64>,
    nuisance: Option<Nuisance>,
    value: f64,
}

/// Fit on an explicit centered design `x` (data or centered Gram matrix) and
/// response `y`.
pub fn fit_matrices(x: &DMatrix<f64>, y: &DMatrix<f64>, config: &FitConfig) -> Result<FitResult> {
    let start = Instant::now();
    let (n, p) = x.shape();
    if y.nrows() != n {
        return Err(SpcaError::Dimension(format!(
            "X has {n} rows, Y has {}",
            y.nrows()
        )));
    }
    config.validate(n, p, y.ncols())?;
    let family = config.family;
    let mcgd_opts = config
        .mcgd
        .unwrap_or_else(|| McgdOptions::scaled_to(x.norm()));

    let l0 = match config.init {
        Initialization::Pca => pca(x, config.r).context_with(|| "initial subspace".into())?,
        Initialization::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            GrassmannPoint::random(p, config.r, &mut rng)
        }
    };
    let beta0 = solve_beta(family, x, y, l0.basis(), config.lr_reg)
        .context_with(|| "initial coefficients".into())?;
    let nu0 = match config.mode {
        NuisanceMode::Cv { .. } => None,
        NuisanceMode::Mle => Some(
            update_params(x, y, l0.basis(), &beta0, 1.0, family)
                .context_with(|| "initial noise estimate".into())?,
        ),
    };
    let objective = |l: &DMatrix<f64>, beta: &DMatrix<f64>, nu: Option<&Nuisance>| -> Result<f64> {
        let ridge = match family {
            Family::Categorical => 0.5 * config.lr_reg * beta.norm_squared(),
            Family::Gaussian => 0.0,
        };
        let base = match (config.mode, nu) {
            (NuisanceMode::Cv { lambda }, _) => {
                let cost = SpcaCost::new(family, x, y, BetaPolicy::Fixed(beta.clone()), lambda, 1.0)?;
                crate::grassmann::CostFunction::cost(&cost, l)?
            }
            (NuisanceMode::Mle, Some(nu)) => full_nll(family, x, y, l, beta, nu)?,
            (NuisanceMode::Mle, None) => unreachable!("likelihood mode always carries noise"),
        };
        Ok(base + ridge)
    };

    let value0 = objective(l0.basis(), &beta0, nu0.as_ref())?;
    let mut current = Iterate {
        l: l0,
        beta: beta0,
        nuisance: nu0,
        value: value0,
    };
    let mut trace = vec![value0];
    let mut max_orth = current.l.orthonormality_error();
    let mut inner_iterations = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut best = (current.l.clone(), current.beta.clone(), current.nuisance, value0);

    for k in 1..=config.max_outer {
        let prev_value = current.value;
        // noise parameters from the previous (L, β)
        let mut reference = prev_value;
        let nuisance = match config.mode {
            NuisanceMode::Cv { .. } => None,
            NuisanceMode::Mle => {
                let gamma_prev = current.nuisance.map(|nu| nu.gamma()).unwrap_or(1.0);
                let nu = update_params(x, y, current.l.basis(), &current.beta, gamma_prev, family)
                    .context_with(|| format!("outer iteration {k}: noise update"))?;
                let after = objective(current.l.basis(), &current.beta, Some(&nu))?;
                check_monotone(prev_value, after, || format!("outer iteration {k}: noise update"))?;
                reference = after;
                Some(nu)
            }
        };
        let (lambda, gamma, loss_scale) = match (config.mode, &nuisance) {
            (NuisanceMode::Cv { lambda }, _) => (lambda, 1.0, 1.0),
            (NuisanceMode::Mle, Some(nu)) => (0.5 / nu.sigma_x2, nu.gamma(), nu.loss_scale(family)),
            (NuisanceMode::Mle, None) => unreachable!("likelihood mode always carries noise"),
        };
        // in likelihood mode the cost is the full NLL up to L-independent terms
        let policy = match config.algorithm {
            Algorithm::Alternating => BetaPolicy::Fixed(current.beta.clone()),
            Algorithm::Substitution => BetaPolicy::Substituted,
        };
        let cost = SpcaCost::new(family, x, y, policy, lambda, gamma)?.with_loss_scale(loss_scale);
        let inner = mcgd(&cost, &current.l, &mcgd_opts)
            .context_with(|| format!("outer iteration {k}: subspace update"))?;
        inner_iterations += inner.iterations;
        max_orth = max_orth.max(inner.max_orthonormality_error);
        let l_new = inner.point;
        let beta_new = solve_beta(family, x, y, l_new.basis(), config.lr_reg)
            .context_with(|| format!("outer iteration {k}: coefficient update"))?;
        let value = objective(l_new.basis(), &beta_new, nuisance.as_ref())?;
        check_monotone(reference, value, || format!("outer iteration {k}: subspace update"))?;

        trace.push(value);
        iterations = k;
        current = Iterate {
            l: l_new,
            beta: beta_new,
            nuisance,
            value,
        };
        if value < best.3 {
            best = (current.l.clone(), current.beta.clone(), current.nuisance, value);
        }
        log::debug!(
            "outer {k}: objective {value:.12e} ({} inner steps, {:?})",
            inner.iterations,
            inner.status
        );
        if (prev_value - value).abs() <= config.outer_tol * prev_value.abs() {
            converged = true;
            break;
        }
    }

    let (l, beta, nuisance, _) = best;
    let params = match (config.mode, nuisance) {
        (NuisanceMode::Cv { lambda }, _) => ModelParams::new(family, l, beta, lambda, 1.0)?,
        (NuisanceMode::Mle, Some(nu)) => ModelParams::from_nuisance(family, l, beta, nu)?,
        (NuisanceMode::Mle, None) => unreachable!("likelihood mode always carries noise"),
    };
    let z = x * params.l.basis();
    max_orth = max_orth.max(orthonormality_error(params.l.basis()));
    let ve = variation_explained(x, params.l.basis())?;
    Ok(FitResult {
        params,
        z,
        nll_trace: trace,
        objective_mode: config.mode.objective_mode(),
        variation_explained: ve,
        converged,
        iterations,
        inner_iterations,
        wall_time: start.elapsed(),
        max_orthonormality_error: max_orth,
    })
}

fn check_monotone(before: f64, after: f64, what: impl FnOnce() -> String) -> Result<()> {
    if after > before + MONOTONE_SLACK * before.abs() {
        return Err(SpcaError::Numerical(format!(
            "{}: objective increased from {before:.15e} to {after:.15e}",
            what()
        )));
    }
    Ok(())
}
