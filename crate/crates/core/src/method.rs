//! One entry point for every method, producing a self-contained model that
//! maps raw rows to predictions.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{pca, rrr};
use crate::data::{variation_explained, Centering, Dataset, Task};
use crate::error::{Result, SpcaError};
use crate::grassmann::McgdOptions;
use crate::kernel::{kpca, CenteredKernel, KernelSpec};
use crate::model::{predict_from_embedding, solve_beta, Family, Prediction};
use crate::nuisance::Nuisance;
use crate::solver::{fit_matrices, Algorithm, FitConfig, Initialization, NuisanceMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lspca,
    Lrpca,
    Klspca,
    Klrpca,
    Pcr,
    Pcc,
    Kpcr,
    Kpcc,
    Rrr,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Lspca,
        Method::Lrpca,
        Method::Klspca,
        Method::Klrpca,
        Method::Pcr,
        Method::Pcc,
        Method::Kpcr,
        Method::Kpcc,
        Method::Rrr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lspca => "lspca",
            Method::Lrpca => "lrpca",
            Method::Klspca => "klspca",
            Method::Klrpca => "klrpca",
            Method::Pcr => "pcr",
            Method::Pcc => "pcc",
            Method::Kpcr => "kpcr",
            Method::Kpcc => "kpcc",
            Method::Rrr => "rrr",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Method::Lspca | Method::Klspca | Method::Pcr | Method::Kpcr | Method::Rrr => {
                Family::Gaussian
            }
            Method::Lrpca | Method::Klrpca | Method::Pcc | Method::Kpcc => Family::Categorical,
        }
    }

    pub fn task(self) -> Task {
        self.family().task()
    }

    pub fn is_kernel(self) -> bool {
        matches!(self, Method::Klspca | Method::Klrpca | Method::Kpcr | Method::Kpcc)
    }

    /// Whether the method trades prediction against reconstruction through `λ`.
    pub fn is_supervised_pca(self) -> bool {
        matches!(self, Method::Lspca | Method::Lrpca | Method::Klspca | Method::Klrpca)
    }

    /// The unsupervised-subspace baseline with the same family and kernel use.
    pub fn principal_component_baseline(self) -> Method {
        match (self.family(), self.is_kernel()) {
            (Family::Gaussian, false) => Method::Pcr,
            (Family::Gaussian, true) => Method::Kpcr,
            (Family::Categorical, false) => Method::Pcc,
            (Family::Categorical, true) => Method::Kpcc,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SpcaError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SpcaError::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct TrainSettings {
    pub method: Method,
    pub r: usize,
    /// Used by the supervised PCA methods only.
    pub mode: NuisanceMode,
    pub algorithm: Algorithm,
    /// Kernel methods; `None` means an RBF kernel with the median bandwidth.
    pub kernel: Option<KernelSpec>,
    pub lr_reg: f64,
    pub mcgd: Option<McgdOptions>,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub seed: u64,
}

impl TrainSettings {
    pub fn new(method: Method, r: usize) -> Self {
        TrainSettings {
            method,
            r,
            mode: NuisanceMode::Cv { lambda: 1.0 },
            algorithm: Algorithm::Alternating,
            kernel: None,
            lr_reg: 0.0,
            mcgd: None,
            outer_tol: 1e-8,
            max_outer: 100,
            seed: 0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.mode = NuisanceMode::Cv { lambda };
        self
    }

    pub fn with_mode(mut self, mode: NuisanceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            family: self.method.family(),
            algorithm: self.algorithm,
            mode: self.mode,
            r: self.r,
            outer_tol: self.outer_tol,
            max_outer: self.max_outer,
            mcgd: self.mcgd,
            lr_reg: self.lr_reg,
            init: Initialization::Pca,
            seed: self.seed,
        }
    }
}

/// How rows are mapped into the `r`-dimensional space.
#[derive(Debug, Clone)]
pub enum Embedding {
    /// `Z = XL` with `L` a `p×r` orthonormal basis.
    Linear(DMatrix<f64>),
    /// `Z = k̃(x, ·)L` with `L` an `n×r` orthonormal basis.
    Kernel {
        kernel: CenteredKernel,
        l: DMatrix<f64>,
    },
}

impl Embedding {
    pub fn basis(&self) -> &DMatrix<f64> {
        match self {
            Embedding::Linear(l) => l,
            Embedding::Kernel { l, .. } => l,
        }
    }

    /// Embed feature-centered rows.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Embedding::Linear(l) => {
                if x.ncols() != l.nrows() {
                    return Err(SpcaError::Dimension(format!(
                        "model expects {} features, got {}",
                        l.nrows(),
                        x.ncols()
                    )));
                }
                Ok(x * l)
            }
            Embedding::Kernel { kernel, l } => kernel.project_new(l, x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub method: Method,
    pub centering: Centering,
    pub embedding: Embedding,
    pub beta: DMatrix<f64>,
    /// Trade-off weight and shrinkage, absent for the baselines.
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub nuisance: Option<Nuisance>,
    pub feature_names: Option<Vec<String>>,
    pub response_names: Option<Vec<String>>,
}

impl FittedModel {
    pub fn family(&self) -> Family {
        self.method.family()
    }

    pub fn r(&self) -> usize {
        self.embedding.basis().ncols()
    }

    pub fn n_features(&self) -> usize {
        self.centering.x_means.len()
    }

    /// Embedding of raw rows.
    pub fn embed(&self, raw_x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.centering.apply_x(raw_x)?;
        self.embedding.apply(&x)
    }

    pub fn predict(&self, raw_x: &DMatrix<f64>) -> Result<Prediction> {
        let z = self.embed(raw_x)?;
        predict_from_embedding(self.family(), &z, &self.beta, self.centering.y_means.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: FittedModel,
    pub train_embedding: DMatrix<f64>,
    /// `‖XL‖²/‖X‖²`, or `‖K̃L‖²/‖K̃‖²` for kernel methods.
    pub variation_explained: f64,
    /// Objective per outer iteration (supervised PCA methods only).
    pub nll_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time: Duration,
}

impl Trained {
    pub fn objective(&self) -> Option<f64> {
        self.nll_trace.iter().cloned().reduce(f64::min)
    }
}

/// Fit `settings.method` on a centered dataset.
pub fn train(dataset: &Dataset, settings: &TrainSettings) -> Result<Trained> {
    let start = Instant::now();
    let method = settings.method;
    if method.task() != dataset.task {
        return Err(SpcaError::InvalidArgument(format!(
            "method {method} does not apply to {:?} data",
            dataset.task
        )));
    }
    let family = method.family();
    let kernel = if method.is_kernel() {
        let spec = settings.kernel.unwrap_or(KernelSpec {
            kind: crate::kernel::KernelKind::Rbf,
            bandwidth: None,
        });
        Some(CenteredKernel::new(&dataset.x, &spec)?)
    } else {
        None
    };
    let design = kernel.as_ref().map(|k| &k.k_tilde).unwrap_or(&dataset.x);
    let y = &dataset.y;

    let mut lambda = None;
    let mut gamma = None;
    let mut nuisance = None;
    let mut trace = Vec::new();
    let mut converged = true;
    let mut iterations = 0;
    let (l, beta) = match method {
        Method::Lspca | Method::Lrpca | Method::Klspca | Method::Klrpca => {
            let res = fit_matrices(design, y, &settings.fit_config())?;
            lambda = Some(res.params.lambda);
            gamma = Some(res.params.gamma);
            nuisance = res.params.nuisance;
            trace = res.nll_trace;
            converged = res.converged;
            iterations = res.iterations;
            (res.params.l.into_basis(), res.params.beta)
        }
        Method::Pcr | Method::Pcc => {
            let l = pca(design, settings.r)?.into_basis();
            let beta = solve_beta(family, design, y, &l, settings.lr_reg)?;
            (l, beta)
        }
        Method::Kpcr | Method::Kpcc => {
            let l = kpca(design, settings.r)?.into_basis();
            let beta = solve_beta(family, design, y, &l, settings.lr_reg)?;
            (l, beta)
        }
        Method::Rrr => {
            let rank = settings.r.min(y.ncols()).min(design.ncols());
            if rank < settings.r {
                log::info!("reduced-rank regression capped at rank {rank} by the response count");
            }
            let (l, beta) = rrr(design, y, rank)?;
            (l.into_basis(), beta)
        }
    };
    let train_embedding = design * &l;
    let ve = variation_explained(design, &l)?;
    let embedding = match kernel {
        Some(kernel) => Embedding::Kernel { kernel, l },
        None => Embedding::Linear(l),
    };
    let model = FittedModel {
        method,
        centering: dataset.centering.clone(),
        embedding,
        beta,
        lambda,
        gamma,
        nuisance,
        feature_names: dataset.feature_names.clone(),
        response_names: dataset.response_names.clone(),
    };
    Ok(Trained {
        model,
        train_embedding,
        variation_explained: ve,
        nll_trace: trace,
        converged,
        iterations,
        wall_time: start.elapsed(),
    })
}
