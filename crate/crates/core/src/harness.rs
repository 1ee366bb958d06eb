//! Experiment protocol: repeated train/test splits, k-fold cross-validation
//! over the hyperparameter grid, refits, metrics and λ sweeps.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, labels_of, CenterOptions, Dataset, RawData, SplitPlan, Task};
use crate::error::{Result, SpcaError};
use crate::kernel::{median_bandwidth, CenteredKernel, KernelKind, KernelSpec};
use crate::linalg::{frob2, logspace};
use crate::method::{train, Embedding, Method, TrainSettings, Trained};
use crate::model::{Family, Prediction};
use crate::solver::{Algorithm, NuisanceMode};

/// Mean squared error over all entries (regression) or the misclassification
/// rate of the row argmax (classification).
pub fn metrics(y_hat: &DMatrix<f64>, y_true: &DMatrix<f64>, task: Task) -> Result<f64> {
    if y_hat.shape() != y_true.shape() {
        return Err(SpcaError::Dimension(format!(
            "predictions are {}×{}, targets {}×{}",
            y_hat.nrows(),
            y_hat.ncols(),
            y_true.nrows(),
            y_true.ncols()
        )));
    }
    if y_true.is_empty() {
        return Err(SpcaError::Data("no samples to score".into()));
    }
    match task {
        Task::Regression => Ok(frob2(&(y_hat - y_true)) / y_true.len() as f64),
        Task::Classification => {
            let a = labels_of(y_hat);
            let b = labels_of(y_true);
            Ok(misclassification(&a, &b))
        }
    }
}

fn misclassification(a: &[usize], b: &[usize]) -> f64 {
    let wrong = a.iter().zip(b).filter(|(u, v)| u != v).count();
    wrong as f64 / a.len() as f64
}

/// Error of a prediction against raw targets (one-hot for classification).
pub fn prediction_error(pred: &Prediction, y_true: &DMatrix<f64>, task: Task) -> Result<f64> {
    match (pred, task) {
        (Prediction::Regression(y), Task::Regression) => metrics(y, y_true, task),
        (Prediction::Classification { labels, .. }, Task::Classification) => {
            if labels.len() != y_true.nrows() {
                return Err(SpcaError::Dimension("prediction count mismatch".into()));
            }
            if labels.is_empty() {
                return Err(SpcaError::Data("no samples to score".into()));
            }
            Ok(misclassification(labels, &labels_of(y_true)))
        }
        _ => Err(SpcaError::InvalidArgument(
            "prediction kind does not match the task".into(),
        )),
    }
}

/// Loss of the all-zero coefficient model divided by `‖X‖_F²`: the `λ` at
/// which both terms of the objective start on the same scale.
pub fn lambda_scale(x: &DMatrix<f64>, y: &DMatrix<f64>, family: Family) -> Result<f64> {
    let xn = frob2(x);
    if !(xn > 0.0) {
        return Err(SpcaError::Data("predictor matrix is zero".into()));
    }
    let loss0 = match family {
        Family::Gaussian => frob2(y),
        Family::Categorical => y.nrows() as f64 * (y.ncols() as f64).ln(),
    };
    if !(loss0 > 0.0) {
        return Ok(1.0 / xn);
    }
    Ok(loss0 / xn)
}

/// `λ` values to try: multiples of [`lambda_scale`] or absolute values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaGrid {
    Relative(Vec<f64>),
    Absolute(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Relative(logspace(1e-4, 1e4, 20))
    }
}

impl LambdaGrid {
    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    pub fn values(&self) -> &[f64] {
        match self {
            LambdaGrid::Relative(v) | LambdaGrid::Absolute(v) => v,
        }
    }

    pub fn resolve(&self, value: f64, design: &DMatrix<f64>, y: &DMatrix<f64>, family: Family) -> Result<f64> {
        match self {
            LambdaGrid::Absolute(_) => Ok(value),
            LambdaGrid::Relative(_) => Ok(value * lambda_scale(design, y, family)?),
        }
    }
}

/// Bandwidths to try for RBF kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthGrid {
    /// Multiples of the median pairwise distance of the training rows.
    Relative(Vec<f64>),
    Absolute(Vec<f64>),
}

impl Default for BandwidthGrid {
    fn default() -> Self {
        BandwidthGrid::Relative(vec![0.25, 0.5, 1.0, 2.0, 4.0])
    }
}

impl BandwidthGrid {
    pub fn values(&self) -> &[f64] {
        match self {
            BandwidthGrid::Relative(v) | BandwidthGrid::Absolute(v) => v,
        }
    }

    fn resolve(&self, value: f64, x: &DMatrix<f64>) -> Result<f64> {
        match self {
            BandwidthGrid::Absolute(_) => Ok(value),
            BandwidthGrid::Relative(_) => Ok(value * median_bandwidth(x)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RPolicy {
    Fixed(usize),
    Cv(Vec<usize>),
}

impl RPolicy {
    pub fn values(&self) -> Vec<usize> {
        match self {
            RPolicy::Fixed(r) => vec![*r],
            RPolicy::Cv(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Cv,
    Mle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub methods: Vec<Method>,
    pub r: RPolicy,
    pub lambda_grid: LambdaGrid,
    pub bandwidth_grid: BandwidthGrid,
    pub kernel: KernelKind,
    pub mode: ModeChoice,
    pub algorithm: Algorithm,
    pub split: SplitPlan,
    pub lr_reg: f64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            methods: vec![Method::Lspca, Method::Pcr],
            r: RPolicy::Fixed(2),
            lambda_grid: LambdaGrid::default(),
            bandwidth_grid: BandwidthGrid::default(),
            kernel: KernelKind::Rbf,
            mode: ModeChoice::Cv,
            algorithm: Algorithm::Alternating,
            split: SplitPlan::default(),
            lr_reg: 0.0,
            threads: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self, task: Task) -> Result<()> {
        self.split.validate()?;
        if self.methods.is_empty() {
            return Err(SpcaError::InvalidArgument("no methods in the plan".into()));
        }
        for m in &self.methods {
            if m.task() != task {
                return Err(SpcaError::InvalidArgument(format!(
                    "method {m} does not apply to {task:?} data"
                )));
            }
        }
        if self.r.values().is_empty() || self.r.values().contains(&0) {
            return Err(SpcaError::InvalidArgument("r grid must be nonempty and positive".into()));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.values().iter().any(|l| !(*l > 0.0)) {
            return Err(SpcaError::InvalidArgument("λ grid must be nonempty and positive".into()));
        }
        if self.bandwidth_grid.values().is_empty()
            || self.bandwidth_grid.values().iter().any(|b| !(*b > 0.0))
        {
            return Err(SpcaError::InvalidArgument(
                "bandwidth grid must be nonempty and positive".into(),
            ));
        }
        Ok(())
    }

    /// Hyperparameter candidates of one method, in tie-break order
    /// (smallest λ, then bandwidth, then r).
    pub fn candidates(&self, method: Method) -> Vec<Candidate> {
        let lambdas: Vec<Option<f64>> = if method.is_supervised_pca() && self.mode == ModeChoice::Cv {
            let mut v = self.lambda_grid.values().to_vec();
            v.sort_by(f64::total_cmp);
            v.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let bandwidths: Vec<Option<f64>> = if method.is_kernel() && self.kernel == KernelKind::Rbf {
            let mut v = self.bandwidth_grid.values().to_vec();
            v.sort_by(f64::total_cmp);
            v.into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let mut rs = self.r.values();
        rs.sort_unstable();
        rs.dedup();
        let mut out = Vec::new();
        for l in &lambdas {
            for b in &bandwidths {
                for r in &rs {
                    out.push(Candidate {
                        r: *r,
                        lambda: *l,
                        bandwidth: *b,
                    });
                }
            }
        }
        out
    }

    fn mode_label(&self, method: Method) -> &'static str {
        match (method.is_supervised_pca(), self.mode) {
            (false, _) => "none",
            (true, ModeChoice::Cv) => "cv",
            (true, ModeChoice::Mle) => "mle",
        }
    }

    /// Settings for one fit on the given training data.
    fn settings(&self, method: Method, cand: &Candidate, train: &Dataset, seed: u64) -> Result<TrainSettings> {
        let mut s = TrainSettings::new(method, cand.r);
        s.algorithm = if method.family() == Family::Gaussian {
            self.algorithm
        } else {
            Algorithm::Alternating
        };
        s.lr_reg = self.lr_reg;
        s.seed = seed;
        if method.is_kernel() {
            s.kernel = Some(match (self.kernel, cand.bandwidth) {
                (KernelKind::Linear, _) => KernelSpec::linear(),
                (KernelKind::Rbf, Some(b)) => KernelSpec::rbf(self.bandwidth_grid.resolve(b, &train.x)?),
                (KernelKind::Rbf, None) => KernelSpec {
                    kind: KernelKind::Rbf,
                    bandwidth: None,
                },
            });
        }
        s.mode = match (self.mode, cand.lambda) {
            (ModeChoice::Mle, _) => NuisanceMode::Mle,
            (ModeChoice::Cv, Some(l)) => {
                let lambda = if method.is_kernel() {
                    let k = CenteredKernel::new(&train.x, s.kernel.as_ref().expect("kernel set"))?;
                    self.lambda_grid.resolve(l, &k.k_tilde, &train.y, method.family())?
                } else {
                    self.lambda_grid.resolve(l, &train.x, &train.y, method.family())?
                };
                NuisanceMode::Cv { lambda }
            }
            (ModeChoice::Cv, None) => NuisanceMode::Cv { lambda: 1.0 },
        };
        Ok(s)
    }
}

/// One point of a method's hyperparameter grid, in plan units (relative
/// multipliers when the grids are relative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub r: usize,
    pub lambda: Option<f64>,
    pub bandwidth: Option<f64>,
}

/// Result of one refit evaluated on its held-out test set. Equality ignores
/// `wall_time`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: Method,
    pub mode: String,
    pub repeat: usize,
    pub r: usize,
    /// Absolute trade-off weight used by the refit.
    pub lambda: Option<f64>,
    pub bandwidth: Option<f64>,
    pub cv_error: Option<f64>,
    pub test_error: f64,
    pub train_error: f64,
    pub variation_explained: f64,
    pub seed: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for EvalRecord {
    fn eq(&self, o: &Self) -> bool {
        self.method == o.method
            && self.mode == o.mode
            && self.repeat == o.repeat
            && self.r == o.r
            && self.lambda == o.lambda
            && self.bandwidth == o.bandwidth
            && self.cv_error == o.cv_error
            && self.test_error == o.test_error
            && self.train_error == o.train_error
            && self.variation_explained == o.variation_explained
            && self.seed == o.seed
    }
}

/// A cell that could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub method: Method,
    pub repeat: usize,
    /// `None` for the final refit, otherwise the CV fold.
    pub fold: Option<usize>,
    pub candidate: Candidate,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_test_error: f64,
    pub sd_test_error: f64,
    pub se_test_error: f64,
    pub mean_train_error: f64,
    pub mean_variation_explained: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<EvalRecord>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<MethodSummary>,
}

struct Evaluated {
    trained: Trained,
    train_error: f64,
    test_error: f64,
}

fn fit_and_score(
    raw: &RawData,
    train_idx: &[usize],
    test_idx: &[usize],
    plan: &ExperimentPlan,
    method: Method,
    cand: &Candidate,
    seed: u64,
    center: CenterOptions,
) -> Result<Evaluated> {
    let train_raw = raw.subset(train_idx);
    let train_ds = Dataset::from_raw(&train_raw, center)?;
    let settings = plan.settings(method, cand, &train_ds, seed)?;
    let trained = train(&train_ds, &settings)?;
    let train_pred = trained.model.predict(&train_raw.x)?;
    let train_error = prediction_error(&train_pred, &train_raw.y, raw.task)?;
    let test_raw = raw.subset(test_idx);
    let test_pred = trained.model.predict(&test_raw.x)?;
    let test_error = prediction_error(&test_pred, &test_raw.y, raw.task)?;
    Ok(Evaluated {
        trained,
        train_error,
        test_error,
    })
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SpcaError::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Run the full protocol. Every grid cell is fitted independently with a seed
/// derived from the master seed and its coordinates, so results do not depend
/// on scheduling.
pub fn run_experiment(raw: &RawData, plan: &ExperimentPlan, center: CenterOptions) -> Result<ExperimentOutcome> {
    plan.validate(raw.task)?;
    let splits = (0..plan.split.n_repeats)
        .map(|rep| plan.split.split(raw.n(), rep))
        .collect::<Result<Vec<_>>>()?;
    let master = plan.split.seed;

    // (repeat, method index, candidate index, fold)
    let mut cv_cells = Vec::new();
    for (rep, _) in splits.iter().enumerate() {
        for (mi, &m) in plan.methods.iter().enumerate() {
            let cands = plan.candidates(m);
            if cands.len() < 2 {
                continue;
            }
            for ci in 0..cands.len() {
                for k in 0..plan.split.n_folds {
                    cv_cells.push((rep, mi, ci, k));
                }
            }
        }
    }
    let cv_results: Vec<Result<f64>> = with_pool(plan.threads, || {
        cv_cells
            .par_iter()
            .map(|&(rep, mi, ci, k)| {
                let m = plan.methods[mi];
                let cand = plan.candidates(m)[ci];
                let split = &splits[rep];
                let seed = derive_seed(master, &[rep as u64, mi as u64, ci as u64, k as u64 + 1]);
                fit_and_score(raw, &split.fold_train(k), &split.folds[k], plan, m, &cand, seed, center)
                    .map(|e| e.test_error)
            })
            .collect()
    })?;

    let mut failures = Vec::new();
    // mean CV error per (repeat, method, candidate); a candidate with any
    // failed fold is not eligible
    let mut cv_table: BTreeMap<(usize, usize, usize), (f64, usize, bool)> = BTreeMap::new();
    for (&(rep, mi, ci, k), res) in cv_cells.iter().zip(cv_results) {
        let entry = cv_table.entry((rep, mi, ci)).or_insert((0.0, 0, true));
        match res {
            Ok(err) => {
                entry.0 += err;
                entry.1 += 1;
            }
            Err(e) => {
                entry.2 = false;
                let m = plan.methods[mi];
                failures.push(CellFailure {
                    method: m,
                    repeat: rep,
                    fold: Some(k),
                    candidate: plan.candidates(m)[ci],
                    error: e.to_string(),
                });
            }
        }
    }

    let mut final_cells = Vec::new();
    for rep in 0..splits.len() {
        for (mi, &m) in plan.methods.iter().enumerate() {
            let cands = plan.candidates(m);
            let chosen = if cands.len() < 2 {
                Some((0, None))
            } else {
                // candidates are already in tie-break order, so the first
                // strict minimum wins
                let mut best: Option<(usize, f64)> = None;
                for ci in 0..cands.len() {
                    if let Some(&(sum, cnt, ok)) = cv_table.get(&(rep, mi, ci)) {
                        if ok && cnt > 0 {
                            let mean = sum / cnt as f64;
                            if best.is_none_or(|(_, b)| mean < b) {
                                best = Some((ci, mean));
                            }
                        }
                    }
                }
                best.map(|(ci, e)| (ci, Some(e)))
            };
            match chosen {
                Some((ci, cv_err)) => final_cells.push((rep, mi, ci, cv_err)),
                None => failures.push(CellFailure {
                    method: m,
                    repeat: rep,
                    fold: None,
                    candidate: cands[0],
                    error: "every candidate failed during cross-validation".into(),
                }),
            }
        }
    }

    let final_results: Vec<Result<(EvalRecord, Duration)>> = with_pool(plan.threads, || {
        final_cells
            .par_iter()
            .map(|&(rep, mi, ci, cv_err)| {
                let m = plan.methods[mi];
                let cand = plan.candidates(m)[ci];
                let split = &splits[rep];
                let seed = derive_seed(master, &[rep as u64, mi as u64, ci as u64, 0]);
                let start = Instant::now();
                let ev = fit_and_score(raw, &split.train, &split.test, plan, m, &cand, seed, center)?;
                let model = &ev.trained.model;
                let bandwidth = match &model.embedding {
                    Embedding::Kernel { kernel, .. } => kernel.spec.bandwidth,
                    Embedding::Linear(_) => None,
                };
                let elapsed = start.elapsed();
                Ok((
                    EvalRecord {
                        method: m,
                        mode: plan.mode_label(m).to_string(),
                        repeat: rep,
                        r: model.r(),
                        lambda: if m.is_supervised_pca() { model.lambda } else { None },
                        bandwidth,
                        cv_error: cv_err,
                        test_error: ev.test_error,
                        train_error: ev.train_error,
                        variation_explained: ev.trained.variation_explained,
                        seed,
                        wall_time: elapsed,
                    },
                    elapsed,
                ))
            })
            .collect()
    })?;

    let mut records = Vec::new();
    for (&(rep, mi, ci, _), res) in final_cells.iter().zip(final_results) {
        match res {
            Ok((rec, _)) => records.push(rec),
            Err(e) => {
                let m = plan.methods[mi];
                failures.push(CellFailure {
                    method: m,
                    repeat: rep,
                    fold: None,
                    candidate: plan.candidates(m)[ci],
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = summarize(&plan.methods, &records, &failures);
    Ok(ExperimentOutcome {
        records,
        failures,
        summary,
    })
}

/// Mean, sample standard deviation and standard error of the test error per
/// method. Refit failures are counted, not averaged.
pub fn summarize(methods: &[Method], records: &[EvalRecord], failures: &[CellFailure]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&m| {
            let recs: Vec<&EvalRecord> = records.iter().filter(|r| r.method == m).collect();
            let n = recs.len();
            let mean = |f: &dyn Fn(&EvalRecord) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    recs.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            let mean_test = mean(&|r| r.test_error);
            let sd = if n > 1 {
                (recs.iter().map(|r| (r.test_error - mean_test).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            MethodSummary {
                method: m,
                n_ok: n,
                n_failed: failures
                    .iter()
                    .filter(|f| f.method == m && f.fold.is_none())
                    .count(),
                mean_test_error: mean_test,
                sd_test_error: sd,
                se_test_error: if n > 0 { sd / (n as f64).sqrt() } else { f64::NAN },
                mean_train_error: mean(&|r| r.train_error),
                mean_variation_explained: mean(&|r| r.variation_explained),
            }
        })
        .collect()
}

/// One operating point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub method: Method,
    pub lambda: Option<f64>,
    pub train_variation_explained: f64,
    pub train_error: f64,
    pub test_variation_explained: f64,
    pub test_error: f64,
}

#[derive(Debug, Clone)]
pub struct ParetoSweep {
    /// One entry per λ, in grid order; failed fits carry the error text.
    pub points: Vec<std::result::Result<ParetoPoint, String>>,
    pub lambdas: Vec<f64>,
    /// PCR/PCC (or kernel counterpart) at the same `r`.
    pub baseline: ParetoPoint,
    /// Reduced-rank regression (linear regression only).
    pub rrr: Option<ParetoPoint>,
}

/// Variation explained of held-out rows in the model's embedding space.
fn heldout_variation_explained(model: &crate::method::FittedModel, raw_x: &DMatrix<f64>) -> Result<f64> {
    let x = model.centering.apply_x(raw_x)?;
    match &model.embedding {
        Embedding::Linear(l) => crate::data::variation_explained(&x, l),
        Embedding::Kernel { kernel, l } => {
            let k = kernel.centered_rows(&x)?;
            let total = frob2(&k);
            if !(total > 0.0) {
                return Err(SpcaError::Data("held-out kernel rows are zero".into()));
            }
            Ok(frob2(&(k * l)) / total)
        }
    }
}

fn sweep_point(trained: &Trained, train_raw: &RawData, test_raw: &RawData, lambda: Option<f64>) -> Result<ParetoPoint> {
    let model = &trained.model;
    let task = train_raw.task;
    let train_error = prediction_error(&model.predict(&train_raw.x)?, &train_raw.y, task)?;
    let test_error = prediction_error(&model.predict(&test_raw.x)?, &test_raw.y, task)?;
    Ok(ParetoPoint {
        method: model.method,
        lambda,
        train_variation_explained: trained.variation_explained,
        train_error,
        test_variation_explained: heldout_variation_explained(model, &test_raw.x)?,
        test_error,
    })
}

/// Fit `base.method` once per λ and score each fit on the training and test
/// rows. `lambdas` are absolute weights.
pub fn pareto_sweep(
    train_raw: &RawData,
    test_raw: &RawData,
    base: &TrainSettings,
    lambdas: &[f64],
    center: CenterOptions,
) -> Result<ParetoSweep> {
    if !base.method.is_supervised_pca() {
        return Err(SpcaError::InvalidArgument(format!(
            "{} has no trade-off parameter to sweep",
            base.method
        )));
    }
    let train_ds = Dataset::from_raw(train_raw, center)?;
    let points: Vec<std::result::Result<ParetoPoint, String>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let settings = base.clone().with_lambda(lambda);
            train(&train_ds, &settings)
                .and_then(|t| sweep_point(&t, train_raw, test_raw, Some(lambda)))
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut bs = base.clone();
    bs.method = base.method.principal_component_baseline();
    let baseline = sweep_point(&train(&train_ds, &bs)?, train_raw, test_raw, None)?;
    let rrr = if base.method == Method::Lspca {
        let mut rs = base.clone();
        rs.method = Method::Rrr;
        Some(sweep_point(&train(&train_ds, &rs)?, train_raw, test_raw, None)?)
    } else {
        None
    };
    Ok(ParetoSweep {
        points,
        lambdas: lambdas.to_vec(),
        baseline,
        rrr,
    })
}
