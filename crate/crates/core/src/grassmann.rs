//! Grassmann manifold geometry and manifold conjugate gradient descent.
//!
//! Points are stored as `p×r` matrices with orthonormal columns; two
//! representatives `L` and `LQ` (`Q` orthogonal) denote the same subspace.
//! Tangent vectors at `L` are `p×r` matrices `Δ` with `L'Δ = 0`, and the
//! metric is the trace inner product `⟨A, B⟩ = tr(A'B)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Result, SpcaError};
use crate::linalg::{inner, orthonormality_error, qr_positive, random_normal, thin_svd};

/// Largest `‖L'L − I‖_F` accepted for a point.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

/// Drift beyond which a geodesic step re-orthonormalises its result.
pub const REORTHONORMALIZE_AT: f64 = 1e-11;

/// An `r`-dimensional subspace of `R^p`, held by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint(DMatrix<f64>);

impl GrassmannPoint {
    /// Wrap a basis that is already orthonormal to within [`ORTHONORMALITY_TOL`].
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(SpcaError::Dimension(format!(
                "a {}×{} basis cannot represent a point on a Grassmannian",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let err = orthonormality_error(&basis);
        if !(err <= ORTHONORMALITY_TOL) {
            return Err(SpcaError::InvalidArgument(format!(
                "basis columns are not orthonormal (‖L'L − I‖_F = {err:e})"
            )));
        }
        Ok(GrassmannPoint(basis))
    }

    /// Orthonormal basis of the column span of `m` (QR, positive `R` diagonal).
    pub fn from_span(m: &DMatrix<f64>) -> Result<Self> {
        GrassmannPoint::new(crate::linalg::orthonormal_basis(m)?)
    }

    pub fn random<R: Rng + ?Sized>(p: usize, r: usize, rng: &mut R) -> Self {
        GrassmannPoint(crate::linalg::random_orthonormal(p, r, rng))
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.0
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }

    /// Manifold dimension `r(p − r)`.
    pub fn manifold_dim(&self) -> usize {
        self.rank() * (self.ambient_dim() - self.rank())
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    pub fn distance(&self, other: &GrassmannPoint) -> f64 {
        crate::linalg::chordal_distance(&self.0, &other.0)
    }
}

/// `(I − LL')M`: the orthogonal projection of `M` onto the tangent space at `L`.
pub fn tangent_project(l: &GrassmannPoint, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let basis = l.basis();
    if m.shape() != basis.shape() {
        return Err(SpcaError::Dimension(format!(
            "tangent vector is {:?} but the point is {:?}",
            m.shape(),
            basis.shape()
        )));
    }
    Ok(m - basis * basis.tr_mul(m))
}

/// Compact SVD of a tangent direction, kept so that a geodesic step and the
/// parallel transport along it share the same factors.
#[derive(Debug, Clone)]
pub struct GeodesicFrame {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl GeodesicFrame {
    pub fn new(direction: &DMatrix<f64>) -> Result<Self> {
        let svd = thin_svd(direction)?;
        Ok(GeodesicFrame {
            u: svd.u,
            sigma: svd.singular_values,
            v: svd.v,
        })
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().cloned().fold(0.0, f64::max)
    }

    fn cos_sin(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let r = self.sigma.len();
        let c = DMatrix::from_diagonal(&self.sigma.map(|s| (s * t).cos()));
        let s = DMatrix::from_diagonal(&self.sigma.map(|s| (s * t).sin()));
        debug_assert_eq!(c.nrows(), r);
        (c, s)
    }

    /// `L V cos(Σt) V' + U sin(Σt) V'`.
    fn step_raw(&self, l: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let (c, s) = self.cos_sin(t);
        let lv = l * &self.v;
        (lv * c + &self.u * s) * self.v.transpose()
    }
}

/// Result of moving along a geodesic: the new point and the `R` factor used
/// if the representative had to be re-orthonormalised (`None` otherwise).
struct Stepped {
    point: GrassmannPoint,
    correction: Option<DMatrix<f64>>,
}

fn step_along(l: &GrassmannPoint, frame: &GeodesicFrame, t: f64) -> Stepped {
    let raw = frame.step_raw(l.basis(), t);
    if orthonormality_error(&raw) > REORTHONORMALIZE_AT {
        let (q, r) = qr_positive(&raw);
        Stepped {
            point: GrassmannPoint(q),
            correction: Some(r),
        }
    } else {
        Stepped {
            point: GrassmannPoint(raw),
            correction: None,
        }
    }
}

/// Follow the geodesic from `L` with initial velocity `C` for time `t`.
pub fn geodesic_step(l: &GrassmannPoint, c: &DMatrix<f64>, t: f64) -> Result<GrassmannPoint> {
    if c.shape() != l.basis().shape() {
        return Err(SpcaError::Dimension(format!(
            "direction is {:?} but the point is {:?}",
            c.shape(),
            l.basis().shape()
        )));
    }
    if t == 0.0 || c.norm() == 0.0 {
        return Ok(l.clone());
    }
    let frame = GeodesicFrame::new(c)?;
    Ok(step_along(l, &frame, t).point)
}

/// Cost function over the Grassmannian with its Euclidean gradient `∂G/∂L`.
pub trait CostFunction {
    fn cost(&self, l: &DMatrix<f64>) -> Result<f64>;

    fn euclidean_gradient(&self, l: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    fn cost_and_gradient(&self, l: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        Ok((self.cost(l)?, self.euclidean_gradient(l)?))
    }
}

impl<C: CostFunction + ?Sized> CostFunction for &C {
    fn cost(&self, l: &DMatrix<f64>) -> Result<f64> {
        (**self).cost(l)
    }

    fn euclidean_gradient(&self, l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        (**self).euclidean_gradient(l)
    }

    fn cost_and_gradient(&self, l: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        (**self).cost_and_gradient(l)
    }
}

/// Riemannian gradient `(I − LL') ∂G/∂L`.
pub fn riemannian_gradient<C: CostFunction + ?Sized>(
    cost: &C,
    l: &GrassmannPoint,
) -> Result<DMatrix<f64>> {
    tangent_project(l, &cost.euclidean_gradient(l.basis())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McgdOptions {
    pub max_iters: usize,
    /// Stop once `‖grad G‖_F` falls to this value.
    pub grad_tol: f64,
    /// Stop once `|G_k − G_{k+1}| ≤ rel_tol · |G_k|`.
    pub rel_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Trial step for the first line search; later searches start from twice
    /// the previously accepted step.
    pub initial_step: Option<f64>,
}

impl Default for McgdOptions {
    fn default() -> Self {
        McgdOptions {
            max_iters: 500,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
            armijo_c: 1e-4,
            shrink: 0.5,
            max_backtracks: 50,
            initial_step: None,
        }
    }
}

impl McgdOptions {
    /// Defaults with the gradient tolerance scaled to the data, `1e-6·max(1, ‖X‖_F)`.
    pub fn scaled_to(x_norm: f64) -> Self {
        McgdOptions {
            grad_tol: 1e-6 * x_norm.max(1.0),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McgdStatus {
    GradientTolerance,
    ObjectiveStalled,
    /// No step along steepest descent achieved a representable decrease.
    PrecisionLimit,
    MaxIterations,
}

impl McgdStatus {
    pub fn converged(self) -> bool {
        self != McgdStatus::MaxIterations
    }
}

#[derive(Debug, Clone)]
pub struct McgdResult {
    pub point: GrassmannPoint,
    pub value: f64,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub status: McgdStatus,
    /// Largest `‖L'L − I‖_F` over all iterates.
    pub max_orthonormality_error: f64,
    /// Largest `‖L_k'C_k‖_F` (and `‖L_k'Δ_k‖_F`) over the stored directions.
    pub max_tangency_error: f64,
    /// Number of times the conjugate direction was replaced by steepest descent.
    pub restarts: usize,
}

struct LineSearch {
    point: GrassmannPoint,
    correction: Option<DMatrix<f64>>,
    value: f64,
    step: f64,
}

fn armijo<C: CostFunction + ?Sized>(
    cost: &C,
    l: &GrassmannPoint,
    frame: &GeodesicFrame,
    f0: f64,
    slope: f64,
    t_init: f64,
    opts: &McgdOptions,
    iter: usize,
) -> Result<Option<LineSearch>> {
    let mut t = t_init;
    for _ in 0..=opts.max_backtracks {
        let stepped = step_along(l, frame, t);
        let f = cost.cost(stepped.point.basis())?;
        if !f.is_finite() {
            // treat overflow as "too far" and keep shrinking
            log::debug!("mcgd iteration {iter}: non-finite trial value at t = {t:e}");
        } else if f <= f0 + opts.armijo_c * t * slope {
            return Ok(Some(LineSearch {
                point: stepped.point,
                correction: stepped.correction,
                value: f,
                step: t,
            }));
        }
        t *= opts.shrink;
    }
    Ok(None)
}

/// Manifold conjugate gradient descent on the Grassmannian.
///
/// Directions are Polak–Ribière conjugate gradients with parallel transport
/// along the geodesic of the previous step. The direction is reset to
/// steepest descent every `r(p − r)` iterations and whenever it fails to be
/// a descent direction. Steps use Armijo backtracking, so every accepted
/// iterate lowers the objective.
pub fn mcgd<C: CostFunction + ?Sized>(
    cost: &C,
    l0: &GrassmannPoint,
    opts: &McgdOptions,
) -> Result<McgdResult> {
    let mut l = l0.clone();
    let mut max_orth = l.orthonormality_error();
    let (mut f, egrad) = cost.cost_and_gradient(l.basis())?;
    check_finite_state(f, &egrad, 0)?;
    let mut grad = tangent_project(&l, &egrad)?;
    let mut gnorm = grad.norm();
    let mut trace = vec![f];
    let mut max_tangency = (l.basis().tr_mul(&grad)).norm();

    let reset_period = l.manifold_dim().max(1);
    let mut dir = -&grad;
    let mut prev_step: Option<f64> = None;
    let mut restarts = 0usize;

    if gnorm <= opts.grad_tol {
        return Ok(McgdResult {
            point: l,
            value: f,
            trace,
            iterations: 0,
            grad_norm: gnorm,
            status: McgdStatus::GradientTolerance,
            max_orthonormality_error: max_orth,
            max_tangency_error: max_tangency,
            restarts,
        });
    }

    let mut status = McgdStatus::MaxIterations;
    let mut iterations = 0;
    for k in 0..opts.max_iters {
        let mut slope = inner(&grad, &dir);
        if !(slope < 0.0) {
            dir = -&grad;
            slope = -gnorm * gnorm;
            restarts += 1;
        }
        max_tangency = max_tangency.max(l.basis().tr_mul(&dir).norm());

        let mut frame = GeodesicFrame::new(&dir)?;
        let mut search = {
            let t0 = initial_step(&frame, prev_step, opts);
            armijo(cost, &l, &frame, f, slope, t0, opts, k)?
        };
        if search.is_none() && restarts_possible(&dir, &grad) {
            dir = -&grad;
            slope = -gnorm * gnorm;
            restarts += 1;
            frame = GeodesicFrame::new(&dir)?;
            let t0 = initial_step(&frame, None, opts);
            search = armijo(cost, &l, &frame, f, slope, t0, opts, k)?;
        }
        let search = match search {
            Some(s) => s,
            None => {
                // A failed steepest-descent search is benign only when the
                // gradient sits at the square-root-epsilon level of G.
                if gnorm <= f64::EPSILON.sqrt() * f.abs() {
                    status = McgdStatus::PrecisionLimit;
                    iterations = k;
                    break;
                }
                return Err(SpcaError::Numerical(format!(
                    "mcgd iteration {k}: line search failed along steepest descent \
                     (G = {f:e}, ‖grad‖ = {gnorm:e})"
                )));
            }
        };

        let (c_mat, s_mat) = frame.cos_sin(search.step);
        let lv = l.basis() * &frame.v;
        let sigma = DMatrix::from_diagonal(&frame.sigma);
        let vt = frame.v.transpose();
        // parallel transport of the search direction and the old gradient
        let mut dir_tr = (-&lv * &s_mat + &frame.u * &c_mat) * &sigma * &vt;
        let a_k = &lv * &s_mat;
        let r = frame.sigma.len();
        let b_k = &frame.u * (DMatrix::<f64>::identity(r, r) - &c_mat);
        let mut grad_tr = &grad - (a_k + b_k) * frame.u.tr_mul(&grad);
        if let Some(rfac) = &search.correction {
            // representative changed from Q·R to Q: tangent vectors follow by R⁻¹
            let rinv = rfac.clone().try_inverse().ok_or_else(|| {
                SpcaError::Numerical(format!("mcgd iteration {k}: singular re-orthonormalisation"))
            })?;
            dir_tr *= &rinv;
            grad_tr *= &rinv;
        }

        let l_new = search.point;
        max_orth = max_orth.max(l_new.orthonormality_error());
        let egrad_new = cost.euclidean_gradient(l_new.basis())?;
        check_finite_state(search.value, &egrad_new, k + 1)?;
        let grad_new = tangent_project(&l_new, &egrad_new)?;
        let dir_tr = tangent_project(&l_new, &dir_tr)?;
        let grad_tr = tangent_project(&l_new, &grad_tr)?;
        max_tangency = max_tangency.max(l_new.basis().tr_mul(&grad_new).norm());

        let denom = inner(&grad, &grad);
        let d_k = if denom < 1e-300 {
            0.0
        } else {
            inner(&(&grad_new - &grad_tr), &grad_new) / denom
        };
        dir = if k % reset_period == 0 || d_k == 0.0 {
            -&grad_new
        } else {
            -&grad_new + dir_tr * d_k
        };

        let f_old = f;
        f = search.value;
        l = l_new;
        grad = grad_new;
        gnorm = grad.norm();
        prev_step = Some(search.step);
        trace.push(f);
        iterations = k + 1;

        if gnorm <= opts.grad_tol {
            status = McgdStatus::GradientTolerance;
            break;
        }
        log::trace!("mcgd {k}: f={f:.17e} step={:e} gnorm={gnorm:e} d_k={d_k:e}", search.step);
        if opts.rel_tol > 0.0 && (f_old - f).abs() <= opts.rel_tol * f_old.abs().max(f64::MIN_POSITIVE) {
            status = McgdStatus::ObjectiveStalled;
            break;
        }
    }

    Ok(McgdResult {
        point: l,
        value: f,
        trace,
        iterations,
        grad_norm: gnorm,
        status,
        max_orthonormality_error: max_orth,
        max_tangency_error: max_tangency,
        restarts,
    })
}

fn restarts_possible(dir: &DMatrix<f64>, grad: &DMatrix<f64>) -> bool {
    (dir + grad).norm() > 0.0
}

fn initial_step(frame: &GeodesicFrame, prev: Option<f64>, opts: &McgdOptions) -> f64 {
    let smax = frame.max_sigma();
    // angles beyond π/2 wrap around the Grassmannian
    let cap = std::f64::consts::FRAC_PI_2 / smax;
    let t = match prev {
        Some(t) => 2.0 * t,
        None => opts.initial_step.unwrap_or(0.1 / smax),
    };
    t.min(cap)
}

fn check_finite_state(f: f64, egrad: &DMatrix<f64>, iter: usize) -> Result<()> {
    if !f.is_finite() {
        return Err(SpcaError::Numerical(format!(
            "mcgd iteration {iter}: objective is not finite ({f})"
        )));
    }
    if egrad.iter().any(|v| !v.is_finite()) {
        return Err(SpcaError::Numerical(format!(
            "mcgd iteration {iter}: gradient has non-finite entries"
        )));
    }
    Ok(())
}

/// Relative error between the analytic directional derivative `⟨grad G, C⟩`
/// and the central difference of `G` along the geodesic through `L` with
/// velocity `C`, for each supplied tangent direction.
pub fn gradient_check<C: CostFunction + ?Sized>(
    cost: &C,
    l: &GrassmannPoint,
    directions: &[DMatrix<f64>],
    h: f64,
) -> Result<Vec<f64>> {
    let grad = riemannian_gradient(cost, l)?;
    directions
        .iter()
        .map(|dir| {
            let c = tangent_project(l, dir)?;
            let analytic = inner(&grad, &c);
            let plus = cost.cost(geodesic_step(l, &c, h)?.basis())?;
            let minus = cost.cost(geodesic_step(l, &c, -h)?.basis())?;
            let numeric = (plus - minus) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            Ok(if scale == 0.0 {
                0.0
            } else {
                (analytic - numeric).abs() / scale
            })
        })
        .collect()
}

/// Random unit-norm tangent directions at `L`.
pub fn random_tangents<R: Rng + ?Sized>(
    l: &GrassmannPoint,
    count: usize,
    rng: &mut R,
) -> Vec<DMatrix<f64>> {
    (0..count)
        .map(|_| {
            let m = random_normal(l.ambient_dim(), l.rank(), rng);
            let t = m.clone() - l.basis() * l.basis().tr_mul(&m);
            let norm = t.norm();
            t / norm
        })
        .collect()
}
