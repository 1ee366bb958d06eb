//! Coefficient subproblems: least squares and multinomial logistic regression
//! on a fixed design.

use nalgebra::DMatrix;

use crate::error::{Result, SpcaError};
use crate::linalg::pinv_solve;

/// Gram matrices with a larger condition number go through the pseudoinverse.
pub const CHOLESKY_MAX_CONDITION: f64 = 1e12;

/// Least-squares coefficients `argmin_B ‖Y − ZB‖_F²`.
///
/// Uses the normal equations when `Z'Z` is well conditioned and the
/// minimum-norm pseudoinverse solution otherwise.
pub fn least_squares(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.nrows() != y.nrows() {
        return Err(SpcaError::Dimension(format!(
            "design has {} rows, response has {}",
            z.nrows(),
            y.nrows()
        )));
    }
    let gram = z.tr_mul(z);
    if gram.iter().all(|v| v.is_finite()) && gram.ncols() > 0 {
        let eig = gram.clone().symmetric_eigen();
        let hi = eig.eigenvalues.max();
        let lo = eig.eigenvalues.min();
        if lo > 0.0 && hi / lo < CHOLESKY_MAX_CONDITION {
            if let Some(ch) = gram.cholesky() {
                return Ok(ch.solve(&z.tr_mul(y)));
            }
        }
    }
    pinv_solve(z, y)
}

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax_rows(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = logits.clone();
    for mut row in out.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row.unscale_mut(s);
    }
    out
}

/// `−Σ_i Σ_j y_ij log softmax_j(logits_i)`.
pub fn cross_entropy(logits: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (row, yrow) in logits.row_iter().zip(y.row_iter()) {
        let m = row.max();
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for (v, t) in row.iter().zip(yrow.iter()) {
            if *t != 0.0 {
                total -= t * (v - lse);
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// Ridge weight: the objective gets `(reg/2)‖β‖_F²`.
    pub reg: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// `‖β‖_F` beyond this is taken as divergence under separation.
    pub max_norm: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            reg: 0.0,
            max_iters: 100,
            grad_tol: 1e-8,
            max_norm: 1e6,
        }
    }
}

impl LogisticOptions {
    pub fn with_reg(reg: f64) -> Self {
        LogisticOptions {
            reg,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    /// `r×q`, last column zero.
    pub beta: DMatrix<f64>,
    /// Regularised objective at `beta`.
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Regularised multinomial logistic objective and its gradient over the free
/// `r×(q−1)` block.
pub fn logistic_objective(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    reg: f64,
) -> (f64, DMatrix<f64>) {
    let logits = z * beta;
    let f = cross_entropy(&logits, y) + 0.5 * reg * beta.norm_squared();
    let probs = softmax_rows(&logits);
    let q = y.ncols();
    let g = z.tr_mul(&(probs - y)).columns(0, q - 1).into_owned()
        + beta.columns(0, q - 1) * reg;
    (f, g)
}

/// Damped Newton for `min_β −Σ log softmax(Zβ)_{y} + (reg/2)‖β‖²` with the last
/// class column of `β` pinned to zero.
pub fn multinomial_logistic(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    opts: &LogisticOptions,
) -> Result<LogisticFit> {
    let (n, r) = z.shape();
    let q = y.ncols();
    if y.nrows() != n {
        return Err(SpcaError::Dimension(format!(
            "design has {n} rows, labels have {}",
            y.nrows()
        )));
    }
    if q < 2 {
        return Err(SpcaError::Data("classification needs at least two classes".into()));
    }
    if !(opts.reg >= 0.0) {
        return Err(SpcaError::InvalidArgument(format!(
            "ridge weight {} must be nonnegative",
            opts.reg
        )));
    }
    let m = r * (q - 1);
    let mut beta = DMatrix::<f64>::zeros(r, q);
    let (mut f, mut g) = logistic_objective(z, y, &beta, opts.reg);
    let mut gnorm = g.norm();
    let mut iterations = 0;
    let mut converged = gnorm <= opts.grad_tol;

    while !converged && iterations < opts.max_iters {
        let probs = softmax_rows(&(z * &beta));
        let mut h = DMatrix::<f64>::zeros(m, m);
        for c in 0..q - 1 {
            for d in c..q - 1 {
                let mut zw = z.clone();
                for i in 0..n {
                    let w = probs[(i, c)] * (if c == d { 1.0 } else { 0.0 } - probs[(i, d)]);
                    zw.row_mut(i).scale_mut(w);
                }
                let block = z.tr_mul(&zw);
                h.view_mut((c * r, d * r), (r, r)).copy_from(&block);
                if c != d {
                    h.view_mut((d * r, c * r), (r, r)).copy_from(&block.transpose());
                }
            }
        }
        for i in 0..m {
            h[(i, i)] += opts.reg;
        }
        let gvec = DMatrix::from_column_slice(m, 1, g.as_slice());
        let step = newton_direction(&h, &gvec)?;
        let mut dir = DMatrix::<f64>::zeros(r, q);
        dir.columns_mut(0, q - 1)
            .copy_from_slice(step.as_slice());
        let slope = gvec.dot(&step);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=50 {
            let trial = &beta + &dir * t;
            let (ft, gt) = logistic_objective(z, y, &trial, opts.reg);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((b, ft, gt)) = accepted else {
            log::debug!("logistic Newton: no decrease at iteration {iterations}, ‖g‖ = {gnorm:e}");
            break;
        };
        beta = b;
        f = ft;
        g = gt;
        gnorm = g.norm();
        if beta.norm() > opts.max_norm {
            return Err(separation_error(beta.norm()));
        }
        converged = gnorm <= opts.grad_tol;
    }

    if opts.reg == 0.0 {
        // at an unregularised optimum some sample has true-class probability
        // at most one half unless the classes are separable
        let probs = softmax_rows(&(z * &beta));
        let worst = probs
            .row_iter()
            .zip(y.row_iter())
            .map(|(p, t)| 1.0 - p.dot(&t))
            .fold(0.0, f64::max);
        if n > 0 && worst < 1e-6 {
            return Err(separation_error(beta.norm()));
        }
    }

    Ok(LogisticFit {
        beta,
        objective: f,
        grad_norm: gnorm,
        iterations,
        converged,
    })
}

fn separation_error(norm: f64) -> SpcaError {
    SpcaError::Numerical(format!(
        "logistic coefficients diverge (‖β‖ = {norm:e}); the classes are separable \
         in the reduced space, use a positive ridge weight"
    ))
}

fn newton_direction(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = h.nrows();
    let mut floor = 0.0;
    for _ in 0..12 {
        let mut hf = h.clone();
        for i in 0..m {
            hf[(i, i)] += floor;
        }
        if let Some(ch) = hf.cholesky() {
            return Ok(-ch.solve(g));
        }
        floor = if floor == 0.0 { 1e-8 } else { floor * 100.0 };
    }
    Err(SpcaError::Numerical(
        "logistic Hessian is not positive definite even after damping".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::one_hot;
    use crate::linalg::random_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthonormal_design_projects() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = crate::linalg::random_orthonormal(15, 3, &mut rng);
        let y = random_normal(15, 2, &mut rng);
        let b = least_squares(&z, &y).unwrap();
        assert!((b - z.tr_mul(&y)).norm() < 1e-10);
        let zero = least_squares(&z, &DMatrix::zeros(15, 2)).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn rank_deficient_design_uses_min_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_normal(10, 1, &mut rng);
        let mut z = DMatrix::zeros(10, 2);
        z.column_mut(0).copy_from(&a.column(0));
        z.column_mut(1).copy_from(&a.column(0));
        let y = random_normal(10, 1, &mut rng);
        let b = least_squares(&z, &y).unwrap();
        assert!((b[(0, 0)] - b[(1, 0)]).abs() < 1e-10);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = DMatrix::from_row_slice(2, 3, &[1000.0, 0.0, -1000.0, 1.0, 2.0, 3.0]);
        let p = softmax_rows(&logits);
        for row in p.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn symmetric_classes_give_zero_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let half = random_normal(10, 2, &mut rng);
        let mut z = DMatrix::zeros(20, 2);
        z.rows_mut(0, 10).copy_from(&half);
        z.rows_mut(10, 10).copy_from(&half);
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let y = one_hot(&labels, 2).unwrap();
        let fit = multinomial_logistic(&z, &y, &LogisticOptions::default()).unwrap();
        assert!(fit.beta.norm() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn separable_classes_are_reported() {
        let z = DMatrix::from_column_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = one_hot(&[0, 0, 0, 1, 1, 1], 2).unwrap();
        let err = multinomial_logistic(&z, &y, &LogisticOptions::default()).unwrap_err();
        assert!(err.is_numerical());
        let fit = multinomial_logistic(&z, &y, &LogisticOptions::with_reg(1e-2)).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.beta[(0, 1)], 0.0);
    }
}
