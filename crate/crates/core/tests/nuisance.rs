mod common;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spca::baselines::pca;
use spca::grassmann::GrassmannPoint;
use spca::linalg::{random_normal, random_orthonormal, logspace, qr_positive};
use spca::model::{full_nll, nll, solve_beta_ls, Family, ModelParams, ObjectiveMode};
use spca::nuisance::{cv_equivalent_lambda, update_params, Nuisance};
use spca::synthetic::{generate, SyntheticSpec};

use common::{centered, noisy_labels};

/// Full NLL written through the sufficient statistics `‖X‖²`, `‖XL‖²` and the
/// conditional loss, using `‖X − γXLL'‖² = ‖X‖² − γ(2 − γ)‖XL‖²` and
/// `γ(2 − γ) = α/(σ_x² + α)`.
struct Reduced {
    n: f64,
    p: f64,
    q: f64,
    r: f64,
    total: f64,
    inside: f64,
    loss: f64,
    gaussian: bool,
}

impl Reduced {
    fn new(family: Family, x: &DMatrix<f64>, y: &DMatrix<f64>, l: &DMatrix<f64>, beta: &DMatrix<f64>) -> Self {
        let z = x * l;
        let loss = spca::model::conditional_loss(family, &z, y, beta);
        Reduced {
            n: x.nrows() as f64,
            p: x.ncols() as f64,
            q: y.ncols() as f64,
            r: l.ncols() as f64,
            total: x.norm_squared(),
            inside: z.norm_squared(),
            loss,
            gaussian: family == Family::Gaussian,
        }
    }

    fn value(&self, sx: f64, a: f64, sy: f64) -> f64 {
        let y_part = if self.gaussian {
            self.loss / (2.0 * sy) + 0.5 * self.n * self.q * sy.ln()
        } else {
            self.loss
        };
        y_part
            + (self.total - a / (sx + a) * self.inside) / (2.0 * sx)
            + 0.5 * (self.n * (self.p - self.r) * sx.ln() + self.n * self.r * (sx + a).ln())
    }
}

/// Smallest full NLL over a 200-point-per-axis log grid in (σ_x², α, σ_y²)
/// spanning two decades either side of `centre`.
fn grid_minimum(
    family: Family,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    centre: &Nuisance,
) -> f64 {
    let red = Reduced::new(family, x, y, l, beta);
    let axis = |c: f64| logspace(c / 100.0, c * 100.0, 200);
    let sx = axis(centre.sigma_x2);
    let al = axis(centre.alpha.max(1e-3));
    let sy = match centre.sigma_y2 {
        Some(s) => axis(s),
        None => vec![1.0],
    };
    // the reduced form must agree with the library's full NLL
    for (i, j, k) in [(3, 50, 0), (120, 7, sy.len() - 1), (199, 199, sy.len() / 2)] {
        let nu = Nuisance { sigma_x2: sx[i], alpha: al[j], sigma_y2: centre.sigma_y2.map(|_| sy[k]) };
        let lib = full_nll(family, x, y, l, beta, &nu).unwrap();
        let oracle = red.value(sx[i], al[j], sy[k]);
        assert!((lib - oracle).abs() <= 1e-9 * lib.abs().max(1.0), "{lib} vs {oracle}");
    }
    let mut best = f64::INFINITY;
    for &s in &sx {
        for &a in &al {
            for &t in &sy {
                best = best.min(red.value(s, a, t));
            }
        }
    }
    best
}

fn near_principal_subspace(x: &DMatrix<f64>, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let l = pca(x, r).unwrap().into_basis();
    qr_positive(&(l + random_normal(x.ncols(), r, rng) * 0.05)).0
}

#[test]
fn closed_form_updates_beat_the_grid_for_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for trial in 0..3 {
        let spec = SyntheticSpec { n: 40, p: 6, r: 2, q: 1, alpha: 4.0, sigma_y2: 0.5, seed: 100 + trial, ..Default::default() };
        let raw = generate(&spec).unwrap().raw;
        let x = centered(raw.x);
        let y = centered(raw.y);
        let l = near_principal_subspace(&x, 2, &mut rng);
        let beta = solve_beta_ls(&x, &y, &l).unwrap();
        let nu = update_params(&x, &y, &l, &beta, 1.0, Family::Gaussian).unwrap();
        assert!(nu.alpha > 0.0);
        let ours = full_nll(Family::Gaussian, &x, &y, &l, &beta, &nu).unwrap();
        let grid = grid_minimum(Family::Gaussian, &x, &y, &l, &beta, &nu);
        assert!(ours <= grid + 1e-6, "trial {trial}: {ours} vs grid {grid}");
    }
}

#[test]
fn closed_form_updates_beat_the_grid_for_logistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let x = centered(random_normal(40, 6, &mut rng) * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0, 1.0, 0.8, 0.7])));
    let y = noisy_labels(&x, 3, 2.0, &mut rng);
    let l = near_principal_subspace(&x, 2, &mut rng);
    let mut beta = random_normal(2, 3, &mut rng);
    beta.column_mut(2).fill(0.0);
    let nu = update_params(&x, &y, &l, &beta, 1.0, Family::Categorical).unwrap();
    let ours = full_nll(Family::Categorical, &x, &y, &l, &beta, &nu).unwrap();
    let grid = grid_minimum(Family::Categorical, &x, &y, &l, &beta, &nu);
    assert!(ours <= grid + 1e-6, "{ours} vs grid {grid}");
}

#[test]
fn update_never_increases_the_likelihood_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = centered(random_normal(30, 5, &mut rng));
    let y = centered(random_normal(30, 2, &mut rng));
    let l = near_principal_subspace(&x, 2, &mut rng);
    let beta = solve_beta_ls(&x, &y, &l).unwrap();
    let nu = update_params(&x, &y, &l, &beta, 1.0, Family::Gaussian).unwrap();
    let at_update = full_nll(Family::Gaussian, &x, &y, &l, &beta, &nu).unwrap();
    for scale in [0.5, 0.9, 1.1, 2.0] {
        for (sx, a, sy) in [(scale, 1.0, 1.0), (1.0, scale, 1.0), (1.0, 1.0, scale)] {
            let other = Nuisance {
                sigma_x2: nu.sigma_x2 * sx,
                alpha: nu.alpha * a,
                sigma_y2: nu.sigma_y2.map(|s| s * sy),
            };
            assert!(at_update <= full_nll(Family::Gaussian, &x, &y, &l, &beta, &other).unwrap() + 1e-10);
        }
    }
}

#[test]
fn lambda_and_gamma_follow_the_noise_scales() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let x = centered(random_normal(30, 5, &mut rng));
    let y = centered(random_normal(30, 1, &mut rng));
    let l = near_principal_subspace(&x, 2, &mut rng);
    let beta = solve_beta_ls(&x, &y, &l).unwrap();
    let nu = update_params(&x, &y, &l, &beta, 1.0, Family::Gaussian).unwrap();
    let params = ModelParams::from_nuisance(Family::Gaussian, GrassmannPoint::new(l).unwrap(), beta, nu).unwrap();
    let gamma = 1.0 - (nu.sigma_x2 / (nu.sigma_x2 + nu.alpha)).sqrt();
    assert!((params.gamma - gamma).abs() <= 1e-12);
    assert!((params.lambda - nu.sigma_y2.unwrap() / nu.sigma_x2).abs() <= 1e-12 * params.lambda);
}

#[test]
fn equivalent_lambda_shifts_the_objective_by_a_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let x = centered(random_normal(25, 6, &mut rng));
    let y = centered(random_normal(25, 2, &mut rng));
    let (lambda, gamma) = (1.3, 0.4);
    let lambda_eq = cv_equivalent_lambda(lambda, gamma).unwrap();
    let beta = random_normal(2, 2, &mut rng);
    let mut diffs = Vec::new();
    for _ in 0..20 {
        let l = GrassmannPoint::new(random_orthonormal(6, 2, &mut rng)).unwrap();
        let a = ModelParams::new(Family::Gaussian, l.clone(), beta.clone(), lambda, gamma).unwrap();
        let b = ModelParams::new(Family::Gaussian, l, beta.clone(), lambda_eq, 1.0).unwrap();
        diffs.push(nll(&a, &x, &y, ObjectiveMode::Cv).unwrap() - nll(&b, &x, &y, ObjectiveMode::Cv).unwrap());
    }
    let spread = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - diffs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 1e-10 * diffs[0].abs().max(1.0), "spread {spread}");
}
