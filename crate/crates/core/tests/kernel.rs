mod common;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spca::baselines::pca;
use spca::data::{Dataset, Task};
use spca::kernel::{center_gram, gram, kpca, CenteredKernel, KernelSpec};
use spca::linalg::{chordal_distance, orthonormal_basis, random_normal, random_orthonormal};
use spca::method::{train, Method, TrainSettings};
use spca::model::Prediction;
use spca::solver::{fit_matrices, FitConfig, NuisanceMode};

use common::centered;

fn rms(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    ((a - b).norm_squared() / a.len() as f64).sqrt()
}

#[test]
fn rbf_gram_is_symmetric_with_unit_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_normal(12, 4, &mut rng);
    let k = gram(&x, &KernelSpec::rbf(1.3)).unwrap();
    assert!((&k - k.transpose()).amax() == 0.0);
    for i in 0..12 {
        assert!((k[(i, i)] - 1.0).abs() < 1e-15);
    }
}

#[test]
fn linear_gram_is_the_inner_product_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = centered(random_normal(10, 3, &mut rng));
    let k = gram(&x, &KernelSpec::linear()).unwrap();
    assert!((&k - &x * x.transpose()).amax() <= 1e-12);
}

#[test]
fn centering_matches_the_four_term_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_normal(15, 15, &mut rng);
    let k = &a * a.transpose();
    let n = 15.0;
    let row = |i: usize| (0..15).map(|j| k[(i, j)]).sum::<f64>() / n;
    let col = |j: usize| (0..15).map(|i| k[(i, j)]).sum::<f64>() / n;
    let all = k.sum() / (n * n);
    let oracle = DMatrix::from_fn(15, 15, |i, j| k[(i, j)] - row(i) - col(j) + all);
    assert!((center_gram(&k) - oracle).amax() <= 1e-12);
}

#[test]
fn centered_gram_has_zero_row_and_column_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random_normal(30, 5, &mut rng) * 2.0;
    for spec in [KernelSpec::rbf(1.0), KernelSpec::linear()] {
        let kt = CenteredKernel::new(&x, &spec).unwrap().k_tilde;
        let n = kt.nrows() as f64;
        for i in 0..kt.nrows() {
            assert!((kt.row(i).sum() / n).abs() <= 1e-10);
            assert!((kt.column(i).sum() / n).abs() <= 1e-10);
        }
    }
}

#[test]
fn linear_kernel_on_centered_data_needs_no_centering() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = centered(random_normal(20, 4, &mut rng));
    let k = gram(&x, &KernelSpec::linear()).unwrap();
    assert!((center_gram(&k) - k).amax() <= 1e-10);
}

#[test]
fn linear_kpca_spans_the_principal_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = centered(random_normal(25, 6, &mut rng));
    let ck = CenteredKernel::new(&x, &KernelSpec::linear()).unwrap();
    let l = kpca(&ck.k_tilde, 2).unwrap();
    let scores = &x * pca(&x, 2).unwrap().basis();
    let embedded = &ck.k_tilde * l.basis();
    let d = chordal_distance(&orthonormal_basis(&embedded).unwrap(), &orthonormal_basis(&scores).unwrap());
    assert!(d <= 1e-8, "distance {d}");
}

#[test]
fn kpca_of_a_diagonal_matrix_picks_the_largest_axes() {
    let k = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 5.0, 3.0, 0.5]));
    let l = kpca(&k, 2).unwrap();
    let b = l.basis();
    assert!((b[(1, 0)].abs() - 1.0).abs() < 1e-12);
    assert!((b[(2, 1)].abs() - 1.0).abs() < 1e-12);
}

#[test]
fn kpca_beats_random_subspaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_normal(20, 3, &mut rng);
    let ck = CenteredKernel::new(&x, &KernelSpec::rbf(1.5)).unwrap();
    let best = ck.variation_explained(kpca(&ck.k_tilde, 2).unwrap().basis()).unwrap();
    for _ in 0..50 {
        let l = random_orthonormal(20, 2, &mut rng);
        assert!(ck.variation_explained(&l).unwrap() <= best + 1e-12);
    }
}

#[test]
fn projecting_training_rows_reproduces_the_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_normal(18, 4, &mut rng);
    let ck = CenteredKernel::new(&x, &KernelSpec::rbf(2.0)).unwrap();
    let l = random_orthonormal(18, 3, &mut rng);
    let projected = ck.project_new(&l, &x).unwrap();
    assert!((projected - &ck.k_tilde * &l).amax() <= 1e-10);
}

#[test]
fn constant_kernel_projects_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // a huge bandwidth makes every kernel value one
    let x = random_normal(10, 2, &mut rng) * 1e-6;
    let ck = CenteredKernel::new(&x, &KernelSpec::rbf(1e6)).unwrap();
    let l = random_orthonormal(10, 2, &mut rng);
    let z = ck.project_new(&l, &random_normal(4, 2, &mut rng)).unwrap();
    assert!(z.amax() <= 1e-12);
}

#[test]
fn linear_projection_has_the_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = centered(random_normal(15, 4, &mut rng));
    let ck = CenteredKernel::new(&x, &KernelSpec::linear()).unwrap();
    let l = kpca(&ck.k_tilde, 2).unwrap().into_basis();
    let x_new = random_normal(3, 4, &mut rng);
    let oracle = &x_new * x.transpose() * &l;
    assert!((ck.project_new(&l, &x_new).unwrap() - oracle).amax() <= 1e-8);
}

#[test]
fn huge_lambda_reduces_to_kernel_pca() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_normal(30, 3, &mut rng);
    let y = centered(DMatrix::from_fn(30, 1, |i, _| x[(i, 0)].sin()));
    let ck = CenteredKernel::new(&x, &KernelSpec::rbf(1.0)).unwrap();
    let res = fit_matrices(&ck.k_tilde, &y, &FitConfig::new(spca::model::Family::Gaussian, NuisanceMode::Cv { lambda: 1e9 }, 2)).unwrap();
    let d = chordal_distance(res.params.l.basis(), kpca(&ck.k_tilde, 2).unwrap().basis());
    assert!(d <= 1e-3, "distance {d}");
}

/// The linear-kernel model and the linear model describe the same family of
/// predictors at both ends of the trade-off, where the PCA term either fixes
/// the subspace or vanishes.
#[test]
fn linear_kernel_matches_the_linear_model_at_the_extremes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (n, p) = (50, 5);
    let x = random_normal(n + 20, p, &mut rng);
    let w = random_normal(p, 1, &mut rng);
    let y = &x * w + random_normal(n + 20, 1, &mut rng) * 0.3;
    let train_x = x.rows(0, n).into_owned();
    let test_x = x.rows(n, 20).into_owned();
    let d = Dataset::center(train_x, y.rows(0, n).into_owned(), Task::Regression).unwrap();
    let ck = CenteredKernel::new(&d.x, &KernelSpec::linear()).unwrap();
    // match the PCA-term scale of the two designs
    let scale = d.x.norm_squared() / ck.k_tilde.norm_squared();
    for lambda in [1e-9, 1e9] {
        let linear = train(&d, &TrainSettings::new(Method::Lspca, 2).with_lambda(lambda)).unwrap();
        let kernel = train(
            &d,
            &TrainSettings::new(Method::Klspca, 2)
                .with_lambda(lambda * scale)
                .with_kernel(KernelSpec::linear()),
        )
        .unwrap();
        let (Prediction::Regression(a), Prediction::Regression(b)) =
            (linear.model.predict(&test_x).unwrap(), kernel.model.predict(&test_x).unwrap())
        else {
            panic!("expected regression predictions");
        };
        let err = rms(&a, &b);
        assert!(err <= 1e-4, "λ {lambda}: rms {err}");
    }
}
