mod common;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spca::baselines::{pca, pcr_pcc, rrr};
use spca::data::{labels_of, Dataset, Task};
use spca::linalg::{chordal_distance, pinv_solve, random_normal, random_orthonormal};
use spca::method::{train, Method, TrainSettings};
use spca::model::{Family, Prediction};

use common::{centered, random_labels};

fn reconstruction(x: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    (x - x * l * l.transpose()).norm_squared()
}

#[test]
fn recovers_the_dominant_axes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scales = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
    let x = centered(random_normal(300, 3, &mut rng) * scales);
    let l = pca(&x, 2).unwrap();
    let axes = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let d = chordal_distance(l.basis(), &axes);
    assert!(d <= 0.05, "distance {d}");
}

#[test]
fn full_rank_reconstructs_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = centered(random_normal(20, 5, &mut rng));
    assert!(reconstruction(&x, pca(&x, 5).unwrap().basis()) <= 1e-10);
}

#[test]
fn rotating_the_data_rotates_the_subspace() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = centered(random_normal(30, 6, &mut rng));
    let rot = random_orthonormal(6, 6, &mut rng);
    let direct = pca(&(&x * &rot), 3).unwrap();
    let mapped = rot.transpose() * pca(&x, 3).unwrap().basis();
    let d = chordal_distance(direct.basis(), &mapped);
    assert!(d <= 1e-8, "distance {d}");
}

#[test]
fn pca_beats_random_subspaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = centered(random_normal(40, 7, &mut rng));
    let best = reconstruction(&x, pca(&x, 3).unwrap().basis());
    for _ in 0..100 {
        assert!(best <= reconstruction(&x, &random_orthonormal(7, 3, &mut rng)) + 1e-10);
    }
}

#[test]
fn full_rank_regression_is_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = centered(random_normal(30, 4, &mut rng));
    let y = centered(random_normal(30, 2, &mut rng));
    let fit = pcr_pcc(&x, &y, Family::Gaussian, 4, 0.0).unwrap();
    let ols = &x * pinv_solve(&x, &y).unwrap();
    assert!((&fit.z * &fit.beta - ols).amax() <= 1e-8);
}

#[test]
fn pcr_matches_lspca_with_a_dominant_reconstruction_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..3 {
        let x = random_normal(60, 6, &mut rng);
        let y = &x * random_normal(6, 1, &mut rng) + random_normal(60, 1, &mut rng) * 0.2;
        let d = Dataset::center(x.rows(0, 40).into_owned(), y.rows(0, 40).into_owned(), Task::Regression).unwrap();
        let test_x = x.rows(40, 20).into_owned();
        let test_y = y.rows(40, 20).into_owned();
        let mse = |m: Method, lambda: f64| {
            let t = train(&d, &TrainSettings::new(m, 2).with_lambda(lambda)).unwrap();
            let Prediction::Regression(p) = t.model.predict(&test_x).unwrap() else { unreachable!() };
            (p - &test_y).norm_squared() / 20.0
        };
        let (a, b) = (mse(Method::Pcr, 1.0), mse(Method::Lspca, 1e9));
        assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
    }
}

#[test]
fn pcc_on_unrelated_labels_is_near_the_majority_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = centered(random_normal(500, 5, &mut rng));
    let y = random_labels(500, 2, &mut rng);
    let fit = pcr_pcc(&x, &y, Family::Categorical, 2, 0.0).unwrap();
    let truth = labels_of(&y);
    let mut scores = fit.z * &fit.beta;
    scores.column_mut(1).fill(0.0);
    let pred = labels_of(&scores);
    let acc = pred.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / 500.0;
    let ones = truth.iter().filter(|&&c| c == 1).count() as f64 / 500.0;
    let majority = ones.max(1.0 - ones);
    assert!((acc - majority).abs() <= 0.1, "accuracy {acc}, majority {majority}");
}

#[test]
fn unconstrained_rank_is_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = centered(random_normal(40, 5, &mut rng));
    let ols = |y: &DMatrix<f64>| &x * pinv_solve(&x, y).unwrap();
    let y = centered(random_normal(40, 3, &mut rng));
    let (l, beta) = rrr(&x, &y, 3).unwrap();
    assert!((&x * l.basis() * &beta - ols(&y)).amax() <= 1e-9);
    let y1 = centered(random_normal(40, 1, &mut rng));
    let (l, beta) = rrr(&x, &y1, 1).unwrap();
    assert!((&x * l.basis() * &beta - ols(&y1)).amax() <= 1e-9);
}

#[test]
fn rrr_beats_random_rank_two_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = centered(random_normal(80, 10, &mut rng));
    let y = centered(&x * random_normal(10, 4, &mut rng) + random_normal(80, 4, &mut rng));
    let (l, beta) = rrr(&x, &y, 2).unwrap();
    let best = (&y - &x * l.basis() * &beta).norm_squared();
    for _ in 0..200 {
        let b = random_normal(10, 2, &mut rng) * random_normal(2, 4, &mut rng) * 0.3;
        assert!(best <= (&y - &x * b).norm_squared());
    }
}
