#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

use spca::data::{labels_of, one_hot};
use spca::linalg::random_normal;

pub fn random_labels<R: Rng>(n: usize, q: usize, rng: &mut R) -> DMatrix<f64> {
    // every class appears at least once
    let labels: Vec<usize> = (0..n)
        .map(|i| if i < q { i } else { rng.random_range(0..q) })
        .collect();
    one_hot(&labels, q).unwrap()
}

pub fn centered(m: DMatrix<f64>) -> DMatrix<f64> {
    let mut m = m;
    let n = m.nrows() as f64;
    for mut c in m.column_iter_mut() {
        let mean = c.sum() / n;
        c.add_scalar_mut(-mean);
    }
    m
}

/// Labels from a noisy linear score, so classes overlap.
pub fn noisy_labels<R: Rng>(x: &DMatrix<f64>, q: usize, noise: f64, rng: &mut R) -> DMatrix<f64> {
    let w = random_normal(x.ncols(), q, rng);
    let s = x * w + random_normal(x.nrows(), q, rng) * noise;
    one_hot(&labels_of(&s), q).unwrap()
}
