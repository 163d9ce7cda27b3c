#![allow(dead_code)]

use num_complex::Complex64;
use outliers_core::ComplexMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng, real: bool) -> Vec<Complex64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if real { 0.0 } else { StandardNormal.sample(rng) };
            c(re, im)
        })
        .collect()
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, real: bool) -> ComplexMatrix {
    let mut r = rng(seed);
    ComplexMatrix::from_row_major(rows, cols, gaussian_vec(rows * cols, &mut r, real)).unwrap()
}

pub fn min_distance(points: &[Complex64], z: Complex64) -> f64 {
    points.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min)
}
