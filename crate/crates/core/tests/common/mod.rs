#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tubalkit::DenseTensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(dims, |_| rng.sample(StandardNormal)).unwrap()
}

/// Random shape of order 3 or 4 with every dimension in `1..=max`.
pub fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> Vec<usize> {
    let d = if rng.random_bool(0.5) { 3 } else { 4 };
    (0..d).map(|_| rng.random_range(1..=max)).collect()
}

pub fn rel_err(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.distance(b).unwrap() / b.fro_norm().max(1e-300)
}

/// The 2x2x2 tensor with first frontal slice diag(3, 1) and a zero second slice.
pub fn fdiag_example() -> DenseTensor {
    DenseTensor::new(vec![2, 2, 2], vec![3.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap()
}

/// Projection of a real matrix onto the nuclear ball of radius `radius`,
/// thresholding found by bisection.
pub fn matrix_nuclear_projection(m: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    let a = faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = a.thin_svd().expect("svd converges");
    let sv = svd.S().column_vector();
    let s: Vec<f64> = (0..sv.nrows()).map(|i| sv[i]).collect();
    let total: f64 = s.iter().sum();
    if total <= radius {
        return m.clone();
    }
    let (mut lo, mut hi) = (0.0f64, s.iter().copied().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = s.iter().map(|&v| (v - mid).max(0.0)).sum();
        if mass > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let (u, v) = (svd.U(), svd.V());
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        s.iter()
            .enumerate()
            .map(|(k, &sk)| (sk - sigma).max(0.0) * u[(i, k)] * v[(j, k)])
            .sum()
    })
}

/// Matrix with exactly the given singular values and random orthogonal factors.
pub fn matrix_with_spectrum(m: usize, n: usize, s: &[f64], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qa = a.qr().q();
    let qb = b.qr().q();
    let mut d = DMatrix::zeros(m, n);
    for (i, &v) in s.iter().enumerate() {
        d[(i, i)] = v;
    }
    qa * d * qb.transpose()
}
