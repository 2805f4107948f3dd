//! Shared helpers for unit tests.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{ComplexMatrix, RealMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Random complex entry with standard-normal real and imaginary parts.
pub fn cx(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal))
}

pub fn rand_cmatrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cx(r))
}

pub fn rand_rmatrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

pub fn rand_cvec(n: usize, r: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n).map(|_| cx(r)).collect()
}

pub fn rand_unit_cvec(n: usize, r: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut v = rand_cvec(n, r);
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    v
}

/// Random Hermitian matrix.
pub fn rand_hermitian(n: usize, r: &mut ChaCha8Rng) -> ComplexMatrix {
    let m = rand_cmatrix(n, n, r);
    let mh = m.conj_transpose();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, 0.5 * (m.get(i, j) + mh.get(i, j)));
        }
    }
    out
}
