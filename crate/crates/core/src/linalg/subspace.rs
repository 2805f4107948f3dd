//! Dominant eigenpairs of a Hermitian matrix by blocked subspace iteration
//! with Rayleigh-Ritz extraction. Falls back to the full Jacobi
//! eigendecomposition for small problems. Deterministic: the start block is
//! drawn from a fixed-seed generator.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::jacobi::hermitian_jacobi_evd;
use crate::linalg::qr::qr_thin;
use crate::tensor::ComplexMatrix;

const OVERSAMPLE: usize = 4;
const MAX_ITERS: usize = 400;
const SEED: u64 = 0x5EED_C0DE;

/// Leading-|lambda| eigenpairs (values descending by magnitude, orthonormal
/// vectors). `tol` is the relative residual target per vector.
pub(crate) fn dominant_hermitian_eigenpairs(
    m: &ComplexMatrix,
    k: usize,
    tol: f64,
) -> (Vec<f64>, ComplexMatrix) {
    let n = m.rows();
    debug_assert_eq!(n, m.cols());
    debug_assert!(k <= n);

    if n <= 96 || k + OVERSAMPLE >= n / 2 {
        let (eig, v) = hermitian_jacobi_evd(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig[b].abs().partial_cmp(&eig[a].abs()).unwrap());
        let vals = order.iter().take(k).map(|&i| eig[i]).collect();
        let vecs = ComplexMatrix::from_fn(n, k, |i, j| v.get(i, order[j]));
        return (vals, vecs);
    }

    let block = (k + OVERSAMPLE).min(n);
    let mut rg = ChaCha8Rng::seed_from_u64(SEED);
    let start = ComplexMatrix::from_fn(n, block, |_, _| {
        Complex64::new(rg.sample(StandardNormal), rg.sample(StandardNormal))
    });
    let (mut q, _) = qr_thin(&start);

    let mut best_vals = vec![0.0; k];
    let mut best_vecs = ComplexMatrix::zeros(n, k);
    for _ in 0..MAX_ITERS {
        let z = m.matmul(&q).expect("dims");
        let (qq, _) = qr_thin(&z);
        q = qq;
        // Rayleigh-Ritz on the block
        let mq = m.matmul(&q).expect("dims");
        let b = q.conj_transpose().matmul(&mq).expect("dims");
        let (theta, w) = hermitian_jacobi_evd(&b);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| theta[b].abs().partial_cmp(&theta[a].abs()).unwrap());
        let ritz_vecs = q.matmul(&w).expect("dims");
        let scale = theta[order[0]].abs().max(f64::MIN_POSITIVE);

        let mut converged = true;
        for (out_j, &src) in order.iter().take(k).enumerate() {
            best_vals[out_j] = theta[src];
            let mut resid = 0.0f64;
            for i in 0..n {
                let mv: Complex64 = (0..block)
                    .map(|l| mq.get(i, l) * w.get(l, src))
                    .sum();
                let diff = mv - ritz_vecs.get(i, src) * theta[src];
                resid += diff.norm_sqr();
                best_vecs.set(i, out_j, ritz_vecs.get(i, src));
            }
            if resid.sqrt() > tol * scale {
                converged = false;
            }
        }
        if converged {
            break;
        }
    }
    (best_vals, best_vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{rand_cmatrix, rng};

    #[test]
    fn recovers_dominant_pairs_of_low_rank_matrix() {
        let mut rg = rng(113);
        let n = 120;
        let p = rand_cmatrix(n, 3, &mut rg);
        // M = P diag(5, -3, 1) P^H, Hermitian with rank 3
        let scales = [5.0, -3.0, 1.0];
        let mut scaled = p.clone();
        for j in 0..3 {
            for i in 0..n {
                scaled.set(i, j, p.get(i, j) * scales[j]);
            }
        }
        let m = scaled.matmul(&p.conj_transpose()).unwrap();
        let m = {
            // enforce exact Hermitian storage
            let mh = m.conj_transpose();
            let mut s = ComplexMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    s.set(i, j, 0.5 * (m.get(i, j) + mh.get(i, j)));
                }
            }
            s
        };
        let (vals, vecs) = dominant_hermitian_eigenpairs(&m, 3, 1e-11);
        assert_eq!(vals.len(), 3);
        assert!(vals[0].abs() >= vals[1].abs() && vals[1].abs() >= vals[2].abs());
        // residuals
        let mv = m.matmul(&vecs).unwrap();
        for j in 0..3 {
            let mut resid = 0.0;
            for i in 0..n {
                resid += (mv.get(i, j) - vecs.get(i, j) * vals[j]).norm_sqr();
            }
            assert!(resid.sqrt() < 1e-8 * vals[0].abs(), "resid {}", resid.sqrt());
        }
    }
}
