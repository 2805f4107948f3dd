//! Cyclic Jacobi kernels: Hermitian eigendecomposition via complex plane
//! rotations, and a one-sided (Hestenes) Jacobi SVD that orthogonalizes
//! columns. Both stop at a relative off-diagonal tolerance of 1e-12 * ||M||
//! or 100 sweeps, whichever comes first; the one-sided sweep uses a pairwise
//! orthogonality threshold near machine precision so small singular values
//! keep high relative accuracy.

use num_complex::Complex64;

use crate::tensor::ComplexMatrix;

pub(crate) const MAX_SWEEPS: usize = 100;
const EVD_TOL: f64 = 1e-12;
const PAIR_TOL: f64 = 1e-14;

/// 2x2 Hermitian rotation: returns (c, s, phase) zeroing the off-diagonal of
/// [[alpha, gamma], [conj(gamma), beta]] with gamma = |gamma| * phase.
fn rotation(alpha: f64, beta: f64, gamma: Complex64) -> (f64, f64, Complex64) {
    let g = gamma.norm();
    let phase = gamma / g;
    let tau = (alpha - beta) / (2.0 * g);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c, phase)
}

/// Eigendecomposition of a Hermitian matrix. Returns (eigenvalues,
/// eigenvector columns), unsorted. The caller is responsible for
/// symmetrizing the input.
pub(crate) fn hermitian_jacobi_evd(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.rows();
    debug_assert_eq!(n, m.cols());
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n);
    if n == 1 {
        return (vec![a.get(0, 0).re], v);
    }
    let anorm = a.frobenius_norm();
    if anorm == 0.0 {
        return (vec![0.0; n], v);
    }

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= EVD_TOL * anorm {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let gamma = a.get(p, q);
                if gamma.norm() <= f64::EPSILON * anorm / n as f64 {
                    continue;
                }
                let alpha = a.get(p, p).re;
                let beta = a.get(q, q).re;
                let (c, s, phase) = rotation(alpha, beta, gamma);
                let sp = s * phase;
                let spc = s * phase.conj();
                // columns: col_p' = c col_p + s conj(phase) col_q
                //          col_q' = -s phase col_p + c col_q
                for i in 0..n {
                    let ap = a.get(i, p);
                    let aq = a.get(i, q);
                    a.set(i, p, c * ap + spc * aq);
                    a.set(i, q, -sp * ap + c * aq);
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp + spc * vq);
                    v.set(i, q, -sp * vp + c * vq);
                }
                // rows: row_p' = c row_p + s phase row_q
                //       row_q' = -s conj(phase) row_p + c row_q
                for jj in 0..n {
                    let ap = a.get(p, jj);
                    let aq = a.get(q, jj);
                    a.set(p, jj, c * ap + sp * aq);
                    a.set(q, jj, -spc * ap + c * aq);
                }
                a.set(p, q, Complex64::new(0.0, 0.0));
                a.set(q, p, Complex64::new(0.0, 0.0));
                let dp = a.get(p, p);
                let dq = a.get(q, q);
                a.set(p, p, Complex64::new(dp.re, 0.0));
                a.set(q, q, Complex64::new(dq.re, 0.0));
            }
        }
    }
    let eig = (0..n).map(|i| a.get(i, i).re).collect();
    (eig, v)
}

/// One-sided Jacobi SVD of a tall matrix (rows >= cols). Returns
/// (U, sigma, V) with M = U diag(sigma) V^H, sigma descending, U and V with
/// orthonormal columns (zero singular directions completed deterministically).
pub(crate) fn one_sided_svd(m: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>, ComplexMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    debug_assert!(rows >= cols);
    let mut g = m.clone();
    let mut v = ComplexMatrix::identity(cols);

    // column norms cached and refreshed each sweep
    let col_norm_sq = |g: &ComplexMatrix, c: usize| -> f64 {
        (0..g.rows()).map(|i| g.get(i, c).norm_sqr()).sum()
    };

    let max_norm_sq: f64 = (0..cols).map(|c| col_norm_sq(&g, c)).fold(0.0, f64::max);
    if max_norm_sq > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..cols.saturating_sub(1) {
                for q in p + 1..cols {
                    let mut app = 0.0f64;
                    let mut aqq = 0.0f64;
                    let mut apq = Complex64::new(0.0, 0.0);
                    for i in 0..rows {
                        let gp = g.get(i, p);
                        let gq = g.get(i, q);
                        app += gp.norm_sqr();
                        aqq += gq.norm_sqr();
                        apq += gp.conj() * gq;
                    }
                    let scale = (app * aqq).sqrt();
                    if scale == 0.0 || apq.norm() <= PAIR_TOL * scale {
                        continue;
                    }
                    rotated = true;
                    let (c, s, phase) = rotation(app, aqq, apq);
                    let sp = s * phase;
                    let spc = s * phase.conj();
                    for i in 0..rows {
                        let gp = g.get(i, p);
                        let gq = g.get(i, q);
                        g.set(i, p, c * gp + spc * gq);
                        g.set(i, q, -sp * gp + c * gq);
                    }
                    for i in 0..cols {
                        let vp = v.get(i, p);
                        let vq = v.get(i, q);
                        v.set(i, p, c * vp + spc * vq);
                        v.set(i, q, -sp * vp + c * vq);
                    }
                }
            }
            if !rotated {
                break;
            }
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|c| col_norm_sq(&g, c).sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut u = ComplexMatrix::zeros(rows, cols);
    let mut vv = ComplexMatrix::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    let mut zero_cols = Vec::new();
    for (out_c, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        for i in 0..cols {
            vv.set(i, out_c, v.get(i, src));
        }
        if norms[src] > 0.0 {
            for i in 0..rows {
                u.set(i, out_c, g.get(i, src) / norms[src]);
            }
        } else {
            zero_cols.push(out_c);
        }
    }
    // deterministic orthonormal completion for exactly-zero directions
    for zc in zero_cols {
        'basis: for k in 0..rows {
            let mut cand: Vec<Complex64> = (0..rows)
                .map(|i| Complex64::new(if i == k { 1.0 } else { 0.0 }, 0.0))
                .collect();
            for c in 0..cols {
                if c == zc {
                    continue;
                }
                let dot: Complex64 = (0..rows).map(|i| u.get(i, c).conj() * cand[i]).sum();
                for (i, cd) in cand.iter_mut().enumerate() {
                    *cd -= dot * u.get(i, c);
                }
            }
            let nrm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.5 {
                for (i, cd) in cand.iter().enumerate() {
                    u.set(i, zc, *cd / nrm);
                }
                break 'basis;
            }
        }
    }
    (u, sigma, vv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{rand_cmatrix, rand_hermitian, rng};

    #[test]
    fn evd_reconstructs_random_hermitian() {
        let mut r = rng(101);
        let m = rand_hermitian(8, &mut r);
        let (eig, v) = hermitian_jacobi_evd(&m);
        // M V = V diag(eig)
        let mv = m.matmul(&v).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                let want = v.get(i, j) * eig[j];
                assert!((mv.get(i, j) - want).norm() < 1e-9 * m.frobenius_norm());
            }
        }
        // unitary V
        let vhv = v.conj_transpose().matmul(&v).unwrap();
        let dev = vhv.sub(&ComplexMatrix::identity(8)).unwrap().frobenius_norm();
        assert!(dev < 1e-11);
    }

    #[test]
    fn one_sided_svd_reconstructs() {
        let mut r = rng(103);
        let m = rand_cmatrix(12, 7, &mut r);
        let (u, s, v) = one_sided_svd(&m);
        let mut us = u.clone();
        for j in 0..7 {
            for i in 0..12 {
                us.set(i, j, u.get(i, j) * s[j]);
            }
        }
        let rec = us.matmul(&v.conj_transpose()).unwrap();
        let diff = rec.sub(&m).unwrap().frobenius_norm();
        assert!(diff < 1e-11 * m.frobenius_norm());
        for w in s.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn one_sided_svd_zero_matrix_completes_u() {
        let m = ComplexMatrix::zeros(4, 3);
        let (u, s, v) = one_sided_svd(&m);
        assert!(s.iter().all(|&x| x == 0.0));
        let uhu = u.conj_transpose().matmul(&u).unwrap();
        let dev = uhu.sub(&ComplexMatrix::identity(3)).unwrap().frobenius_norm();
        assert!(dev < 1e-12);
        let vhv = v.conj_transpose().matmul(&v).unwrap();
        assert!(vhv.sub(&ComplexMatrix::identity(3)).unwrap().frobenius_norm() < 1e-12);
    }
}
