//! Complex dense linear-algebra kernels: SVD, Hermitian EVD, pseudo-inverse,
//! least squares, null-space extraction, and rank-1 approximations.
//!
//! All routines are pure and deterministic. SVD uses one-sided Jacobi;
//! Hermitian EVD uses cyclic complex Jacobi; tall null-space problems are
//! QR-reduced first.

pub(crate) mod gemm;
mod jacobi;
mod qr;
mod subspace;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{phase_fix, ComplexMatrix};

/// Thin singular value decomposition M = U diag(S) V^H.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: ComplexMatrix,
    /// Nonincreasing, nonnegative.
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Hermitian eigendecomposition, eigenvalues sorted by descending magnitude.
#[derive(Debug, Clone)]
pub struct EvdResult {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, one per eigenvalue.
    pub eigenvectors: ComplexMatrix,
}

/// Full thin SVD (rank min(m, n)).
pub fn svd(m: &ComplexMatrix) -> SvdResult {
    if m.rows() >= m.cols() {
        let (u, s, v) = jacobi::one_sided_svd(m);
        SvdResult { u, s, v }
    } else {
        let (u, s, v) = jacobi::one_sided_svd(&m.conj_transpose());
        SvdResult { u: v, s, v: u }
    }
}

/// Best rank-r factorization by truncating the SVD.
pub fn truncated_svd(m: &ComplexMatrix, r: usize) -> Result<SvdResult> {
    let maxr = m.rows().min(m.cols());
    if r == 0 || r > maxr {
        return Err(Error::RankOutOfRange {
            context: "truncated_svd",
            rank: r,
            max: maxr,
        });
    }
    let full = svd(m);
    Ok(SvdResult {
        u: ComplexMatrix::from_fn(m.rows(), r, |i, j| full.u.get(i, j)),
        s: full.s[..r].to_vec(),
        v: ComplexMatrix::from_fn(m.cols(), r, |i, j| full.v.get(i, j)),
    })
}

/// Spectral decomposition of a (near-)Hermitian matrix. When
/// `enforce_hermitian` is set the input must be Hermitian to a relative
/// deviation of 1e-8 or an error is returned; otherwise the Hermitian part
/// (M + M^H)/2 is decomposed silently.
pub fn hermitian_evd(m: &ComplexMatrix, enforce_hermitian: bool) -> Result<EvdResult> {
    if m.rows() != m.cols() {
        return Err(Error::dims(
            "hermitian_evd",
            "square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let deviation = m.hermitian_deviation();
    if enforce_hermitian && deviation > 1e-8 {
        return Err(Error::NotHermitian { deviation });
    }
    let h = hermitian_part(m);
    let (eig, v) = jacobi::hermitian_jacobi_evd(&h);
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig[b].abs().partial_cmp(&eig[a].abs()).unwrap());
    Ok(EvdResult {
        eigenvalues: order.iter().map(|&i| eig[i]).collect(),
        eigenvectors: ComplexMatrix::from_fn(n, n, |i, j| v.get(i, order[j])),
    })
}

/// Leading-magnitude eigenpairs of a Hermitian matrix; cheaper than the full
/// decomposition for large matrices of low numerical rank.
pub fn dominant_eigenpairs(m: &ComplexMatrix, k: usize) -> Result<EvdResult> {
    if m.rows() != m.cols() {
        return Err(Error::dims(
            "dominant_eigenpairs",
            "square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    if k == 0 || k > m.rows() {
        return Err(Error::RankOutOfRange {
            context: "dominant_eigenpairs",
            rank: k,
            max: m.rows(),
        });
    }
    let h = hermitian_part(m);
    let (vals, vecs) = subspace::dominant_hermitian_eigenpairs(&h, k, 1e-11);
    Ok(EvdResult {
        eigenvalues: vals,
        eigenvectors: vecs,
    })
}

pub(crate) fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.rows();
    ComplexMatrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i).conj()))
}

/// Moore-Penrose pseudo-inverse; singular values below rcond * sigma_max are
/// treated as zero. Total: the zero matrix maps to its transposed-shape zero.
pub fn pseudo_inverse(m: &ComplexMatrix, rcond: f64) -> ComplexMatrix {
    let d = svd(m);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let cut = rcond * smax;
    let k = d.s.len();
    // V diag(1/s) U^H
    let mut vs = d.v.clone();
    for j in 0..k {
        let inv = if d.s[j] > cut && d.s[j] > 0.0 {
            1.0 / d.s[j]
        } else {
            0.0
        };
        for i in 0..vs.rows() {
            vs.set(i, j, vs.get(i, j) * inv);
        }
    }
    vs.matmul(&d.u.conj_transpose()).expect("dims")
}

/// Right singular vectors for the `count` smallest singular values of M,
/// ordered by ascending singular value, together with the full descending
/// singular-value list for gap diagnostics.
pub fn nullspace_vectors(
    m: &ComplexMatrix,
    count: usize,
) -> Result<(Vec<Vec<Complex64>>, Vec<f64>)> {
    if count == 0 || count > m.cols() {
        return Err(Error::RankOutOfRange {
            context: "nullspace_vectors",
            rank: count,
            max: m.cols(),
        });
    }
    // A tall stack is QR-reduced first: singular values and right vectors of
    // R coincide with those of M.
    let d = if m.rows() > m.cols() {
        let (_, r) = qr::qr_thin(m);
        svd(&r)
    } else {
        svd(m)
    };
    let n = d.s.len();
    let mut vecs = Vec::with_capacity(count);
    for j in 0..count {
        let col = n - 1 - j;
        vecs.push(d.v.col_to_vec(col));
    }
    Ok((vecs, d.s))
}

/// Dominant eigenpair of the Hermitian part of M with unit norm and the
/// largest-modulus entry of the vector rotated real positive. Returns
/// (vector, eigenvalue, relative Hermitian deviation of the input).
pub fn hermitian_rank1_vector(m: &ComplexMatrix) -> Result<(Vec<Complex64>, f64, f64)> {
    if m.rows() == 0 || m.rows() != m.cols() {
        return Err(Error::dims(
            "hermitian_rank1_vector",
            "nonempty square matrix",
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let deviation = m.hermitian_deviation();
    let h = hermitian_part(m);
    let (eig, v) = jacobi::hermitian_jacobi_evd(&h);
    let mut best = 0usize;
    for i in 1..eig.len() {
        if eig[i].abs() > eig[best].abs() {
            best = i;
        }
    }
    let mut a = v.col_to_vec(best);
    phase_fix(&mut a);
    Ok((a, eig[best], deviation))
}

/// Leading singular triple (u, v, sigma): sigma * u v^H is the best rank-1
/// approximation in Frobenius norm.
pub fn rank1_matrix_approx(m: &ComplexMatrix) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let d = svd(m);
    (d.u.col_to_vec(0), d.v.col_to_vec(0), d.s[0])
}

/// Unit-modulus scalar alpha such that alpha * M is closest to Hermitian,
/// for square M known to satisfy M^H = beta * M with |beta| = 1 (exactly on
/// clean data, approximately otherwise). Computed from the trace ratio
/// c = tr(M M) / ||M||_F^2 as the principal square root of conj(c), so the
/// sign ambiguity alpha vs -alpha is resolved deterministically.
pub fn hermitianizing_phase(m: &ComplexMatrix) -> Complex64 {
    let n = m.rows();
    debug_assert_eq!(n, m.cols());
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            tr += m.get(i, j) * m.get(j, i);
        }
    }
    let nsq = m.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
    if nsq == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let beta = (tr / nsq).conj();
    if beta.norm() == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let alpha = (beta / beta.norm()).sqrt();
    alpha / alpha.norm()
}

/// Minimum-norm least-squares solution of A X = Y via the pseudo-inverse
/// (rcond 1e-12).
pub fn least_squares(a: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.rows() != y.rows() {
        return Err(Error::dims(
            "least_squares",
            format!("{} rows", a.rows()),
            format!("{} rows", y.rows()),
        ));
    }
    pseudo_inverse(a, 1e-12).matmul(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{c, rand_cmatrix, rand_hermitian, rand_unit_cvec, rng};

    fn outer(a: &[Complex64], b: &[Complex64]) -> ComplexMatrix {
        ComplexMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    #[test]
    fn truncated_svd_of_diagonal() {
        let mut m = ComplexMatrix::zeros(3, 3);
        m.set(0, 0, c(3.0));
        m.set(1, 1, c(2.0));
        m.set(2, 2, c(1.0));
        let d = truncated_svd(&m, 2).unwrap();
        assert!((d.s[0] - 3.0).abs() < 1e-14);
        assert!((d.s[1] - 2.0).abs() < 1e-14);
        assert!(truncated_svd(&m, 4).is_err());
        assert!(truncated_svd(&m, 0).is_err());
    }

    #[test]
    fn truncated_svd_of_constructed_rank2() {
        let mut r = rng(201);
        let p = rand_cmatrix(8, 2, &mut r);
        let q = rand_cmatrix(6, 2, &mut r);
        let m = p.matmul(&q.conj_transpose()).unwrap();
        let d = truncated_svd(&m, 2).unwrap();
        let mut us = d.u.clone();
        for j in 0..2 {
            for i in 0..8 {
                us.set(i, j, d.u.get(i, j) * d.s[j]);
            }
        }
        let rec = us.matmul(&d.v.conj_transpose()).unwrap();
        assert!(rec.sub(&m).unwrap().frobenius_norm() < 1e-12 * m.frobenius_norm());
    }

    #[test]
    fn svd_of_zero_matrix() {
        let d = svd(&ComplexMatrix::zeros(4, 2));
        assert!(d.s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn svd_reconstruction_medium_sizes() {
        let mut r = rng(203);
        let m = rand_cmatrix(120, 80, &mut r);
        let d = svd(&m);
        let mut us = d.u.clone();
        for j in 0..80 {
            for i in 0..120 {
                us.set(i, j, d.u.get(i, j) * d.s[j]);
            }
        }
        let rec = us.matmul(&d.v.conj_transpose()).unwrap();
        assert!(rec.sub(&m).unwrap().frobenius_norm() < 1e-9 * m.frobenius_norm());
        let uhu = d.u.conj_transpose().matmul(&d.u).unwrap();
        assert!(
            uhu.sub(&ComplexMatrix::identity(80)).unwrap().frobenius_norm() < 1e-10,
            "U not orthonormal"
        );
    }

    #[test]
    fn evd_diag_and_rank1() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m.set(0, 0, c(4.0));
        m.set(1, 1, c(-7.0));
        let e = hermitian_evd(&m, true).unwrap();
        assert!((e.eigenvalues[0] + 7.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 4.0).abs() < 1e-14);

        let mut r = rng(205);
        let a = rand_unit_cvec(5, &mut r);
        let m = outer(&a, &a);
        let e = hermitian_evd(&m, true).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-12);
        for &l in &e.eigenvalues[1..] {
            assert!(l.abs() < 1e-12);
        }
    }

    #[test]
    fn evd_trace_identity_and_errors() {
        let mut r = rng(207);
        let m = rand_hermitian(6, &mut r);
        let e = hermitian_evd(&m, true).unwrap();
        let trace: f64 = (0..6).map(|i| m.get(i, i).re).sum();
        let lsum: f64 = e.eigenvalues.iter().sum();
        assert!((trace - lsum).abs() < 1e-10 * m.frobenius_norm().max(1.0));

        assert!(hermitian_evd(&ComplexMatrix::zeros(2, 3), true).is_err());
        let bad = rand_cmatrix(4, 4, &mut r);
        assert!(matches!(
            hermitian_evd(&bad, true),
            Err(Error::NotHermitian { .. })
        ));
        // tolerant mode decomposes the Hermitian part
        assert!(hermitian_evd(&bad, false).is_ok());
    }

    #[test]
    fn evd_reconstruction_medium() {
        let mut r = rng(209);
        let m = rand_hermitian(150, &mut r);
        let e = hermitian_evd(&m, true).unwrap();
        let mut vl = e.eigenvectors.clone();
        for j in 0..150 {
            for i in 0..150 {
                vl.set(i, j, e.eigenvectors.get(i, j) * e.eigenvalues[j]);
            }
        }
        let rec = vl.matmul(&e.eigenvectors.conj_transpose()).unwrap();
        assert!(rec.sub(&m).unwrap().frobenius_norm() < 1e-9 * m.frobenius_norm());
    }

    #[test]
    fn pseudo_inverse_cases() {
        let id = ComplexMatrix::identity(3);
        let p = pseudo_inverse(&id, 1e-12);
        assert!(p.sub(&id).unwrap().frobenius_norm() < 1e-13);

        let mut r = rng(211);
        let m = rand_cmatrix(7, 3, &mut r);
        let mp = pseudo_inverse(&m, 1e-12);
        let mm = mp.matmul(&m).unwrap();
        assert!(mm.sub(&ComplexMatrix::identity(3)).unwrap().frobenius_norm() < 1e-10);

        // Moore-Penrose conditions
        let mpm = m.matmul(&mp).unwrap().matmul(&m).unwrap();
        assert!(mpm.sub(&m).unwrap().frobenius_norm() < 1e-9 * m.frobenius_norm());
        let pm = mp.matmul(&m).unwrap().matmul(&mp).unwrap();
        assert!(pm.sub(&mp).unwrap().frobenius_norm() < 1e-9 * mp.frobenius_norm());
        assert!(m.matmul(&mp).unwrap().hermitian_deviation() < 1e-9);
        assert!(mp.matmul(&m).unwrap().hermitian_deviation() < 1e-9);

        let z = pseudo_inverse(&ComplexMatrix::zeros(4, 2), 1e-12);
        assert_eq!(z.rows(), 2);
        assert_eq!(z.cols(), 4);
        assert_eq!(z.frobenius_norm(), 0.0);
    }

    #[test]
    fn nullspace_of_constructed_kernel() {
        let mut r = rng(213);
        // M has a 2-dimensional exact kernel: 6 columns, rank 4
        let base = rand_cmatrix(9, 4, &mut r);
        let coeff = rand_cmatrix(4, 6, &mut r);
        let m = base.matmul(&coeff).unwrap();
        let (vecs, s) = nullspace_vectors(&m, 2).unwrap();
        let smax = s[0];
        for v in &vecs {
            let mv: Vec<Complex64> = (0..m.rows())
                .map(|i| (0..6).map(|j| m.get(i, j) * v[j]).sum())
                .collect();
            let resid = mv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(resid < 1e-10 * smax, "resid = {resid}");
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        // orthonormal pair
        let dot: Complex64 = (0..6).map(|j| vecs[0][j].conj() * vecs[1][j]).sum();
        assert!(dot.norm() < 1e-10);

        let (v1, s1) = nullspace_vectors(&ComplexMatrix::identity(3), 1).unwrap();
        assert_eq!(v1.len(), 1);
        assert!((s1[2] - 1.0).abs() < 1e-14);
        assert!(nullspace_vectors(&ComplexMatrix::identity(3), 4).is_err());
    }

    #[test]
    fn rank1_hermitian_recovery() {
        let mut r = rng(215);
        let a0 = {
            let mut v = rand_unit_cvec(4, &mut r);
            phase_fix(&mut v);
            v
        };
        let mut m = outer(&a0, &a0);
        m.scale(c(2.0));
        let (a, mu, dev) = hermitian_rank1_vector(&m).unwrap();
        assert!(dev < 1e-14);
        assert!((mu - 2.0).abs() < 1e-12);
        let err: f64 = a.iter().zip(&a0).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-12, "err = {err}");

        // idempotence under the phase convention
        let m2 = {
            let mut o = outer(&a, &a);
            o.scale(c(mu));
            o
        };
        let (a2, mu2, _) = hermitian_rank1_vector(&m2).unwrap();
        let err2: f64 = a2.iter().zip(&a).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err2 < 1e-12 && (mu2 - mu).abs() < 1e-12);
    }

    #[test]
    fn rank1_hermitian_perturbed() {
        let mut r = rng(217);
        let a = rand_unit_cvec(5, &mut r);
        let mut b = rand_unit_cvec(5, &mut r);
        // orthogonalize b against a
        let dot: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        for i in 0..5 {
            b[i] -= dot * a[i];
        }
        let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut b {
            *z /= nb;
        }
        let mut m = outer(&a, &a);
        let mut pb = outer(&b, &b);
        pb.scale(c(0.01));
        m = m.add(&pb).unwrap();
        let (ahat, _, _) = hermitian_rank1_vector(&m).unwrap();
        let overlap: Complex64 = ahat.iter().zip(&a).map(|(x, y)| x.conj() * y).sum();
        let angle = overlap.norm().min(1.0).acos();
        assert!(angle < 0.02, "angle = {angle}");

        // degenerate spectrum: identity still returns a unit vector, mu = 1
        let (ai, mui, _) = hermitian_rank1_vector(&ComplexMatrix::identity(2)).unwrap();
        assert!((mui - 1.0).abs() < 1e-14);
        let n: f64 = ai.iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank1_matrix_cases() {
        let mut r = rng(219);
        let u0 = rand_unit_cvec(5, &mut r);
        let v0 = rand_unit_cvec(3, &mut r);
        let mut m = outer(&u0, &v0);
        m.scale(c(1.7));
        let (u, v, s) = rank1_matrix_approx(&m);
        assert!((s - 1.7).abs() < 1e-12);
        let rec = {
            let mut o = outer(&u, &v);
            o.scale(c(s));
            o
        };
        assert!(rec.sub(&m).unwrap().frobenius_norm() < 1e-12);

        // rank-2: residual equals the discarded singular value
        let p = rand_cmatrix(6, 2, &mut r);
        let q = rand_cmatrix(4, 2, &mut r);
        let m2 = p.matmul(&q.conj_transpose()).unwrap();
        let d = svd(&m2);
        let (u2, v2, s2) = rank1_matrix_approx(&m2);
        let mut rec2 = outer(&u2, &v2);
        rec2.scale(c(s2));
        let resid = m2.sub(&rec2).unwrap().frobenius_norm();
        assert!((resid - d.s[1]).abs() < 1e-10);

        let (_, _, sz) = rank1_matrix_approx(&ComplexMatrix::zeros(3, 2));
        assert_eq!(sz, 0.0);
    }

    #[test]
    fn least_squares_cases() {
        let mut r = rng(221);
        let y = rand_cmatrix(4, 2, &mut r);
        let x = least_squares(&ComplexMatrix::identity(4), &y).unwrap();
        assert!(x.sub(&y).unwrap().frobenius_norm() < 1e-13);

        // consistent overdetermined system solved exactly
        let a = rand_cmatrix(9, 3, &mut r);
        let x0 = rand_cmatrix(3, 2, &mut r);
        let y = a.matmul(&x0).unwrap();
        let x = least_squares(&a, &y).unwrap();
        assert!(x.sub(&x0).unwrap().frobenius_norm() < 1e-10 * x0.frobenius_norm());

        // rank-deficient: minimum-norm solution (x orthogonal to the kernel)
        let base = rand_cmatrix(6, 2, &mut r);
        let mix = rand_cmatrix(2, 4, &mut r);
        let a = base.matmul(&mix).unwrap();
        let xr = rand_cmatrix(4, 1, &mut r);
        let y = a.matmul(&xr).unwrap();
        let x = least_squares(&a, &y).unwrap();
        let resid = a.matmul(&x).unwrap().sub(&y).unwrap().frobenius_norm();
        assert!(resid < 1e-10 * y.frobenius_norm());
        // minimum-norm: A^H A x' = A^H y has x' = x among all solutions with
        // minimal norm, equivalently x lies in the row space of A
        let pinv_check = pseudo_inverse(&a, 1e-12).matmul(&y).unwrap();
        assert!(x.sub(&pinv_check).unwrap().frobenius_norm() < 1e-12);
    }
}
