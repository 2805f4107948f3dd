//! Sampled fourth-order cumulant (quadricovariance) estimation, eigenmatrix
//! extraction, and assembly of the fifth-order partially symmetric target
//! tensor.
//!
//! For an n-channel record X (n x T), the quadricovariance C is the n^2 x n^2
//! matrix whose ((i,j),(k,l)) entry is the sampled cumulant with conjugation
//! pattern (x_i, conj(x_j), conj(x_k), x_l):
//!
//! ```text
//! C = T^-1 sum_t x_i x_j* x_k* x_l
//!   - T^-2 (sum x_i x_j*)(sum x_k* x_l)
//!   - T^-2 [ (sum x_i x_k*)(sum x_j* x_l) + (sum x_i x_l)(sum x_j* x_k*) ]
//! ```
//!
//! This matrix is exactly Hermitian and carries the exchange symmetry
//! C((i,j),(k,l)) = conj(C((j,i),(l,k))), so each eigenvector reshapes, after
//! a phase fix, into a Hermitian eigenmatrix.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, gemm};
use crate::tensor::{column_to_square, ComplexMatrix, ComplexTensor};

/// Sampled fourth-order cumulant matrix of an n-channel record.
#[derive(Debug, Clone)]
pub struct QuadricovarianceMatrix {
    /// Channel count; the matrix is n^2 x n^2.
    pub n: usize,
    pub c: ComplexMatrix,
}

/// Leading eigenmatrices of a quadricovariance, phase-fixed Hermitian and
/// scaled by sqrt(|lambda|). Eigenvalue signs are recorded separately; they
/// fold into the (sign-indeterminate) fifth-mode loadings downstream.
#[derive(Debug, Clone)]
pub struct EigenmatrixSet {
    pub e: Vec<ComplexMatrix>,
    /// Signed eigenvalues, descending magnitude.
    pub lambdas: Vec<f64>,
    /// Magnitude of the next eigenvalue past the retained set (gap diagnostic).
    pub lambda_next: f64,
    /// Worst relative Hermitian deviation among the phase-fixed eigenmatrices.
    pub herm_deviation: f64,
}

impl QuadricovarianceMatrix {
    /// Relative Hermitian deviation of C.
    pub fn hermitian_deviation(&self) -> f64 {
        self.c.hermitian_deviation()
    }

    /// Max absolute deviation from the exchange symmetry
    /// C((i,j),(k,l)) = conj(C((j,i),(l,k))).
    pub fn exchange_deviation(&self) -> f64 {
        let n = self.n;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let a = self.c.get(i * n + j, k * n + l);
                        let b = self.c.get(j * n + i, l * n + k).conj();
                        dev = dev.max((a - b).norm());
                    }
                }
            }
        }
        dev
    }
}

/// Estimate the quadricovariance from samples. X is n x T, one column per
/// time sample; requires T >= 2.
pub fn sample_quadricov(x: &ComplexMatrix) -> Result<QuadricovarianceMatrix> {
    let n = x.rows();
    let t = x.cols();
    if t < 2 {
        return Err(Error::InsufficientData {
            detail: format!("sample_quadricov needs T >= 2, got {t}"),
        });
    }
    let tf = t as f64;

    // Y[(i,j), t] = x_i(t) conj(x_j(t)); the raw moment matrix is Y Y^H / T.
    let mut y = ComplexMatrix::zeros(n * n, t);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for tt in 0..t {
                y.set(row, tt, x.get(i, tt) * x.get(j, tt).conj());
            }
        }
    }
    let m4 = gemm::aah(&y);

    // rm[(i,j)] = sum_t x_i conj(x_j); doubles as the covariance sum Cov(i,j)
    let rm: Vec<Complex64> = (0..n * n)
        .map(|row| (0..t).map(|tt| y.get(row, tt)).sum())
        .collect();
    // pseudo-covariance sum P(i,l) = sum_t x_i x_l
    let mut p = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for l in i..n {
            let s: Complex64 = (0..t).map(|tt| x.get(i, tt) * x.get(l, tt)).sum();
            p.set(i, l, s);
            p.set(l, i, s);
        }
    }

    let tf2 = tf * tf;
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                for l in 0..n {
                    let col = k * n + l;
                    let term1 = m4.get(row, col) / tf;
                    let term2 = rm[row] * rm[col].conj() / tf2;
                    let term3 = (rm[i * n + k] * rm[j * n + l].conj()
                        + p.get(i, l) * p.get(j, k).conj())
                        / tf2;
                    c.set(row, col, term1 - term2 - term3);
                }
            }
        }
    }
    Ok(QuadricovarianceMatrix { n, c })
}

/// Exact-statistics quadricovariance of a mixture with mixing matrix M
/// (n x R) and independent circular unit-power sources of the given fourth
/// cumulants: C = sum_r kappa_r vec(m_r m_r^H) vec(m_r m_r^H)^H.
pub fn analytic_quadricov(m: &ComplexMatrix, kurtoses: &[f64]) -> Result<QuadricovarianceMatrix> {
    let n = m.rows();
    let r = m.cols();
    if kurtoses.len() != r {
        return Err(Error::dims(
            "analytic_quadricov",
            format!("{r} kurtoses"),
            format!("{}", kurtoses.len()),
        ));
    }
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    for (rr, &kappa) in kurtoses.iter().enumerate() {
        let col = m.col_to_vec(rr);
        let v: Vec<Complex64> = (0..n * n)
            .map(|p| col[p / n] * col[p % n].conj())
            .collect();
        for p in 0..n * n {
            for q in 0..n * n {
                let add = kappa * v[p] * v[q].conj();
                let cur = c.get(p, q);
                c.set(p, q, cur + add);
            }
        }
    }
    Ok(QuadricovarianceMatrix { n, c })
}

/// Extract the R dominant (largest |lambda|) eigenmatrices
/// E_r = sqrt(|lambda_r|) * reshape(e_r), with each eigenvector phase-fixed
/// so the reshape is Hermitian.
pub fn dominant_eigenmatrices(c: &QuadricovarianceMatrix, r: usize) -> Result<EigenmatrixSet> {
    let n2 = c.n * c.n;
    if r == 0 || r > n2 {
        return Err(Error::RankOutOfRange {
            context: "dominant_eigenmatrices",
            rank: r,
            max: n2,
        });
    }
    let want = (r + 1).min(n2);
    let evd = linalg::dominant_eigenpairs(&c.c, want)?;
    let lambda_next = if want > r { evd.eigenvalues[r].abs() } else { 0.0 };

    let mut mats = Vec::with_capacity(r);
    let mut herm_dev = 0.0f64;
    for j in 0..r {
        let ev = evd.eigenvectors.col_to_vec(j);
        let mut e = column_to_square(&ev)?;
        let alpha = linalg::hermitianizing_phase(&e);
        e.scale(alpha);
        herm_dev = herm_dev.max(e.hermitian_deviation());
        e.scale(Complex64::new(evd.eigenvalues[j].abs().sqrt(), 0.0));
        mats.push(e);
    }
    Ok(EigenmatrixSet {
        e: mats,
        lambdas: evd.eigenvalues[..r].to_vec(),
        lambda_next,
        herm_deviation: herm_dev,
    })
}

/// Stack eigenmatrices into the fifth-order tensor
/// T(i1,j1,i2,j2,k) = E_k(i1*J + j1, i2*J + j2); Hermitian eigenmatrices make
/// the result partially symmetric by construction.
pub fn assemble_t5(e: &EigenmatrixSet, i: usize, j: usize) -> Result<ComplexTensor> {
    let n = i * j;
    if e.e.is_empty() || e.e[0].rows() != n {
        return Err(Error::dims(
            "assemble_t5",
            format!("eigenmatrices of size {n}"),
            format!("{}", e.e.first().map_or(0, |m| m.rows())),
        ));
    }
    let k5 = e.e.len();
    let mut t = ComplexTensor::zeros(vec![i, j, i, j, k5]);
    for i1 in 0..i {
        for j1 in 0..j {
            for i2 in 0..i {
                for j2 in 0..j {
                    for (k, ek) in e.e.iter().enumerate() {
                        t.set(&[i1, j1, i2, j2, k], ek.get(i1 * j + j1, i2 * j + j2));
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Direct quadruple-loop evaluation of the cumulant formula; the independent
/// oracle for [`sample_quadricov`].
pub fn quadricov_bruteforce(x: &ComplexMatrix) -> QuadricovarianceMatrix {
    let n = x.rows();
    let t = x.cols();
    let tf = t as f64;
    let mut c = ComplexMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut moment = Complex64::new(0.0, 0.0);
                    let mut s_ij = Complex64::new(0.0, 0.0);
                    let mut s_kl = Complex64::new(0.0, 0.0);
                    let mut s_ik = Complex64::new(0.0, 0.0);
                    let mut s_jl = Complex64::new(0.0, 0.0);
                    let mut s_il = Complex64::new(0.0, 0.0);
                    let mut s_jk = Complex64::new(0.0, 0.0);
                    for tt in 0..t {
                        let xi = x.get(i, tt);
                        let xj = x.get(j, tt).conj();
                        let xk = x.get(k, tt).conj();
                        let xl = x.get(l, tt);
                        moment += xi * xj * xk * xl;
                        s_ij += xi * xj;
                        s_kl += xk * xl;
                        s_ik += xi * xk;
                        s_jl += xj * xl;
                        s_il += xi * xl;
                        s_jk += xj * xk;
                    }
                    let val = moment / tf
                        - s_ij * s_kl / (tf * tf)
                        - (s_ik * s_jl + s_il * s_jk) / (tf * tf);
                    c.set(i * n + j, k * n + l, val);
                }
            }
        }
    }
    QuadricovarianceMatrix { n, c }
}
