//! Thin Householder QR for tall complex matrices.

use num_complex::Complex64;

use crate::tensor::ComplexMatrix;

/// Thin QR of a tall matrix (rows >= cols): M = Q R with Q (rows x cols)
/// having orthonormal columns and R (cols x cols) upper triangular.
pub(crate) fn qr_thin(m: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    debug_assert!(rows >= cols);
    let mut a = m.clone();
    // unit-norm Householder vectors, one per reduced column
    let mut ws: Vec<Vec<Complex64>> = Vec::with_capacity(cols);

    for k in 0..cols {
        let len = rows - k;
        let mut x: Vec<Complex64> = (0..len).map(|i| a.get(k + i, k)).collect();
        let beta = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if beta == 0.0 {
            ws.push(Vec::new());
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let alpha = -phase * beta;
        x[0] -= alpha;
        let vnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            ws.push(Vec::new());
            a.set(k, k, alpha);
            continue;
        }
        for z in &mut x {
            *z /= vnorm;
        }
        // apply H = I - 2 w w^H to the trailing block
        for j in k..cols {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..len {
                dot += x[i].conj() * a.get(k + i, j);
            }
            let dot = dot * 2.0;
            for i in 0..len {
                let v = a.get(k + i, j) - dot * x[i];
                a.set(k + i, j, v);
            }
        }
        a.set(k, k, alpha);
        for i in k + 1..rows {
            a.set(i, k, Complex64::new(0.0, 0.0));
        }
        ws.push(x);
    }

    let mut r = ComplexMatrix::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            r.set(i, j, a.get(i, j));
        }
    }

    // Q = H_0 ... H_{cols-1} applied to the leading columns of the identity
    let mut q = ComplexMatrix::zeros(rows, cols);
    for j in 0..cols {
        q.set(j, j, Complex64::new(1.0, 0.0));
    }
    for k in (0..cols).rev() {
        let w = &ws[k];
        if w.is_empty() {
            continue;
        }
        let len = rows - k;
        for j in 0..cols {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in 0..len {
                dot += w[i].conj() * q.get(k + i, j);
            }
            let dot = dot * 2.0;
            for i in 0..len {
                let v = q.get(k + i, j) - dot * w[i];
                q.set(k + i, j, v);
            }
        }
    }
    (q, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{rand_cmatrix, rng};

    #[test]
    fn qr_reconstructs_and_q_orthonormal() {
        let mut rg = rng(107);
        let m = rand_cmatrix(20, 6, &mut rg);
        let (q, r) = qr_thin(&m);
        let rec = q.matmul(&r).unwrap();
        assert!(rec.sub(&m).unwrap().frobenius_norm() < 1e-12 * m.frobenius_norm());
        let qhq = q.conj_transpose().matmul(&q).unwrap();
        let dev = qhq.sub(&ComplexMatrix::identity(6)).unwrap().frobenius_norm();
        assert!(dev < 1e-12);
        for i in 0..6 {
            for j in 0..i {
                assert_eq!(r.get(i, j), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn qr_handles_rank_deficiency() {
        let mut rg = rng(109);
        let base = rand_cmatrix(10, 2, &mut rg);
        // duplicate a column: rank 2 out of 3
        let m = ComplexMatrix::from_fn(10, 3, |i, j| base.get(i, j.min(1)));
        let (q, r) = qr_thin(&m);
        let rec = q.matmul(&r).unwrap();
        assert!(rec.sub(&m).unwrap().frobenius_norm() < 1e-12 * m.frobenius_norm());
    }
}
