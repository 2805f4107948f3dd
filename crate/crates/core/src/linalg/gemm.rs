//! Complex matrix products. Large products are split into four real GEMMs
//! driven by `matrixmultiply`; small ones use a direct loop.

use num_complex::Complex64;

use crate::tensor::ComplexMatrix;

const SPLIT_THRESHOLD: usize = 32_768;

fn split(m: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let re = m.data().iter().map(|z| z.re).collect();
    let im = m.data().iter().map(|z| z.im).collect();
    (re, im)
}

/// C += alpha * A * op(B), all row-major; op is identity or transpose.
fn dgemm_acc(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    transpose_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(c.len(), m * n);
    let (rsb, csb) = if transpose_b {
        debug_assert_eq!(b.len(), n * k);
        (1isize, k as isize)
    } else {
        debug_assert_eq!(b.len(), k * n);
        (n as isize, 1isize)
    };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn naive_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = ComplexMatrix::zeros(m, n);
    for i in 0..m {
        for p in 0..k {
            let av = a.get(i, p);
            if av.re == 0.0 && av.im == 0.0 {
                continue;
            }
            let brow = b.row(p);
            let orow = &mut out.data_mut()[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

pub(crate) fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    debug_assert_eq!(k, b.rows());
    if m * k * n < SPLIT_THRESHOLD {
        return naive_matmul(a, b);
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut cr = vec![0.0; m * n];
    let mut ci = vec![0.0; m * n];
    dgemm_acc(m, k, n, 1.0, &ar, &br, false, 0.0, &mut cr);
    dgemm_acc(m, k, n, -1.0, &ai, &bi, false, 1.0, &mut cr);
    dgemm_acc(m, k, n, 1.0, &ar, &bi, false, 0.0, &mut ci);
    dgemm_acc(m, k, n, 1.0, &ai, &br, false, 1.0, &mut ci);
    assemble(m, n, &cr, &ci)
}

/// A * A^H for row-major A (m x k); exploits the four-real-GEMM split.
pub(crate) fn aah(a: &ComplexMatrix) -> ComplexMatrix {
    let (m, k) = (a.rows(), a.cols());
    if m * k * m < SPLIT_THRESHOLD {
        return naive_matmul(a, &a.conj_transpose());
    }
    let (ar, ai) = split(a);
    let mut cr = vec![0.0; m * m];
    let mut ci = vec![0.0; m * m];
    // (Ar + i Ai)(Ar^T - i Ai^T) = Ar Ar^T + Ai Ai^T + i (Ai Ar^T - Ar Ai^T)
    dgemm_acc(m, k, m, 1.0, &ar, &ar, true, 0.0, &mut cr);
    dgemm_acc(m, k, m, 1.0, &ai, &ai, true, 1.0, &mut cr);
    dgemm_acc(m, k, m, 1.0, &ai, &ar, true, 0.0, &mut ci);
    dgemm_acc(m, k, m, -1.0, &ar, &ai, true, 1.0, &mut ci);
    assemble(m, m, &cr, &ci)
}

fn assemble(m: usize, n: usize, re: &[f64], im: &[f64]) -> ComplexMatrix {
    let data = re
        .iter()
        .zip(im)
        .map(|(&r, &i)| Complex64::new(r, i))
        .collect();
    ComplexMatrix::new(m, n, data).expect("assemble dims")
}
