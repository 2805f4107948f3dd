//! Dense complex tensors, matrices, and the loading-factor container, plus
//! the matricizations and Khatri-Rao products everything else is built on.
//!
//! Storage is flat row-major (last index fastest). All index formulas in this
//! module are the single choke point converting the 1-based conventions of
//! the underlying model equations to 0-based offsets; no other module does
//! raw multi-index arithmetic.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Dense N-way complex tensor, row-major flat storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

/// Dense complex matrix, row-major flat storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// Dense real matrix, row-major. Used for the fifth-mode loadings (real by
/// type) and for joint-diagonalization targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ComplexTensor {
    pub fn new(dims: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.iter().any(|&d| d == 0) || n != data.len() {
            return Err(Error::dims(
                "ComplexTensor::new",
                format!("product(dims) = {n} nonzero"),
                format!("data length {}", data.len()),
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        Self {
            dims,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let mut t = Self::zeros(dims);
        let order = t.dims.len();
        let mut idx = vec![0usize; order];
        for flat in 0..t.data.len() {
            t.unravel(flat, &mut idx);
            t.data[flat] = f(&idx);
        }
        t
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Flat offset of a multi-index (0-based, last index fastest).
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[k]);
            off = off * self.dims[k] + i;
        }
        off
    }

    fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            idx[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: Complex64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    /// Elementwise difference; dims must match.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::dims(
                "ComplexTensor::sub",
                format!("{:?}", self.dims),
                format!("{:?}", other.dims),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::dims(
                "ComplexMatrix::new",
                format!("{rows}x{cols} = {}", rows * cols),
                format!("data length {}", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col_to_vec(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[Complex64]) {
        debug_assert_eq!(v.len(), self.rows);
        for r in 0..self.rows {
            self.set(r, c, v[r]);
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: Complex64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, "ComplexMatrix::add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, "ComplexMatrix::sub", |a, b| a - b)
    }

    fn zip(
        &self,
        other: &Self,
        context: &'static str,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                context,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    /// Matrix product; uses a split real GEMM kernel above a size threshold.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(
                "ComplexMatrix::matmul",
                format!("inner dim {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        Ok(crate::linalg::gemm::matmul(self, other))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Relative Hermitian deviation ||M - M^H||_F / ||M||_F (0 for the zero matrix).
    pub fn hermitian_deviation(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut dev = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                dev += (self.get(r, c) - self.get(c, r).conj()).norm_sqr();
            }
        }
        let n = self.frobenius_norm();
        if n == 0.0 {
            0.0
        } else {
            dev.sqrt() / n
        }
    }
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::dims(
                "RealMatrix::new",
                format!("{rows}x{cols} = {}", rows * cols),
                format!("data length {}", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims(
                "RealMatrix::matmul",
                format!("inner dim {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }
}

/// Loading matrices of the partially symmetric fifth-order model: A (I x R)
/// and B (J x R) with unit-norm, phase-fixed columns, and the real fifth-mode
/// loadings D (K5 x R). Construction normalizes the columns and pushes the
/// absorbed scales into D.
#[derive(Debug, Clone)]
pub struct FactorSet {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub d: RealMatrix,
}

/// Rotate `v` so its largest-modulus entry is real and positive.
/// Ties broken by first occurrence. Returns the applied unit scalar.
pub(crate) fn phase_fix(v: &mut [Complex64]) -> Complex64 {
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let rot = v[best].conj() / best_mag;
    for z in v.iter_mut() {
        *z *= rot;
    }
    // pin the pivot exactly real
    v[best] = Complex64::new(v[best].re, 0.0);
    rot
}

impl FactorSet {
    /// Build a factor set, enforcing the column conventions: unit Euclidean
    /// norm and largest-modulus entry real positive for A and B. The norms
    /// absorbed from a_r and b_r scale d_r by |a_r|^2 |b_r|^2 (each factor
    /// appears once plainly and once conjugated in the model).
    pub fn new(a: ComplexMatrix, b: ComplexMatrix, d: RealMatrix) -> Result<Self> {
        let r = a.cols();
        if b.cols() != r || d.cols() != r {
            return Err(Error::dims(
                "FactorSet::new",
                format!("{r} columns in every factor"),
                format!("A:{} B:{} D:{}", a.cols(), b.cols(), d.cols()),
            ));
        }
        let mut a = a;
        let mut b = b;
        let mut d = d;
        for j in 0..r {
            let mut ca = a.col_to_vec(j);
            let mut cb = b.col_to_vec(j);
            let na = ca.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nb = cb.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(Error::Degenerate {
                    context: "FactorSet::new",
                    detail: format!("zero column {j} in A or B"),
                });
            }
            for z in &mut ca {
                *z /= na;
            }
            for z in &mut cb {
                *z /= nb;
            }
            phase_fix(&mut ca);
            phase_fix(&mut cb);
            a.set_col(j, &ca);
            b.set_col(j, &cb);
            let s = na * na * nb * nb;
            for k in 0..d.rows() {
                let v = d.get(k, j) * s;
                d.set(k, j, v);
            }
        }
        Ok(Self { a, b, d })
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }
}

/// Column-wise Kronecker product: column r of the output is a_r (x) b_r with
/// row index i * B.rows + j for entry a(i) b(j).
pub fn khatri_rao(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::dims(
            "khatri_rao",
            format!("{} columns", a.cols()),
            format!("{} columns", b.cols()),
        ));
    }
    let (ia, jb, r) = (a.rows(), b.rows(), a.cols());
    let mut out = ComplexMatrix::zeros(ia * jb, r);
    for c in 0..r {
        for i in 0..ia {
            let av = a.get(i, c);
            for j in 0..jb {
                out.set(i * jb + j, c, av * b.get(j, c));
            }
        }
    }
    Ok(out)
}

/// Three-factor Khatri-Rao chain, row index (i*J + j)*K + k.
pub fn khatri_rao3(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    khatri_rao(&khatri_rao(a, b)?, c)
}

/// Synthesize the fifth-order partially symmetric tensor
/// T(i1,j1,i2,j2,k) = sum_r w_r a_r(i1) b_r(j1) conj(a_r(i2)) conj(b_r(j2)) d_r(k).
pub fn synthesize_cp5(f: &FactorSet, weights: Option<&[f64]>) -> Result<ComplexTensor> {
    let (i, j, r) = (f.a.rows(), f.b.rows(), f.rank());
    let k5 = f.d.rows();
    if let Some(w) = weights {
        if w.len() != r {
            return Err(Error::dims("synthesize_cp5", format!("{r} weights"), format!("{}", w.len())));
        }
    }
    let mut t = ComplexTensor::zeros(vec![i, j, i, j, k5]);
    for rr in 0..r {
        let w = weights.map_or(1.0, |w| w[rr]);
        let ar = f.a.col_to_vec(rr);
        let br = f.b.col_to_vec(rr);
        let dr: Vec<f64> = (0..k5).map(|k| f.d.get(k, rr)).collect();
        let mut off = 0usize;
        for i1 in 0..i {
            for j1 in 0..j {
                let p1 = ar[i1] * br[j1] * w;
                for i2 in 0..i {
                    let p2 = p1 * ar[i2].conj();
                    for j2 in 0..j {
                        let p3 = p2 * br[j2].conj();
                        for dk in dr.iter().take(k5) {
                            t.data[off] += p3 * dk;
                            off += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(t)
}

fn expect_cp5_dims(t: &ComplexTensor, context: &'static str) -> Result<(usize, usize, usize)> {
    let d = t.dims();
    if d.len() != 5 || d[0] != d[2] || d[1] != d[3] {
        return Err(Error::dims(
            context,
            "5-way tensor with dims (I,J,I,J,K)".to_string(),
            format!("{d:?}"),
        ));
    }
    Ok((d[0], d[1], d[4]))
}

/// Matricize a 5-way (I,J,I,J,K) tensor into I^2 x (J^2 K):
/// out(i1*I + i2, (j1*J + j2)*K + k) = T(i1,j1,i2,j2,k).
pub fn matricize5(t: &ComplexTensor) -> Result<ComplexMatrix> {
    let (i, j, k) = expect_cp5_dims(t, "matricize5")?;
    let mut m = ComplexMatrix::zeros(i * i, j * j * k);
    for i1 in 0..i {
        for j1 in 0..j {
            for i2 in 0..i {
                for j2 in 0..j {
                    for kk in 0..k {
                        m.set(
                            i1 * i + i2,
                            (j1 * j + j2) * k + kk,
                            t.get(&[i1, j1, i2, j2, kk]),
                        );
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Inverse of [`matricize5`].
pub fn dematricize5(m: &ComplexMatrix, i: usize, j: usize, k: usize) -> Result<ComplexTensor> {
    if m.rows() != i * i || m.cols() != j * j * k {
        return Err(Error::dims(
            "dematricize5",
            format!("{}x{}", i * i, j * j * k),
            format!("{}x{}", m.rows(), m.cols()),
        ));
    }
    let mut t = ComplexTensor::zeros(vec![i, j, i, j, k]);
    for i1 in 0..i {
        for j1 in 0..j {
            for i2 in 0..i {
                for j2 in 0..j {
                    for kk in 0..k {
                        t.set(
                            &[i1, j1, i2, j2, kk],
                            m.get(i1 * i + i2, (j1 * j + j2) * k + kk),
                        );
                    }
                }
            }
        }
    }
    Ok(t)
}

/// Matricize a 3-way (I,J,K) tensor into IJ x K: out(i*J + j, k) = X(i,j,k).
pub fn matricize3(x: &ComplexTensor) -> Result<ComplexMatrix> {
    let d = x.dims();
    if d.len() != 3 {
        return Err(Error::dims("matricize3", "3-way tensor", format!("{d:?}")));
    }
    let (i, j, k) = (d[0], d[1], d[2]);
    // the (i,j,k) row-major flat layout already matches (i*J + j, k)
    Ok(ComplexMatrix {
        rows: i * j,
        cols: k,
        data: x.data().to_vec(),
    })
}

/// Inverse of [`matricize3`].
pub fn dematricize3(m: &ComplexMatrix, i: usize, j: usize) -> Result<ComplexTensor> {
    if m.rows() != i * j {
        return Err(Error::dims(
            "dematricize3",
            format!("{} rows", i * j),
            format!("{}", m.rows()),
        ));
    }
    ComplexTensor::new(vec![i, j, m.cols()], m.data.clone())
}

/// Max deviation from the partial symmetry T(i1,j1,i2,j2,k) = conj(T(i2,j2,i1,j1,k)).
pub fn check_partial_symmetry(t: &ComplexTensor) -> Result<f64> {
    let (i, j, k) = expect_cp5_dims(t, "check_partial_symmetry")?;
    let mut dev = 0.0f64;
    for i1 in 0..i {
        for j1 in 0..j {
            for i2 in 0..i {
                for j2 in 0..j {
                    for kk in 0..k {
                        let a = t.get(&[i1, j1, i2, j2, kk]);
                        let b = t.get(&[i2, j2, i1, j1, kk]).conj();
                        dev = dev.max((a - b).norm());
                    }
                }
            }
        }
    }
    Ok(dev)
}

/// Reshape an I^2 vector into I x I with out(i1, i2) = v(i1*I + i2).
pub fn column_to_square(v: &[Complex64]) -> Result<ComplexMatrix> {
    let n = (v.len() as f64).sqrt().round() as usize;
    if n * n != v.len() {
        return Err(Error::dims(
            "column_to_square",
            "square length",
            format!("{}", v.len()),
        ));
    }
    ComplexMatrix::new(n, n, v.to_vec())
}

/// Inverse of [`column_to_square`].
pub fn square_to_column(m: &ComplexMatrix) -> Vec<Complex64> {
    m.data.clone()
}

/// Reshape a J^2 K vector into a J x J x K cube with
/// out(j1, j2, k) = v((j1*J + j2)*K + k).
pub fn column_to_cube(v: &[Complex64], j: usize, k: usize) -> Result<ComplexTensor> {
    if j * j * k != v.len() {
        return Err(Error::dims(
            "column_to_cube",
            format!("{}", j * j * k),
            format!("{}", v.len()),
        ));
    }
    ComplexTensor::new(vec![j, j, k], v.to_vec())
}

/// Inverse of [`column_to_cube`].
pub fn cube_to_column(t: &ComplexTensor) -> Vec<Complex64> {
    t.data().to_vec()
}

/// Frontal slice M(:,:,k) of a (J,J,K) cube.
pub fn cube_slice(t: &ComplexTensor, k: usize) -> ComplexMatrix {
    let d = t.dims();
    debug_assert_eq!(d.len(), 3);
    let (j1, j2) = (d[0], d[1]);
    ComplexMatrix::from_fn(j1, j2, |a, b| t.get(&[a, b, k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{c, cx, rand_cmatrix, rand_rmatrix, rng};

    #[test]
    fn khatri_rao_unit_vectors() {
        let a = ComplexMatrix::new(2, 1, vec![c(1.0), c(0.0)]).unwrap();
        let b = ComplexMatrix::new(2, 1, vec![c(2.0), c(3.0)]).unwrap();
        let kr = khatri_rao(&a, &b).unwrap();
        let expect = [c(2.0), c(3.0), c(0.0), c(0.0)];
        for (i, e) in expect.iter().enumerate() {
            assert_eq!(kr.get(i, 0), *e);
        }
    }

    #[test]
    fn khatri_rao_identity_selects_rows() {
        let id = ComplexMatrix::identity(2);
        let kr = khatri_rao(&id, &id).unwrap();
        assert_eq!(kr.rows(), 4);
        assert_eq!(kr.cols(), 2);
        // columns are e1 (x) e1 = e1 of I4 and e2 (x) e2 = e4 of I4
        assert_eq!(kr.get(0, 0), c(1.0));
        assert_eq!(kr.get(3, 1), c(1.0));
        assert_eq!(kr.frobenius_norm(), (2.0f64).sqrt());
    }

    #[test]
    fn khatri_rao_matches_entrywise_oracle() {
        let mut r = rng(11);
        let a = rand_cmatrix(3, 2, &mut r);
        let b = rand_cmatrix(4, 2, &mut r);
        let kr = khatri_rao(&a, &b).unwrap();
        for col in 0..2 {
            for i in 0..3 {
                for j in 0..4 {
                    let want = a.get(i, col) * b.get(j, col);
                    assert!((kr.get(i * 4 + j, col) - want).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn khatri_rao_dim_mismatch() {
        let a = ComplexMatrix::zeros(2, 2);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(khatri_rao(&a, &b).is_err());
    }

    #[test]
    fn synthesize_single_rank1_term() {
        let a = ComplexMatrix::new(2, 1, vec![c(1.0), c(0.0)]).unwrap();
        let b = ComplexMatrix::new(1, 1, vec![c(1.0)]).unwrap();
        let d = RealMatrix::new(1, 1, vec![1.0]).unwrap();
        let f = FactorSet::new(a, b, d).unwrap();
        let t = synthesize_cp5(&f, None).unwrap();
        assert_eq!(t.dims(), &[2, 1, 2, 1, 1]);
        assert!((t.get(&[0, 0, 0, 0, 0]) - c(1.0)).norm() < 1e-15);
        let total: f64 = t.data().iter().map(|z| z.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn synthesize_is_partially_symmetric() {
        let mut r = rng(5);
        let f = FactorSet::new(
            rand_cmatrix(3, 2, &mut r),
            rand_cmatrix(4, 2, &mut r),
            rand_rmatrix(3, 2, &mut r),
        )
        .unwrap();
        let t = synthesize_cp5(&f, None).unwrap();
        let dev = check_partial_symmetry(&t).unwrap();
        assert!(dev < 1e-14 * t.frobenius_norm().max(1.0), "dev = {dev}");
    }

    #[test]
    fn synthesize_is_linear_in_terms() {
        let mut r = rng(7);
        let a = rand_cmatrix(3, 2, &mut r);
        let b = rand_cmatrix(3, 2, &mut r);
        let d = rand_rmatrix(2, 2, &mut r);
        let f = FactorSet::new(a.clone(), b.clone(), d.clone()).unwrap();
        let t = synthesize_cp5(&f, None).unwrap();

        let take_col = |m: &ComplexMatrix, j: usize| {
            ComplexMatrix::new(m.rows(), 1, m.col_to_vec(j)).unwrap()
        };
        let take_rcol = |m: &RealMatrix, j: usize| {
            RealMatrix::new(m.rows(), 1, (0..m.rows()).map(|k| m.get(k, j)).collect()).unwrap()
        };
        let mut sum = ComplexTensor::zeros(t.dims().to_vec());
        for j in 0..2 {
            let fj = FactorSet::new(take_col(&a, j), take_col(&b, j), take_rcol(&d, j)).unwrap();
            let tj = synthesize_cp5(&fj, None).unwrap();
            for (s, v) in sum.data_mut().iter_mut().zip(tj.data()) {
                *s += *v;
            }
        }
        let diff = t.sub(&sum).unwrap().frobenius_norm();
        assert!(diff < 1e-13 * t.frobenius_norm(), "diff = {diff}");
    }

    #[test]
    fn matricize5_round_trip_exact() {
        let mut r = rng(3);
        let t = ComplexTensor::from_fn(vec![2, 3, 2, 3, 4], |_| cx(&mut r));
        let m = matricize5(&t).unwrap();
        let back = dematricize5(&m, 2, 3, 4).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn matricize5_matches_khatri_rao_structure() {
        let mut r = rng(9);
        let f = FactorSet::new(
            rand_cmatrix(3, 2, &mut r),
            rand_cmatrix(2, 2, &mut r),
            rand_rmatrix(3, 2, &mut r),
        )
        .unwrap();
        let t = synthesize_cp5(&f, None).unwrap();
        let m = matricize5(&t).unwrap();
        let left = khatri_rao(&f.a, &f.a.conj()).unwrap();
        let right = khatri_rao3(&f.b, &f.b.conj(), &f.d.to_complex()).unwrap();
        let model = left.matmul(&right.transpose()).unwrap();
        let diff = m.sub(&model).unwrap().frobenius_norm();
        assert!(diff < 1e-12 * m.frobenius_norm(), "diff = {diff}");
    }

    #[test]
    fn matricize5_zeros() {
        let t = ComplexTensor::zeros(vec![2, 2, 2, 2, 2]);
        let m = matricize5(&t).unwrap();
        assert_eq!(m.frobenius_norm(), 0.0);
    }

    #[test]
    fn matricize5_rejects_wrong_shape() {
        let t = ComplexTensor::zeros(vec![2, 3, 4, 3, 2]);
        assert!(matricize5(&t).is_err());
        let t3 = ComplexTensor::zeros(vec![2, 3, 4]);
        assert!(matricize5(&t3).is_err());
    }

    #[test]
    fn matricize3_structure_and_round_trip() {
        let mut r = rng(13);
        let a = rand_cmatrix(3, 2, &mut r);
        let b = rand_cmatrix(4, 2, &mut r);
        let s = rand_cmatrix(5, 2, &mut r);
        // X(i,j,k) = sum_r a(i,r) b(j,r) s(k,r)
        let x = ComplexTensor::from_fn(vec![3, 4, 5], |idx| {
            (0..2)
                .map(|rr| a.get(idx[0], rr) * b.get(idx[1], rr) * s.get(idx[2], rr))
                .sum()
        });
        let xm = matricize3(&x).unwrap();
        let model = khatri_rao(&a, &b).unwrap().matmul(&s.transpose()).unwrap();
        let diff = xm.sub(&model).unwrap().frobenius_norm();
        assert!(diff < 1e-12 * xm.frobenius_norm());
        let back = dematricize3(&xm, 3, 4).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn partial_symmetry_detects_perturbation() {
        let mut r = rng(17);
        let f = FactorSet::new(
            rand_cmatrix(2, 1, &mut r),
            rand_cmatrix(3, 1, &mut r),
            rand_rmatrix(2, 1, &mut r),
        )
        .unwrap();
        let mut t = synthesize_cp5(&f, None).unwrap();
        // off-pair entry: (i1,j1) != (i2,j2)
        let eps = 1e-3;
        let old = t.get(&[0, 1, 1, 0, 0]);
        t.set(&[0, 1, 1, 0, 0], old + c(eps));
        let dev = check_partial_symmetry(&t).unwrap();
        assert!((dev - eps).abs() < 1e-12, "dev = {dev}");

        let u = ComplexTensor::from_fn(vec![2, 2, 2, 2, 2], |_| cx(&mut r));
        assert!(check_partial_symmetry(&u).unwrap() > 0.0);
    }

    #[test]
    fn column_square_and_cube_round_trips() {
        let mut r = rng(19);
        let v: Vec<_> = (0..9).map(|_| cx(&mut r)).collect();
        let m = column_to_square(&v).unwrap();
        assert_eq!(square_to_column(&m), v);
        assert_eq!(m.get(0, 1), v[1]);

        let e1 = {
            let mut e = vec![c(0.0); 4];
            e[0] = c(1.0);
            e
        };
        let m1 = column_to_square(&e1).unwrap();
        assert_eq!(m1.get(0, 0), c(1.0));
        assert_eq!(m1.frobenius_norm(), 1.0);

        let w: Vec<_> = (0..12).map(|_| cx(&mut r)).collect();
        let cube = column_to_cube(&w, 2, 3).unwrap();
        assert_eq!(cube_to_column(&cube), w);
        assert_eq!(cube.get(&[1, 0, 2]), w[(1 * 2 + 0) * 3 + 2]);
    }

    #[test]
    fn vec_of_outer_product_is_hermitian() {
        let mut r = rng(23);
        let a: Vec<_> = (0..4).map(|_| cx(&mut r)).collect();
        let mut v = vec![c(0.0); 16];
        for i1 in 0..4 {
            for i2 in 0..4 {
                v[i1 * 4 + i2] = a[i1] * a[i2].conj();
            }
        }
        let m = column_to_square(&v).unwrap();
        assert!(m.hermitian_deviation() < 1e-15);
    }

    #[test]
    fn factor_set_enforces_conventions() {
        let mut r = rng(29);
        let f = FactorSet::new(
            rand_cmatrix(4, 3, &mut r),
            rand_cmatrix(5, 3, &mut r),
            rand_rmatrix(2, 3, &mut r),
        )
        .unwrap();
        for j in 0..3 {
            let ca = f.a.col_to_vec(j);
            let n: f64 = ca.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-14);
            let (mut bi, mut bm) = (0, -1.0);
            for (i, z) in ca.iter().enumerate() {
                if z.norm() > bm {
                    bm = z.norm();
                    bi = i;
                }
            }
            assert!(ca[bi].im.abs() < 1e-14 && ca[bi].re > 0.0);
        }
    }

    #[test]
    fn factor_set_scale_goes_into_d() {
        let mut r = rng(31);
        let a = rand_cmatrix(3, 2, &mut r);
        let b = rand_cmatrix(3, 2, &mut r);
        let d = rand_rmatrix(2, 2, &mut r);
        let t0 = synthesize_cp5(&FactorSet { a: a.clone(), b: b.clone(), d: d.clone() }, None).unwrap();
        // FactorSet::new renormalizes; the synthesized tensor must be unchanged
        let f = FactorSet::new(a, b, d).unwrap();
        let t1 = synthesize_cp5(&f, None).unwrap();
        let diff = t0.sub(&t1).unwrap().frobenius_norm();
        assert!(diff < 1e-12 * t0.frobenius_norm(), "diff = {diff}");
    }
}
