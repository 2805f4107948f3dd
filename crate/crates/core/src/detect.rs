//! Rank-1 detection tensors and the stacked null-space systems built from
//! them.
//!
//! Phi1(X, X) vanishes iff the matrix X is rank-1; Phi2(X, X) vanishes iff
//! the mode-1 matricization of the cube X is rank-1 (Phi2 is Phi1 applied to
//! that matricization under an index relabeling). Contracting the pairwise
//! detector tensors P_{s,t} = Phi1(U_s, U_t) against an unknown symmetric
//! coefficient matrix is a linear map whose null space reveals the
//! congruence structure shared by the U_r.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_evd, nullspace_vectors};
use crate::tensor::{ComplexMatrix, ComplexTensor};

/// Stacked linear system whose null vectors unfold into the symmetric
/// coefficient matrices of the detection conditions. Columns are indexed by
/// unordered pairs (s, t), s <= t; the detectors' symmetry in their two
/// arguments makes the restriction lossless, with off-diagonal columns
/// scaled by 2 to account for both ordered occurrences.
#[derive(Debug, Clone)]
pub struct DetectionSystem {
    pub stacked: ComplexMatrix,
    pub index_map: Vec<(usize, usize)>,
    /// Ascending singular values of the retained null vectors; filled by
    /// [`solve_detection`].
    pub smallest_singulars: Vec<f64>,
}

/// R complex symmetric matrices spanning the detection null space.
#[derive(Debug, Clone)]
pub struct SymmetricMatrixSet {
    pub mats: Vec<ComplexMatrix>,
    /// Condition number of the Gram matrix of vectorizations (linear
    /// independence diagnostic).
    pub gram_condition: f64,
}

/// Output of [`solve_detection`].
#[derive(Debug, Clone)]
pub struct DetectionSolution {
    pub set: SymmetricMatrixSet,
    /// Smallest non-null singular value over the largest null one; large is
    /// good, below 10 raises the warning flag.
    pub gap: f64,
    pub gap_warning: bool,
}

/// [Phi1(X,Y)]_{i,j,k,l} = x_ik y_jl + x_jl y_ik - x_il y_jk - x_jk y_il.
pub fn phi1(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<ComplexTensor> {
    let n = x.rows();
    if x.cols() != n || y.rows() != n || y.cols() != n {
        return Err(Error::dims(
            "phi1",
            format!("two {n}x{n} matrices"),
            format!("{}x{} and {}x{}", x.rows(), x.cols(), y.rows(), y.cols()),
        ));
    }
    let mut t = ComplexTensor::zeros(vec![n, n, n, n]);
    let mut off = 0usize;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = x.get(i, k) * y.get(j, l) + x.get(j, l) * y.get(i, k)
                        - x.get(i, l) * y.get(j, k)
                        - x.get(j, k) * y.get(i, l);
                    t.data_mut()[off] = v;
                    off += 1;
                }
            }
        }
    }
    Ok(t)
}

/// [Phi2(X,Y)]_{i,j,k,l,m,n} = x_ikm y_jln + x_jln y_ikm - x_jkm y_iln
/// - x_iln y_jkm; equals Phi1 on the mode-1 matricizations under the
/// relabeling (k,m) -> column k*K + m.
pub fn phi2(x: &ComplexTensor, y: &ComplexTensor) -> Result<ComplexTensor> {
    let d = x.dims();
    if d.len() != 3 || d[0] != d[1] || y.dims() != d {
        return Err(Error::dims(
            "phi2",
            "two equal (J,J,K) cubes",
            format!("{:?} and {:?}", x.dims(), y.dims()),
        ));
    }
    let (j, kk) = (d[0], d[2]);
    let mut t = ComplexTensor::zeros(vec![j, j, j, j, kk, kk]);
    let mut off = 0usize;
    for i in 0..j {
        for jj in 0..j {
            for k in 0..j {
                for l in 0..j {
                    for m in 0..kk {
                        for n in 0..kk {
                            let v = x.get(&[i, k, m]) * y.get(&[jj, l, n])
                                + x.get(&[jj, l, n]) * y.get(&[i, k, m])
                                - x.get(&[jj, k, m]) * y.get(&[i, l, n])
                                - x.get(&[i, l, n]) * y.get(&[jj, k, m]);
                            t.data_mut()[off] = v;
                            off += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(t)
}

fn pair_index_map(r: usize) -> Vec<(usize, usize)> {
    let mut map = Vec::with_capacity(r * (r + 1) / 2);
    for s in 0..r {
        for t in s..r {
            map.push((s, t));
        }
    }
    map
}

/// Stack Phi1(U_s, U_t) over unordered pairs into a detection system.
pub fn build_p_system(us: &[ComplexMatrix]) -> Result<DetectionSystem> {
    if us.is_empty() {
        return Err(Error::Degenerate {
            context: "build_p_system",
            detail: "empty matrix list".into(),
        });
    }
    let map = pair_index_map(us.len());
    let rows = us[0].rows().pow(4);
    let mut stacked = ComplexMatrix::zeros(rows, map.len());
    for (col, &(s, t)) in map.iter().enumerate() {
        let p = phi1(&us[s], &us[t])?;
        let w = if s == t { 1.0 } else { 2.0 };
        for (row, v) in p.data().iter().enumerate() {
            stacked.set(row, col, v * w);
        }
    }
    Ok(DetectionSystem {
        stacked,
        index_map: map,
        smallest_singulars: Vec::new(),
    })
}

/// Stack Phi2(V_s, V_t) over unordered pairs into a detection system.
pub fn build_q_system(vs: &[ComplexTensor]) -> Result<DetectionSystem> {
    if vs.is_empty() {
        return Err(Error::Degenerate {
            context: "build_q_system",
            detail: "empty cube list".into(),
        });
    }
    let map = pair_index_map(vs.len());
    let d = vs[0].dims();
    let rows = d[0].pow(4) * d[2].pow(2);
    let mut stacked = ComplexMatrix::zeros(rows, map.len());
    for (col, &(s, t)) in map.iter().enumerate() {
        let q = phi2(&vs[s], &vs[t])?;
        let w = if s == t { 1.0 } else { 2.0 };
        for (row, v) in q.data().iter().enumerate() {
            stacked.set(row, col, v * w);
        }
    }
    Ok(DetectionSystem {
        stacked,
        index_map: map,
        smallest_singulars: Vec::new(),
    })
}

/// Extract the R null-space vectors of the stacked system and unfold them
/// into unit-norm complex symmetric R x R matrices. The pair value lands at
/// both (s,t) and (t,s); the diagonal is taken as-is (the factor 2 sits in
/// the off-diagonal columns of the stack).
pub fn solve_detection(sys: &mut DetectionSystem, r: usize) -> Result<DetectionSolution> {
    let cols = sys.stacked.cols();
    if cols != r * (r + 1) / 2 {
        return Err(Error::dims(
            "solve_detection",
            format!("{} pair columns for rank {r}", r * (r + 1) / 2),
            format!("{cols}"),
        ));
    }
    if sys.stacked.rows() + r < cols {
        return Err(Error::InsufficientData {
            detail: format!(
                "detection system underdetermined: {} rows for {} unknowns minus {} null directions",
                sys.stacked.rows(),
                cols,
                r
            ),
        });
    }
    let (null_vecs, s_desc) = nullspace_vectors(&sys.stacked, r)?;
    sys.smallest_singulars = null_vecs
        .iter()
        .enumerate()
        .map(|(j, _)| s_desc[cols - 1 - j])
        .collect();

    let gap = if cols > r {
        let largest_null = s_desc[cols - r];
        let smallest_kept = s_desc[cols - r - 1];
        if largest_null == 0.0 {
            f64::INFINITY
        } else {
            smallest_kept / largest_null
        }
    } else {
        f64::INFINITY
    };

    let mut mats = Vec::with_capacity(r);
    for y in &null_vecs {
        let mut m = ComplexMatrix::zeros(r, r);
        for (idx, &(s, t)) in sys.index_map.iter().enumerate() {
            m.set(s, t, y[idx]);
            m.set(t, s, y[idx]);
        }
        let norm = m.frobenius_norm();
        if norm > 0.0 {
            m.scale(Complex64::new(1.0 / norm, 0.0));
        }
        mats.push(m);
    }

    // Gram condition of the vectorized set
    let gram = ComplexMatrix::from_fn(r, r, |a, b| {
        mats[a]
            .data()
            .iter()
            .zip(mats[b].data())
            .map(|(x, y)| x.conj() * y)
            .sum()
    });
    let evd = hermitian_evd(&gram, false)?;
    let lmax = evd.eigenvalues.first().copied().unwrap_or(0.0).abs();
    let lmin = evd.eigenvalues.last().copied().unwrap_or(0.0).abs();
    let gram_condition = if lmin == 0.0 { f64::INFINITY } else { lmax / lmin };

    Ok(DetectionSolution {
        set: SymmetricMatrixSet {
            mats,
            gram_condition,
        },
        gap,
        gap_warning: gap < 10.0,
    })
}
