//! CPS5-JD: direct decomposition of a fifth-order partially symmetric
//! tensor.
//!
//! Steps: matricize to I^2 x (J^2 K); truncated SVD with the singular values
//! folded into the right factor; per-component phase normalization making
//! the reshaped left factors Hermitian and the reshaped (conjugated) right
//! factors slice-Hermitian; pairwise rank-1 detection systems whose null
//! spaces yield two families of complex symmetric matrices congruent to
//! diag by the same real matrix F; real non-orthogonal joint diagonalization
//! of their real and imaginary parts; rank-1 recovery of the loadings; and a
//! final least-squares refit of the real fifth-mode loadings.
//!
//! No step iterates on the loading matrices themselves.

use num_complex::Complex64;
use serde::Serialize;

use crate::cumulant;
use crate::detect::{build_p_system, build_q_system, solve_detection};
use crate::error::{Error, Result};
use crate::linalg::{
    self, hermitianizing_phase, least_squares, pseudo_inverse, rank1_matrix_approx, truncated_svd,
};
use crate::rnjd::{complex_symmetric_jd, invert_real, rnjd_solve, JdProblem};
use crate::tensor::{
    check_partial_symmetry, column_to_cube, column_to_square, cube_slice, khatri_rao, khatri_rao3,
    matricize5, ComplexMatrix, ComplexTensor, FactorSet, RealMatrix,
};

/// Options for [`cps5_jd`].
#[derive(Debug, Clone)]
pub struct Cps5JdOptions {
    pub rank: usize,
    /// rcond for the pseudo-inverses taken inside the pipeline.
    pub svd_rcond: f64,
    /// Detection-gap value below which a warning is recorded.
    pub gap_warn_threshold: f64,
    /// Condition cap above which a W_r matrix is dropped instead of inverted.
    pub w_cond_cap: f64,
    pub rnjd_max_sweeps: usize,
    pub rnjd_tol: f64,
    /// Refit D by least squares at the end (default on).
    pub refit_d: bool,
    /// Input partial-symmetry deviation (relative) above which a warning is
    /// recorded; the decomposition proceeds regardless.
    pub symmetry_warn_tol: f64,
}

impl Cps5JdOptions {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            svd_rcond: 1e-12,
            gap_warn_threshold: 10.0,
            w_cond_cap: 1e10,
            rnjd_max_sweeps: 200,
            rnjd_tol: 1e-12,
            refit_d: true,
            symmetry_warn_tol: 1e-6,
        }
    }
}

/// Stage counters; the decomposition performs a fixed number of each stage,
/// independent of any convergence behavior of the loadings.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OpCounts {
    pub svd: u32,
    pub alpha_normalizations: u32,
    pub detection_solves: u32,
    pub rnjd_calls: u32,
    pub rank1_recoveries: u32,
}

/// Diagnostics collected along the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct Cps5Report {
    /// Singular values of the matricized tensor (leading R).
    pub singular_values: Vec<f64>,
    /// Per-component normalization phases.
    pub alphas: Vec<Complex64>,
    /// Hermitian deviation of each normalized left reshape.
    pub u_herm_deviation: Vec<f64>,
    /// Worst slice Hermitian deviation of each normalized right cube.
    pub v_herm_deviation: Vec<f64>,
    /// Detection singular-value gaps (smallest kept / largest null).
    pub detection_gap_p: f64,
    pub detection_gap_q: f64,
    /// Number of W_r matrices dropped by the condition cap.
    pub w_dropped: usize,
    /// Final relative off-diagonal criterion of the joint diagonalization.
    pub rnjd_criterion: f64,
    pub rnjd_sweeps: usize,
    /// Relative imaginary mass of F before realification; None on the real
    /// joint-diagonalization path, which is real by construction (the
    /// complex diagnostic path fills it).
    pub f_imag_defect: Option<f64>,
    /// Relative imaginary residue discarded when projecting D real.
    pub d_imag_residue: f64,
    /// Relative partial-symmetry deviation of the input.
    pub input_symmetry: f64,
    pub warnings: Vec<String>,
    pub counts: OpCounts,
}

/// Phase-normalize one singular pair: alpha from the trace ratio of the left
/// reshape; returns (alpha, alpha * Ur, conj(alpha) * Vr, Hermitian
/// deviation of the matrix, worst slice deviation of the cube).
pub fn alpha_normalize(
    ur: &ComplexMatrix,
    vr: &ComplexTensor,
) -> Result<(Complex64, ComplexMatrix, ComplexTensor, f64, f64)> {
    if ur.frobenius_norm() == 0.0 {
        return Err(Error::Degenerate {
            context: "alpha_normalize",
            detail: "zero left factor".into(),
        });
    }
    let alpha = hermitianizing_phase(ur);
    let mut u = ur.clone();
    u.scale(alpha);
    let mut v = vr.clone();
    v.scale(alpha.conj());
    let u_dev = u.hermitian_deviation();
    let mut v_dev = 0.0f64;
    for k in 0..v.dims()[2] {
        v_dev = v_dev.max(cube_slice(&v, k).hermitian_deviation());
    }
    Ok((alpha, u, v, u_dev, v_dev))
}

/// Split a complex matrix into its real part and report the relative
/// imaginary defect ||Im|| / ||M||.
pub fn realify_f(f_raw: &ComplexMatrix) -> (RealMatrix, f64) {
    let re = RealMatrix::from_fn(f_raw.rows(), f_raw.cols(), |i, j| f_raw.get(i, j).re);
    let norm = f_raw.frobenius_norm();
    let im: f64 = f_raw
        .data()
        .iter()
        .map(|z| z.im * z.im)
        .sum::<f64>()
        .sqrt();
    let defect = if norm == 0.0 { 0.0 } else { im / norm };
    (re, defect)
}

/// Recover A from the Khatri-Rao-structured matrix UF (columns approximately
/// a_r (x) conj(a_r)): reshape, symmetrize, dominant Hermitian eigenvector
/// with the unit-norm and phase conventions.
pub fn recover_a(uf: &ComplexMatrix, i: usize) -> Result<ComplexMatrix> {
    if uf.rows() != i * i {
        return Err(Error::dims(
            "recover_a",
            format!("{} rows", i * i),
            format!("{}", uf.rows()),
        ));
    }
    let r = uf.cols();
    let mut a = ComplexMatrix::zeros(i, r);
    for c in 0..r {
        let m = column_to_square(&uf.col_to_vec(c))?;
        let (vec, _, _) = linalg::hermitian_rank1_vector(&m)?;
        a.set_col(c, &vec);
    }
    Ok(a)
}

/// Recover B and the real fifth-mode loadings from the double
/// Khatri-Rao-structured matrix (columns approximately
/// b_r (x) conj(b_r) (x) d_r). Returns (B, D, worst relative imaginary
/// residue of the recovered d columns).
pub fn recover_bd(vf: &ComplexMatrix, j: usize, k: usize) -> Result<(ComplexMatrix, RealMatrix, f64)> {
    if vf.rows() != j * j * k {
        return Err(Error::dims(
            "recover_bd",
            format!("{} rows", j * j * k),
            format!("{}", vf.rows()),
        ));
    }
    let r = vf.cols();
    let mut b = ComplexMatrix::zeros(j, r);
    let mut d = RealMatrix::zeros(k, r);
    let mut worst_residue = 0.0f64;
    for c in 0..r {
        let col = vf.col_to_vec(c);
        // unfold the cube to (J^2) x K; the flat layouts coincide
        let m = ComplexMatrix::new(j * j, k, col)?;
        let (g, dt, sigma) = rank1_matrix_approx(&m);
        let gm = column_to_square(&g)?;
        let rot = hermitianizing_phase(&gm);
        let mut gm_rot = gm;
        gm_rot.scale(rot);
        let (bvec, mu, _) = linalg::hermitian_rank1_vector(&gm_rot)?;
        b.set_col(c, &bvec);
        // d(q) = sigma * mu * conj(rot) * conj(dt(q)), real up to noise
        let scale = rot.conj() * (sigma * mu.signum() * mu.abs());
        let mut im_mass = 0.0f64;
        let mut re_mass = 0.0f64;
        for q in 0..k {
            let val = scale * dt[q].conj();
            d.set(q, c, val.re);
            im_mass += val.im * val.im;
            re_mass += val.norm_sqr();
        }
        if re_mass > 0.0 {
            worst_residue = worst_residue.max((im_mass / re_mass).sqrt());
        }
    }
    Ok((b, d, worst_residue))
}

/// Least-squares refit of the real fifth-mode loadings given A and B.
/// Returns (D, relative imaginary residue discarded by the projection).
pub fn refit_d(t: &ComplexTensor, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<(RealMatrix, f64)> {
    let dims = t.dims();
    if dims.len() != 5 || dims[0] != a.rows() || dims[1] != b.rows() {
        return Err(Error::dims(
            "refit_d",
            "5-way tensor matching A and B",
            format!("{dims:?}"),
        ));
    }
    let k = dims[4];
    // coefficient chain over (i1, j1, i2, j2), row-major, matching the
    // fifth-mode unfolding of the row-major tensor layout
    let chain = khatri_rao3(&khatri_rao(a, b)?, &a.conj(), &b.conj())?;
    let t5 = ComplexMatrix::new(chain.rows(), k, t.data().to_vec())?;
    let x = least_squares(&chain, &t5)?; // R x K, equals D^T
    let mut d = RealMatrix::zeros(k, x.rows());
    let mut im_mass = 0.0f64;
    let mut mass = 0.0f64;
    for r in 0..x.rows() {
        for kk in 0..k {
            let v = x.get(r, kk);
            d.set(kk, r, v.re);
            im_mass += v.im * v.im;
            mass += v.norm_sqr();
        }
    }
    let residue = if mass == 0.0 { 0.0 } else { (im_mass / mass).sqrt() };
    Ok((d, residue))
}

/// Everything computed before the diagonalization step; shared between the
/// real pipeline and the complex-arithmetic diagnostic.
struct DetectionStages {
    svd_s: Vec<f64>,
    u_thin: ComplexMatrix,
    w_scaled: ComplexMatrix,
    alphas: Vec<Complex64>,
    u_mats: Vec<ComplexMatrix>,
    cubes: Vec<ComplexTensor>,
    u_devs: Vec<f64>,
    v_devs: Vec<f64>,
    m_set: Vec<ComplexMatrix>,
    w_inv_set: Vec<ComplexMatrix>,
    gap_p: f64,
    gap_q: f64,
    w_dropped: usize,
    warnings: Vec<String>,
    input_symmetry: f64,
    counts: OpCounts,
}

fn detection_stages(t: &ComplexTensor, opts: &Cps5JdOptions) -> Result<DetectionStages> {
    let dims = t.dims();
    if dims.len() != 5 || dims[0] != dims[2] || dims[1] != dims[3] {
        return Err(Error::dims(
            "cps5_jd",
            "5-way tensor with dims (I,J,I,J,K)",
            format!("{dims:?}"),
        ));
    }
    let (i, j, k) = (dims[0], dims[1], dims[4]);
    let r = opts.rank;
    let max_rank = (i * i).min(j * j * k);
    if r == 0 || r > max_rank {
        return Err(Error::RankOutOfRange {
            context: "cps5_jd",
            rank: r,
            max: max_rank,
        });
    }

    let mut warnings = Vec::new();
    let tnorm = t.frobenius_norm();
    let input_symmetry = if tnorm == 0.0 {
        0.0
    } else {
        check_partial_symmetry(t)? / tnorm
    };
    if input_symmetry > opts.symmetry_warn_tol {
        warnings.push(format!(
            "input partial-symmetry deviation {input_symmetry:.3e} above tolerance"
        ));
    }

    let mut counts = OpCounts::default();
    let mat = matricize5(t)?;
    let svd = truncated_svd(&mat, r)?;
    counts.svd += 1;

    // fold the singular values into the conjugated right factor so the two
    // recovery equations share one F
    let mut w_scaled = ComplexMatrix::zeros(j * j * k, r);
    for c in 0..r {
        for row in 0..j * j * k {
            w_scaled.set(row, c, svd.v.get(row, c).conj() * svd.s[c]);
        }
    }

    let mut alphas = Vec::with_capacity(r);
    let mut u_mats = Vec::with_capacity(r);
    let mut cubes = Vec::with_capacity(r);
    let mut u_devs = Vec::with_capacity(r);
    let mut v_devs = Vec::with_capacity(r);
    let mut u_thin = ComplexMatrix::zeros(i * i, r);
    for c in 0..r {
        let ur = column_to_square(&svd.u.col_to_vec(c))?;
        let cube = column_to_cube(&w_scaled.col_to_vec(c), j, k)?;
        let (alpha, u_n, v_n, u_dev, v_dev) = alpha_normalize(&ur, &cube)?;
        counts.alpha_normalizations += 1;
        // carry the normalization back into the thin factors
        for row in 0..i * i {
            u_thin.set(row, c, svd.u.get(row, c) * alpha);
        }
        for row in 0..j * j * k {
            let v = w_scaled.get(row, c) * alpha.conj();
            w_scaled.set(row, c, v);
        }
        alphas.push(alpha);
        u_mats.push(u_n);
        cubes.push(v_n);
        u_devs.push(u_dev);
        v_devs.push(v_dev);
    }

    let (m_set, w_set, gap_p, gap_q) = if r == 1 {
        (Vec::new(), Vec::new(), f64::INFINITY, f64::INFINITY)
    } else {
        let mut p_sys = build_p_system(&u_mats)?;
        let p_sol = solve_detection(&mut p_sys, r)?;
        let mut q_sys = build_q_system(&cubes)?;
        let q_sol = solve_detection(&mut q_sys, r)?;
        counts.detection_solves += 2;
        if p_sol.gap < opts.gap_warn_threshold {
            warnings.push(format!("P-system detection gap {:.3e} below threshold", p_sol.gap));
        }
        if q_sol.gap < opts.gap_warn_threshold {
            warnings.push(format!("Q-system detection gap {:.3e} below threshold", q_sol.gap));
        }
        (p_sol.set.mats, q_sol.set.mats, p_sol.gap, q_sol.gap)
    };

    // invert the W_r matrices under a condition cap
    let mut w_inv_set = Vec::new();
    let mut w_dropped = 0usize;
    for wm in &w_set {
        let s = linalg::svd(wm);
        let smax = s.s[0];
        let smin = s.s[s.s.len() - 1];
        if smin <= 0.0 || smax / smin > opts.w_cond_cap {
            w_dropped += 1;
            continue;
        }
        let mut inv = pseudo_inverse(wm, opts.svd_rcond);
        // W_r is symmetric, so its inverse is too; enforce exactly
        inv = symmetrize_t(&inv);
        let norm = inv.frobenius_norm();
        if norm > 0.0 {
            inv.scale(Complex64::new(1.0 / norm, 0.0));
        }
        w_inv_set.push(inv);
    }
    if w_dropped > 0 {
        warnings.push(format!("{w_dropped} W matrices dropped by the condition cap"));
    }

    Ok(DetectionStages {
        svd_s: svd.s,
        u_thin,
        w_scaled,
        alphas,
        u_mats,
        cubes,
        u_devs,
        v_devs,
        m_set,
        w_inv_set,
        gap_p,
        gap_q,
        w_dropped,
        warnings,
        input_symmetry,
        counts,
    })
}

fn symmetrize_t(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
}

/// Real symmetric parts of the normalized target set for the joint
/// diagonalization: Re and Im of every M_r and every kept W_r^-1, parts with
/// negligible mass skipped.
fn rnjd_targets(m_set: &[ComplexMatrix], w_inv_set: &[ComplexMatrix]) -> Vec<RealMatrix> {
    let mut targets = Vec::new();
    let mut push_parts = |m: &ComplexMatrix| {
        let n = m.rows();
        let re = RealMatrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, j).re + m.get(j, i).re));
        let im = RealMatrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, j).im + m.get(j, i).im));
        if re.frobenius_norm() >= 1e-7 {
            targets.push(re);
        }
        if im.frobenius_norm() >= 1e-7 {
            targets.push(im);
        }
    };
    for m in m_set {
        push_parts(m);
    }
    for w in w_inv_set {
        push_parts(w);
    }
    targets
}

/// Run the full decomposition. Returns the recovered loadings and the
/// diagnostics report.
pub fn cps5_jd(t: &ComplexTensor, opts: &Cps5JdOptions) -> Result<(FactorSet, Cps5Report)> {
    let dims = t.dims().to_vec();
    let (i, j, k) = (dims[0], dims[1], dims[4]);
    let r = opts.rank;
    let mut stages = detection_stages(t, opts)?;

    let (f, rnjd_criterion, rnjd_sweeps) = if r == 1 {
        (RealMatrix::identity(1), 0.0, 0)
    } else {
        let targets = rnjd_targets(&stages.m_set, &stages.w_inv_set);
        if targets.is_empty() {
            return Err(Error::Degenerate {
                context: "cps5_jd",
                detail: "no usable joint-diagonalization targets".into(),
            });
        }
        let mut problem = JdProblem::new(targets);
        problem.max_sweeps = opts.rnjd_max_sweeps;
        problem.tol = opts.rnjd_tol;
        let sol = rnjd_solve(&problem)?;
        stages.counts.rnjd_calls += 1;
        (sol.f, sol.offdiag_final, sol.sweeps)
    };

    // UF has columns a_r (x) conj(a_r) up to permutation and real scale
    let fc = f.to_complex();
    let uf = stages.u_thin.matmul(&fc)?;
    let a = recover_a(&uf, i)?;
    stages.counts.rank1_recoveries += r as u32;

    let f_inv = invert_real(&f).ok_or_else(|| Error::Degenerate {
        context: "cps5_jd",
        detail: "joint diagonalizer returned a singular F".into(),
    })?;
    let vf = stages.w_scaled.matmul(&f_inv.transpose().to_complex())?;
    let (b, d_rank1, bd_residue) = recover_bd(&vf, j, k)?;
    stages.counts.rank1_recoveries += r as u32;

    let (d, d_imag_residue) = if opts.refit_d {
        refit_d(t, &a, &b)?
    } else {
        (d_rank1, bd_residue)
    };

    let factors = FactorSet::new(a, b, d)?;
    let report = Cps5Report {
        singular_values: stages.svd_s,
        alphas: stages.alphas,
        u_herm_deviation: stages.u_devs,
        v_herm_deviation: stages.v_devs,
        detection_gap_p: stages.gap_p,
        detection_gap_q: stages.gap_q,
        w_dropped: stages.w_dropped,
        rnjd_criterion,
        rnjd_sweeps,
        f_imag_defect: None,
        d_imag_residue,
        input_symmetry: stages.input_symmetry,
        warnings: stages.warnings,
        counts: stages.counts,
    };
    Ok((factors, report))
}

/// Diagnostic path: estimate F from the detection systems in complex
/// arithmetic (complex symmetric joint diagonalization), fix each column's
/// phase to minimize its imaginary mass, and report the remaining relative
/// imaginary defect. On clean partially symmetric inputs the defect is tiny,
/// confirming that F is real.
pub fn estimate_f_complex(t: &ComplexTensor, opts: &Cps5JdOptions) -> Result<(ComplexMatrix, f64)> {
    let r = opts.rank;
    if r < 2 {
        return Ok((ComplexMatrix::identity(1), 0.0));
    }
    let stages = detection_stages(t, opts)?;
    let mut targets = stages.m_set.clone();
    targets.extend(stages.w_inv_set.iter().cloned());
    let (w, _) = complex_symmetric_jd(&targets, opts.rnjd_max_sweeps, opts.rnjd_tol)?;
    let f_raw = pseudo_inverse(&w, opts.svd_rcond);
    // per-column phase: rotate to minimize the imaginary mass
    let mut f = f_raw.clone();
    for c in 0..r {
        let col = f_raw.col_to_vec(c);
        let (mut xx, mut xy, mut yy) = (0.0f64, 0.0f64, 0.0f64);
        for z in &col {
            xx += z.re * z.re;
            xy += z.re * z.im;
            yy += z.im * z.im;
        }
        // smallest eigenvector (s, c) of [[xx, xy], [xy, yy]] minimizes
        // ||x sin + y cos||
        let tr = xx + yy;
        let det = xx * yy - xy * xy;
        let lmin = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
        let (vs, vc) = if xy.abs() > 1e-300 {
            (lmin - yy, xy)
        } else if xx <= yy {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let norm = (vs * vs + vc * vc).sqrt();
        let (s, cc) = (vs / norm, vc / norm);
        let rot = Complex64::new(cc, s);
        for (row, z) in col.iter().enumerate() {
            f.set(row, c, rot * z);
        }
    }
    let (_, defect) = realify_f(&f);
    Ok((f, defect))
}
