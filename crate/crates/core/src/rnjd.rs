//! Non-orthogonal joint diagonalization by congruence: given symmetric
//! targets {G_k}, find an invertible F with G_k = F Lambda_k F^T, Lambda_k
//! diagonal.
//!
//! The solver runs elementary unit-triangular (LU-style) Jacobi sweeps on
//! the inverse factor W = F^-1: each update W <- (I + a e_i e_j^T) W picks
//! the coordinate-wise exact minimizer of the off-diagonal criterion
//! sum_k ||off(W G_k W^T)||_F^2, so the criterion never increases across
//! accepted updates. Rows of W are renormalized once per sweep to pin the
//! scaling indeterminacy. The same sweep, in complex arithmetic, serves as
//! the diagnostic complex-symmetric diagonalizer.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::hermitian_evd;
use crate::tensor::{ComplexMatrix, RealMatrix};

/// Joint-diagonalization problem: real symmetric targets plus stopping
/// parameters.
#[derive(Debug, Clone)]
pub struct JdProblem {
    pub targets: Vec<RealMatrix>,
    pub max_sweeps: usize,
    /// Relative off-diagonal criterion target.
    pub tol: f64,
}

impl JdProblem {
    pub fn new(targets: Vec<RealMatrix>) -> Self {
        Self {
            targets,
            max_sweeps: 200,
            tol: 1e-12,
        }
    }
}

/// Solution: invertible F, per-target diagonals, and the achieved relative
/// off-diagonal criterion.
#[derive(Debug, Clone)]
pub struct JdSolution {
    pub f: RealMatrix,
    pub diags: Vec<Vec<f64>>,
    pub offdiag_final: f64,
    pub sweeps: usize,
    /// Relative criterion recorded after each sweep.
    pub crit_trace: Vec<f64>,
}

/// Scalar abstraction shared by the real and complex sweeps.
pub(crate) trait JdScalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn zero() -> Self;
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn div_real(self, d: f64) -> Self;
    fn mul_real(self, s: f64) -> Self;
    fn is_finite(self) -> bool;
}

impl JdScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn conj(self) -> Self {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn div_real(self, d: f64) -> Self {
        self / d
    }
    fn mul_real(self, s: f64) -> Self {
        self * s
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl JdScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn div_real(self, d: f64) -> Self {
        self / d
    }
    fn mul_real(self, s: f64) -> Self {
        self * s
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Tiny square-matrix scratch type for the sweeps.
#[derive(Clone)]
pub(crate) struct Sq<S> {
    n: usize,
    d: Vec<S>,
}

impl<S: JdScalar> Sq<S> {
    fn zeros(n: usize) -> Self {
        Sq {
            n,
            d: vec![S::zero(); n * n],
        }
    }
    #[inline]
    fn get(&self, i: usize, j: usize) -> S {
        self.d[i * self.n + j]
    }
    #[inline]
    fn set(&mut self, i: usize, j: usize, v: S) {
        self.d[i * self.n + j] = v;
    }
    fn norm_sqr(&self) -> f64 {
        self.d.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn offdiag_sq<S: JdScalar>(targets: &[Sq<S>]) -> f64 {
    let mut s = 0.0;
    for g in targets {
        for i in 0..g.n {
            for j in 0..g.n {
                if i != j {
                    s += g.get(i, j).norm_sqr();
                }
            }
        }
    }
    s
}

/// Apply W <- (I + a e_i e_j^T) W and the matching congruence to every
/// target.
fn apply_elementary<S: JdScalar>(targets: &mut [Sq<S>], w: &mut Sq<S>, i: usize, j: usize, a: S) {
    let n = w.n;
    for g in targets.iter_mut() {
        // row i += a * row j, then col i += a * col j
        for q in 0..n {
            let v = g.get(i, q) + a * g.get(j, q);
            g.set(i, q, v);
        }
        for p in 0..n {
            let v = g.get(p, i) + a * g.get(p, j);
            g.set(p, i, v);
        }
    }
    for q in 0..n {
        let v = w.get(i, q) + a * w.get(j, q);
        w.set(i, q, v);
    }
}

fn renormalize_rows<S: JdScalar>(targets: &mut [Sq<S>], w: &mut Sq<S>) {
    let n = w.n;
    let mut scale = vec![1.0f64; n];
    for (i, s) in scale.iter_mut().enumerate() {
        let norm: f64 = (0..n).map(|q| w.get(i, q).norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            *s = 1.0 / norm;
        }
    }
    for i in 0..n {
        for q in 0..n {
            let v = w.get(i, q).mul_real(scale[i]);
            w.set(i, q, v);
        }
    }
    for g in targets.iter_mut() {
        for p in 0..n {
            for q in 0..n {
                let v = g.get(p, q).mul_real(scale[p] * scale[q]);
                g.set(p, q, v);
            }
        }
    }
}

/// One triangular sweep over all ordered pairs; returns the criterion after
/// the sweep. Criterion is non-increasing across individual updates.
fn triangular_sweep<S: JdScalar>(targets: &mut [Sq<S>], w: &mut Sq<S>) -> f64 {
    let n = w.n;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // minimize sum_k sum_{q != i} |G_iq + a G_jq|^2 over a
            let mut num = S::zero();
            let mut den = 0.0f64;
            for g in targets.iter() {
                for q in 0..n {
                    if q == i {
                        continue;
                    }
                    let giq = g.get(i, q);
                    let gjq = g.get(j, q);
                    num = num + gjq.conj() * giq;
                    den += gjq.norm_sqr();
                }
            }
            if den <= 0.0 {
                continue;
            }
            let a = -num.div_real(den);
            if !a.is_finite() || a.norm_sqr() == 0.0 {
                continue;
            }
            #[cfg(debug_assertions)]
            let before = offdiag_sq(targets);
            apply_elementary(targets, w, i, j, a);
            #[cfg(debug_assertions)]
            {
                let after = offdiag_sq(targets);
                debug_assert!(
                    after <= before * (1.0 + 1e-12) + 1e-300,
                    "elementary update increased criterion: {before} -> {after}"
                );
            }
        }
    }
    offdiag_sq(targets)
}

pub(crate) struct SweepOutcome<S> {
    pub w: Sq<S>,
    pub crit_rel: f64,
    pub sweeps: usize,
    pub trace: Vec<f64>,
}

/// Shared driver: iterate sweeps from the given start until the relative
/// criterion drops below tol, progress stalls, or max_sweeps is hit.
fn run_sweeps<S: JdScalar>(
    mut targets: Vec<Sq<S>>,
    mut w: Sq<S>,
    max_sweeps: usize,
    tol: f64,
    context: &'static str,
) -> Result<SweepOutcome<S>> {
    let denom: f64 = targets.iter().map(|g| g.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
    let crit0 = offdiag_sq(&targets);
    let mut crit = crit0;
    let mut trace = vec![crit / denom];
    let mut sweeps = 0usize;
    while sweeps < max_sweeps && crit / denom > tol {
        let before = crit;
        crit = triangular_sweep(&mut targets, &mut w);
        renormalize_rows(&mut targets, &mut w);
        crit = offdiag_sq(&targets);
        sweeps += 1;
        trace.push(crit / denom);
        if !crit.is_finite() || crit > 1e3 * crit0.max(denom * 1e-300) {
            return Err(Error::Diverged {
                context,
                detail: format!(
                    "criterion grew from {crit0:.3e} to {crit:.3e} after {sweeps} sweeps"
                ),
            });
        }
        // stall: negligible relative improvement over a full sweep
        if before > 0.0 && before - crit <= before * 1e-4 {
            break;
        }
    }
    Ok(SweepOutcome {
        w,
        crit_rel: crit / denom,
        sweeps,
        trace,
    })
}

/// Off-diagonal criterion sum_k ||off(W G_k W^T)||_F^2 for a candidate
/// inverse factor W.
pub fn offdiag_criterion(w: &RealMatrix, targets: &[RealMatrix]) -> f64 {
    let n = w.rows();
    let mut total = 0.0;
    for g in targets {
        let wg = w.matmul(g).expect("dims");
        let wgwt = wg.matmul(&w.transpose()).expect("dims");
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += wgwt.get(i, j) * wgwt.get(i, j);
                }
            }
        }
    }
    total
}

fn to_sq(m: &RealMatrix) -> Sq<f64> {
    let n = m.rows();
    let mut s = Sq::zeros(n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, 0.5 * (m.get(i, j) + m.get(j, i)));
        }
    }
    s
}

/// Whitening start from the principal (largest-norm) target: W0 =
/// |Lambda|^{-1/2} Q^T from its eigendecomposition, falling back to the
/// identity when that target is near-singular. The identity candidate is
/// kept whenever it already scores no worse, so already-diagonal target
/// sets return F = I without sweeps.
fn initial_w(targets: &[Sq<f64>]) -> Sq<f64> {
    let n = targets[0].n;
    let mut ident = Sq::zeros(n);
    for i in 0..n {
        ident.set(i, i, 1.0);
    }
    let principal = targets
        .iter()
        .max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap())
        .unwrap();
    let cm = ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(principal.get(i, j), 0.0));
    let Ok(evd) = hermitian_evd(&cm, false) else {
        return ident;
    };
    let lmax = evd.eigenvalues[0].abs();
    let lmin = evd.eigenvalues[n - 1].abs();
    if lmax == 0.0 || lmin < 1e-12 * lmax {
        return ident;
    }
    let mut w0 = Sq::zeros(n);
    for i in 0..n {
        let s = 1.0 / evd.eigenvalues[i].abs().sqrt();
        for j in 0..n {
            w0.set(i, j, s * evd.eigenvectors.get(j, i).re);
        }
    }
    // prefer the candidate with the smaller starting criterion; ties go to
    // the identity
    let crit_at = |w: &Sq<f64>| -> f64 {
        let mut gs: Vec<Sq<f64>> = targets.to_vec();
        let mut acc = 0.0;
        for g in gs.iter_mut() {
            // W G W^T
            let mut tmp = Sq::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += w.get(i, k) * g.get(k, j);
                    }
                    tmp.set(i, j, s);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let mut s = 0.0;
                    for k in 0..n {
                        s += tmp.get(i, k) * w.get(j, k);
                    }
                    acc += s * s;
                }
            }
        }
        acc
    };
    if crit_at(&ident) <= crit_at(&w0) {
        ident
    } else {
        w0
    }
}

/// Real-valued non-orthogonal joint diagonalization. Returns F (= W^-1 with
/// unit-norm rows of W), the per-target diagonals, and the achieved relative
/// criterion. Deterministic; columns of F ordered by descending norm.
pub fn rnjd_solve(problem: &JdProblem) -> Result<JdSolution> {
    let targets = &problem.targets;
    if targets.is_empty() {
        return Err(Error::Degenerate {
            context: "rnjd_solve",
            detail: "no targets".into(),
        });
    }
    let n = targets[0].rows();
    for g in targets {
        if g.rows() != n || g.cols() != n {
            return Err(Error::dims(
                "rnjd_solve",
                format!("{n}x{n} targets"),
                format!("{}x{}", g.rows(), g.cols()),
            ));
        }
    }
    if n == 1 {
        return Ok(JdSolution {
            f: RealMatrix::identity(1),
            diags: targets.iter().map(|g| vec![g.get(0, 0)]).collect(),
            offdiag_final: 0.0,
            sweeps: 0,
            crit_trace: vec![0.0],
        });
    }

    let sq_targets: Vec<Sq<f64>> = targets.iter().map(to_sq).collect();
    let w0 = initial_w(&sq_targets);
    let mut work = sq_targets.clone();
    // bring targets to the initial frame
    let mut w_acc = w0.clone();
    {
        let n = w0.n;
        for g in work.iter_mut() {
            let mut tmp = Sq::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += w0.get(i, k) * g.get(k, j);
                    }
                    tmp.set(i, j, s);
                }
            }
            let mut out = Sq::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += tmp.get(i, k) * w0.get(j, k);
                    }
                    out.set(i, j, s);
                }
            }
            *g = out;
        }
    }
    let denom: f64 = sq_targets.iter().map(|g| g.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
    let outcome = run_sweeps(work, w_acc.clone(), problem.max_sweeps, problem.tol, "rnjd_solve")?;
    w_acc = outcome.w;

    // final diagnostics against the original targets
    let mut w = RealMatrix::from_fn(n, n, |i, j| w_acc.get(i, j));
    // normalize rows (idempotent after run_sweeps, but pins the n == done case)
    for i in 0..n {
        let norm: f64 = (0..n).map(|q| w.get(i, q).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for q in 0..n {
                let v = w.get(i, q) / norm;
                w.set(i, q, v);
            }
        }
    }
    let crit_rel = offdiag_criterion(&w, targets) / denom;

    let f = invert_real(&w).ok_or_else(|| Error::Degenerate {
        context: "rnjd_solve",
        detail: "diagonalizer is singular".into(),
    })?;

    // order columns of F by descending norm; permute W rows to match
    let mut order: Vec<usize> = (0..n).collect();
    let col_norm = |f: &RealMatrix, j: usize| -> f64 {
        (0..n).map(|i| f.get(i, j).powi(2)).sum::<f64>().sqrt()
    };
    order.sort_by(|&a, &b| col_norm(&f, b).partial_cmp(&col_norm(&f, a)).unwrap());
    let f_ord = RealMatrix::from_fn(n, n, |i, j| f.get(i, order[j]));
    let w_ord = RealMatrix::from_fn(n, n, |i, j| w.get(order[i], j));

    let diags = targets
        .iter()
        .map(|g| {
            let wg = w_ord.matmul(g).unwrap();
            let wgwt = wg.matmul(&w_ord.transpose()).unwrap();
            (0..n).map(|i| wgwt.get(i, i)).collect()
        })
        .collect();

    Ok(JdSolution {
        f: f_ord,
        diags,
        offdiag_final: crit_rel,
        sweeps: outcome.sweeps,
        crit_trace: outcome.trace,
    })
}

/// Complex-symmetric variant of the triangular sweep: finds complex W with
/// off(W M_k W^T) small for complex symmetric targets. Diagnostic path used
/// to confirm in complex arithmetic that the diagonalizer is real.
pub(crate) fn complex_symmetric_jd(
    targets: &[ComplexMatrix],
    max_sweeps: usize,
    tol: f64,
) -> Result<(ComplexMatrix, f64)> {
    if targets.is_empty() {
        return Err(Error::Degenerate {
            context: "complex_symmetric_jd",
            detail: "no targets".into(),
        });
    }
    let n = targets[0].rows();
    let sq: Vec<Sq<Complex64>> = targets
        .iter()
        .map(|m| {
            let mut s = Sq::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    s.set(i, j, 0.5 * (m.get(i, j) + m.get(j, i)));
                }
            }
            s
        })
        .collect();
    let mut w0 = Sq::zeros(n);
    for i in 0..n {
        w0.set(i, i, Complex64::new(1.0, 0.0));
    }
    let outcome = run_sweeps(sq, w0, max_sweeps, tol, "complex_symmetric_jd")?;
    let w = ComplexMatrix::from_fn(n, n, |i, j| outcome.w.get(i, j));
    Ok((w, outcome.crit_rel))
}

/// Partial-pivot inverse of a small real matrix; None when singular.
pub(crate) fn invert_real(m: &RealMatrix) -> Option<RealMatrix> {
    let n = m.rows();
    let mut a: Vec<f64> = m.data().to_vec();
    let mut inv = RealMatrix::identity(n);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
                let t = inv.get(col, j);
                inv.set(col, j, inv.get(piv, j));
                inv.set(piv, j, t);
            }
        }
        let d = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= d;
            let v = inv.get(col, j) / d;
            inv.set(col, j, v);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r * n + j] -= factor * a[col * n + j];
                let v = inv.get(r, j) - factor * inv.get(col, j);
                inv.set(r, j, v);
            }
        }
    }
    Some(inv)
}
