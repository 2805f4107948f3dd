//! CPS5-EALS: alternating least squares with an exact polynomial enhanced
//! line search, for the same partially symmetric fifth-order model the JD
//! path decomposes.
//!
//! Partial symmetry is enforced structurally: the free blocks are A, B, and
//! the real D; modes 3 and 4 are always conj(A) and conj(B). The A update
//! stacks the mode-1 unfolding with the conjugated mode-3 unfolding and
//! solves one linear least-squares problem (B symmetrically from modes 2
//! and 4; D from mode 5 with its imaginary part projected out). Because the
//! solved block also appears conjugated inside the fixed coefficients, the
//! stacked solve is a descent direction rather than an exact conditional
//! minimizer, so each accepted update is guarded by a short backtracking
//! line search on the true residual; the recorded residual sequence is
//! non-increasing.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::tensor::{
    khatri_rao, khatri_rao3, matricize5, ComplexMatrix, ComplexTensor, FactorSet, RealMatrix,
};

/// The residual along the search direction is a degree-10 polynomial in the
/// real step: each of the five mode factors is affine in rho.
const ELS_DEGREE: usize = 10;
const ELS_LO: f64 = -2.0;
const ELS_HI: f64 = 3.0;
const BACKTRACK: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

/// Options for [`cps5_eals`].
#[derive(Debug, Clone)]
pub struct AlsOptions {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop when the relative fit change drops below this.
    pub rel_fit_tol: f64,
    pub els_enabled: bool,
    pub init: AlsInit,
}

#[derive(Debug, Clone)]
pub enum AlsInit {
    /// Standard complex normal entries for A and B, standard real normal
    /// for D.
    Random { seed: u64 },
    Provided(FactorSet),
}

impl AlsOptions {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iters: 1000,
            rel_fit_tol: 1e-8,
            els_enabled: true,
            init: AlsInit::Random { seed: 0 },
        }
    }
}

/// Per-run trace.
#[derive(Debug, Clone, Serialize)]
pub struct AlsTrace {
    /// Relative fit residual after each iteration; non-increasing.
    pub residuals: Vec<f64>,
    /// Accepted line-search step per iteration (1.0 where skipped).
    pub rho: Vec<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub converged: bool,
}

/// Unconstrained iteration state: A, B complex, D real (unnormalized).
#[derive(Debug, Clone)]
pub struct AlsFactors {
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub d: RealMatrix,
}

impl AlsFactors {
    fn add_scaled(&self, dir: &AlsFactors, s: f64) -> AlsFactors {
        let sc = Complex64::new(s, 0.0);
        AlsFactors {
            a: ComplexMatrix::from_fn(self.a.rows(), self.a.cols(), |i, j| {
                self.a.get(i, j) + sc * dir.a.get(i, j)
            }),
            b: ComplexMatrix::from_fn(self.b.rows(), self.b.cols(), |i, j| {
                self.b.get(i, j) + sc * dir.b.get(i, j)
            }),
            d: RealMatrix::from_fn(self.d.rows(), self.d.cols(), |i, j| {
                self.d.get(i, j) + s * dir.d.get(i, j)
            }),
        }
    }

    fn delta(&self, older: &AlsFactors) -> AlsFactors {
        AlsFactors {
            a: self.a.sub(&older.a).expect("dims"),
            b: self.b.sub(&older.b).expect("dims"),
            d: RealMatrix::from_fn(self.d.rows(), self.d.cols(), |i, j| {
                self.d.get(i, j) - older.d.get(i, j)
            }),
        }
    }

    fn norm(&self) -> f64 {
        (self.a.frobenius_norm().powi(2)
            + self.b.frobenius_norm().powi(2)
            + self.d.frobenius_norm().powi(2))
        .sqrt()
    }
}

fn model_matricized(f: &AlsFactors) -> Result<ComplexMatrix> {
    let ka = khatri_rao(&f.a, &f.a.conj())?;
    let kbd = khatri_rao3(&f.b, &f.b.conj(), &f.d.to_complex())?;
    ka.matmul(&kbd.transpose())
}

fn squared_residual(t_mat: &ComplexMatrix, f: &AlsFactors) -> Result<f64> {
    let model = model_matricized(f)?;
    let mut s = 0.0;
    for (a, b) in t_mat.data().iter().zip(model.data()) {
        s += (a - b).norm_sqr();
    }
    Ok(s)
}

/// Relative fit residual ||T - That||_F / ||T||_F (absolute for a zero
/// tensor).
pub fn relative_residual(t: &ComplexTensor, f: &AlsFactors) -> Result<f64> {
    let t_mat = matricize5(t)?;
    let tnorm = t_mat.frobenius_norm();
    let r = squared_residual(&t_mat, f)?.sqrt();
    Ok(if tnorm == 0.0 { r } else { r / tnorm })
}

struct Unfoldings {
    t1t: ComplexMatrix,
    t3t_conj: ComplexMatrix,
    t2t: ComplexMatrix,
    t4t_conj: ComplexMatrix,
    t5: ComplexMatrix,
}

fn unfold(t: &ComplexTensor) -> Unfoldings {
    let d = t.dims();
    let (i, j, k) = (d[0], d[1], d[4]);
    let data = t.data();
    let flat = |i1: usize, j1: usize, i2: usize, j2: usize, kk: usize| {
        (((i1 * j + j1) * i + i2) * j + j2) * k + kk
    };
    // T1^T: (J I J K) x I, column i1, row-major over (j1, i2, j2, kk)
    let t1t = ComplexMatrix::from_fn(j * i * j * k, i, |row, i1| {
        let kk = row % k;
        let j2 = (row / k) % j;
        let i2 = (row / (k * j)) % i;
        let j1 = row / (k * j * i);
        data[flat(i1, j1, i2, j2, kk)]
    });
    // conj(T3^T): (I J J K) x I, column i2
    let t3t_conj = ComplexMatrix::from_fn(i * j * j * k, i, |row, i2| {
        let kk = row % k;
        let j2 = (row / k) % j;
        let j1 = (row / (k * j)) % j;
        let i1 = row / (k * j * j);
        data[flat(i1, j1, i2, j2, kk)].conj()
    });
    // T2^T: (I I J K) x J, column j1
    let t2t = ComplexMatrix::from_fn(i * i * j * k, j, |row, j1| {
        let kk = row % k;
        let j2 = (row / k) % j;
        let i2 = (row / (k * j)) % i;
        let i1 = row / (k * j * i);
        data[flat(i1, j1, i2, j2, kk)]
    });
    // conj(T4^T): (I J I K) x J, column j2
    let t4t_conj = ComplexMatrix::from_fn(i * j * i * k, j, |row, j2| {
        let kk = row % k;
        let i2 = (row / k) % i;
        let j1 = (row / (k * i)) % j;
        let i1 = row / (k * i * j);
        data[flat(i1, j1, i2, j2, kk)].conj()
    });
    // T5: (I J I J) x K, zero-copy layout
    let t5 = ComplexMatrix::new(i * j * i * j, k, data.to_vec()).expect("dims");
    Unfoldings {
        t1t,
        t3t_conj,
        t2t,
        t4t_conj,
        t5,
    }
}

fn vstack(top: &ComplexMatrix, bottom: &ComplexMatrix) -> ComplexMatrix {
    debug_assert_eq!(top.cols(), bottom.cols());
    let mut data = Vec::with_capacity((top.rows() + bottom.rows()) * top.cols());
    data.extend_from_slice(top.data());
    data.extend_from_slice(bottom.data());
    ComplexMatrix::new(top.rows() + bottom.rows(), top.cols(), data).expect("dims")
}

/// One sweep of guarded conditional least-squares updates for A (modes 1+3
/// coupled), B (modes 2+4 coupled), and D (mode 5, real projection).
pub fn als_sweep(t: &ComplexTensor, factors: &AlsFactors) -> Result<AlsFactors> {
    let t_mat = matricize5(t)?;
    let unf = unfold(t);
    let mut cur = factors.clone();
    let mut cur_res = squared_residual(&t_mat, &cur)?;

    // A block
    {
        let z1 = khatri_rao3(&khatri_rao(&cur.b, &cur.a.conj())?, &cur.b.conj(), &cur.d.to_complex())?;
        let z3 = khatri_rao3(&khatri_rao(&cur.a, &cur.b)?, &cur.b.conj(), &cur.d.to_complex())?;
        let s = vstack(&z1, &z3.conj());
        let y = vstack(&unf.t1t, &unf.t3t_conj);
        let x = least_squares(&s, &y)?;
        let cand = AlsFactors {
            a: x.transpose(),
            b: cur.b.clone(),
            d: cur.d.clone(),
        };
        accept_with_backtracking(&t_mat, &mut cur, &mut cur_res, cand)?;
    }

    // B block
    {
        let z2 = khatri_rao3(&khatri_rao(&cur.a, &cur.a.conj())?, &cur.b.conj(), &cur.d.to_complex())?;
        let z4 = khatri_rao3(&khatri_rao(&cur.a, &cur.b)?, &cur.a.conj(), &cur.d.to_complex())?;
        let s = vstack(&z2, &z4.conj());
        let y = vstack(&unf.t2t, &unf.t4t_conj);
        let x = least_squares(&s, &y)?;
        let cand = AlsFactors {
            a: cur.a.clone(),
            b: x.transpose(),
            d: cur.d.clone(),
        };
        accept_with_backtracking(&t_mat, &mut cur, &mut cur_res, cand)?;
    }

    // D block: exact conditional minimizer (the Gram matrix of the chain is
    // real, so the real projection of the complex solution is the
    // real-constrained optimum)
    {
        let g5 = khatri_rao3(&khatri_rao(&cur.a, &cur.b)?, &cur.a.conj(), &cur.b.conj())?;
        let x = least_squares(&g5, &unf.t5)?;
        let d = RealMatrix::from_fn(x.cols(), x.rows(), |kk, r| x.get(r, kk).re);
        let cand = AlsFactors {
            a: cur.a.clone(),
            b: cur.b.clone(),
            d,
        };
        accept_with_backtracking(&t_mat, &mut cur, &mut cur_res, cand)?;
    }

    Ok(cur)
}

/// Imaginary mass of the unprojected D solution for the current factors;
/// diagnostic used by tests (tiny on clean partially symmetric data).
pub fn d_update_imag_residue(t: &ComplexTensor, factors: &AlsFactors) -> Result<f64> {
    let unf = unfold(t);
    let g5 = khatri_rao3(
        &khatri_rao(&factors.a, &factors.b)?,
        &factors.a.conj(),
        &factors.b.conj(),
    )?;
    let x = least_squares(&g5, &unf.t5)?;
    let im: f64 = x.data().iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let norm = x.frobenius_norm();
    Ok(if norm == 0.0 { 0.0 } else { im / norm })
}

fn accept_with_backtracking(
    t_mat: &ComplexMatrix,
    cur: &mut AlsFactors,
    cur_res: &mut f64,
    cand: AlsFactors,
) -> Result<()> {
    let dir = cand.delta(cur);
    if dir.norm() == 0.0 {
        return Ok(());
    }
    for &s in &BACKTRACK {
        let trial = cur.add_scaled(&dir, s);
        let res = squared_residual(t_mat, &trial)?;
        if res.is_finite() && res <= *cur_res {
            *cur = trial;
            *cur_res = res;
            return Ok(());
        }
    }
    Ok(())
}

/// Degree-10 Chebyshev interpolant of the squared residual along the search
/// direction.
#[derive(Debug, Clone)]
pub struct ElsPoly {
    cheb: Vec<f64>,
}

impl ElsPoly {
    fn x_of(rho: f64) -> f64 {
        (rho - 0.5 * (ELS_HI + ELS_LO)) / (0.5 * (ELS_HI - ELS_LO))
    }

    /// Evaluate the interpolant at a step value.
    pub fn eval(&self, rho: f64) -> f64 {
        clenshaw(&self.cheb, Self::x_of(rho))
    }

    fn deriv_coeffs(&self) -> Vec<f64> {
        // standard Chebyshev derivative recurrence
        let n = self.cheb.len();
        let mut d = vec![0.0; n];
        if n >= 2 {
            d[n - 2] = 2.0 * (n - 1) as f64 * self.cheb[n - 1];
            for k in (1..n - 1).rev() {
                d[k - 1] = if k + 1 < n - 1 { d[k + 1] } else { 0.0 } + 2.0 * k as f64 * self.cheb[k];
            }
            d[0] *= 0.5;
        }
        d
    }

    fn eval_deriv(&self, rho: f64) -> f64 {
        let scale = 1.0 / (0.5 * (ELS_HI - ELS_LO));
        clenshaw(&self.deriv_coeffs(), Self::x_of(rho)) * scale
    }
}

fn clenshaw(c: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + x * b1 - b2
}

/// Interpolate the squared residual along factors + rho * dir at 11
/// Chebyshev nodes on [-2, 3]; exact for the degree-10 polynomial.
pub fn els_residual_poly(
    t: &ComplexTensor,
    factors: &AlsFactors,
    dir: &AlsFactors,
) -> Result<ElsPoly> {
    let t_mat = matricize5(t)?;
    let n = ELS_DEGREE + 1;
    let mut thetas = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for jn in 0..n {
        let theta = (2.0 * jn as f64 + 1.0) * std::f64::consts::PI / (2.0 * n as f64);
        let x = theta.cos();
        let rho = 0.5 * (ELS_HI + ELS_LO) + 0.5 * (ELS_HI - ELS_LO) * x;
        let v = squared_residual(&t_mat, &factors.add_scaled(dir, rho))?;
        if !v.is_finite() {
            return Err(Error::Degenerate {
                context: "els_residual_poly",
                detail: "non-finite residual at probe point".into(),
            });
        }
        thetas.push(theta);
        values.push(v);
    }
    let mut cheb = vec![0.0; n];
    for (kc, ck) in cheb.iter_mut().enumerate() {
        let mut s = 0.0;
        for jn in 0..n {
            s += values[jn] * (kc as f64 * thetas[jn]).cos();
        }
        *ck = 2.0 * s / n as f64;
    }
    cheb[0] *= 0.5;
    Ok(ElsPoly { cheb })
}

/// Pick the step minimizing the interpolated residual polynomial over
/// [-2, 3] (dense grid plus Newton refinement of local minima), falling back
/// to 1.0 when nothing beats it.
pub fn els_step(t: &ComplexTensor, factors: &AlsFactors, dir: &AlsFactors) -> Result<f64> {
    if dir.norm() == 0.0 {
        return Ok(1.0);
    }
    let poly = match els_residual_poly(t, factors, dir) {
        Ok(p) => p,
        Err(_) => return Ok(1.0),
    };
    const GRID: usize = 501;
    let step = (ELS_HI - ELS_LO) / (GRID - 1) as f64;
    let vals: Vec<f64> = (0..GRID).map(|g| poly.eval(ELS_LO + g as f64 * step)).collect();

    let mut candidates = vec![1.0, ELS_LO, ELS_HI];
    for g in 1..GRID - 1 {
        if vals[g] <= vals[g - 1] && vals[g] <= vals[g + 1] {
            // Newton refinement on the derivative
            let mut rho = ELS_LO + g as f64 * step;
            for _ in 0..12 {
                let d1 = poly.eval_deriv(rho);
                let h = 1e-6;
                let d2 = (poly.eval_deriv(rho + h) - poly.eval_deriv(rho - h)) / (2.0 * h);
                if d2.abs() < 1e-300 {
                    break;
                }
                let next = (rho - d1 / d2).clamp(ELS_LO, ELS_HI);
                if (next - rho).abs() < 1e-12 {
                    rho = next;
                    break;
                }
                rho = next;
            }
            candidates.push(rho);
        }
    }
    let mut best = 1.0;
    let mut best_val = poly.eval(1.0);
    for &cnd in &candidates {
        let v = poly.eval(cnd);
        if v.is_finite() && v < best_val {
            best_val = v;
            best = cnd;
        }
    }
    // guard against interpolation artifacts with the true residual
    let t_mat = matricize5(t)?;
    let at_one = squared_residual(&t_mat, &factors.add_scaled(dir, 1.0))?;
    let at_best = squared_residual(&t_mat, &factors.add_scaled(dir, best))?;
    Ok(if at_best.is_finite() && at_best <= at_one {
        best
    } else {
        1.0
    })
}

fn random_init(i: usize, j: usize, k: usize, r: usize, seed: u64) -> AlsFactors {
    let mut rg = ChaCha8Rng::seed_from_u64(seed);
    let a = ComplexMatrix::from_fn(i, r, |_, _| {
        Complex64::new(rg.sample(StandardNormal), rg.sample(StandardNormal))
    });
    let b = ComplexMatrix::from_fn(j, r, |_, _| {
        Complex64::new(rg.sample(StandardNormal), rg.sample(StandardNormal))
    });
    let d = RealMatrix::from_fn(k, r, |_, _| rg.sample(StandardNormal));
    AlsFactors { a, b, d }
}

/// Run the full ALS+ELS loop. Each iteration applies the line-search
/// extrapolation along the previous sweep's direction (when it improves the
/// fit) and then one sweep; stops on relative fit stagnation or the
/// iteration cap.
pub fn cps5_eals(t: &ComplexTensor, opts: &AlsOptions) -> Result<(FactorSet, AlsTrace)> {
    let dims = t.dims();
    if dims.len() != 5 || dims[0] != dims[2] || dims[1] != dims[3] {
        return Err(Error::dims(
            "cps5_eals",
            "5-way tensor with dims (I,J,I,J,K)",
            format!("{dims:?}"),
        ));
    }
    let (i, j, k) = (dims[0], dims[1], dims[4]);
    let r = opts.rank;
    if r == 0 {
        return Err(Error::RankOutOfRange {
            context: "cps5_eals",
            rank: r,
            max: (i * i).min(j * j * k),
        });
    }
    let start = std::time::Instant::now();
    let t_mat = matricize5(t)?;
    let tnorm = t_mat.frobenius_norm();
    let rel = |sq: f64| -> f64 {
        if tnorm == 0.0 {
            sq.sqrt()
        } else {
            sq.sqrt() / tnorm
        }
    };

    let mut factors = match &opts.init {
        AlsInit::Random { seed } => random_init(i, j, k, r, *seed),
        AlsInit::Provided(f) => {
            if f.a.rows() != i || f.b.rows() != j || f.d.rows() != k || f.rank() != r {
                return Err(Error::dims(
                    "cps5_eals",
                    format!("init factors {i}x{r}, {j}x{r}, {k}x{r}"),
                    format!(
                        "{}x{}, {}x{}, {}x{}",
                        f.a.rows(),
                        f.rank(),
                        f.b.rows(),
                        f.rank(),
                        f.d.rows(),
                        f.rank()
                    ),
                ));
            }
            AlsFactors {
                a: f.a.clone(),
                b: f.b.clone(),
                d: f.d.clone(),
            }
        }
    };

    let mut cur_sq = squared_residual(&t_mat, &factors)?;
    let mut residuals = Vec::new();
    let mut rhos = Vec::new();
    let mut prev_base: Option<AlsFactors> = None;
    let mut converged = false;

    for _iter in 0..opts.max_iters {
        let mut rho_used = 1.0;
        if opts.els_enabled {
            if let Some(base) = &prev_base {
                let dir = factors.delta(base);
                if dir.norm() > 0.0 {
                    let rho = els_step(t, base, &dir)?;
                    let cand = base.add_scaled(&dir, rho);
                    let cand_sq = squared_residual(&t_mat, &cand)?;
                    if cand_sq.is_finite() && cand_sq <= cur_sq {
                        factors = cand;
                        cur_sq = cand_sq;
                        rho_used = rho;
                    }
                }
            }
        }
        prev_base = Some(factors.clone());
        factors = als_sweep(t, &factors)?;
        let new_sq = squared_residual(&t_mat, &factors)?;
        debug_assert!(new_sq <= cur_sq * (1.0 + 1e-12) + 1e-300);
        cur_sq = new_sq.min(cur_sq);

        let res = rel(cur_sq);
        rhos.push(rho_used);
        let prev_res = residuals.last().copied();
        residuals.push(res);
        if let Some(p) = prev_res {
            if (p - res).abs() <= opts.rel_fit_tol * p.max(1e-300) {
                converged = true;
                break;
            }
        }
        if res < 1e-14 {
            converged = true;
            break;
        }
    }

    let iterations = residuals.len();
    let trace = AlsTrace {
        residuals,
        rho: rhos,
        iterations,
        wall_time_s: start.elapsed().as_secs_f64().max(1e-9),
        converged,
    };
    let set = FactorSet::new(factors.a, factors.b, factors.d)?;
    Ok((set, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesize_cp5;
    use crate::test_util::{rand_cmatrix, rand_rmatrix, rng};

    fn exact_setup(seed: u64) -> (ComplexTensor, FactorSet) {
        let mut rg = rng(seed);
        let f = FactorSet::new(
            rand_cmatrix(4, 2, &mut rg),
            rand_cmatrix(4, 2, &mut rg),
            rand_rmatrix(3, 2, &mut rg),
        )
        .unwrap();
        let t = synthesize_cp5(&f, None).unwrap();
        (t, f)
    }

    #[test]
    fn exact_factors_are_a_fixed_point() {
        let (t, f) = exact_setup(701);
        let factors = AlsFactors {
            a: f.a.clone(),
            b: f.b.clone(),
            d: f.d.clone(),
        };
        let out = als_sweep(&t, &factors).unwrap();
        let res = relative_residual(&t, &out).unwrap();
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn sweeps_decrease_residual_from_random_init() {
        let (t, _) = exact_setup(703);
        let mut factors = random_init(4, 4, 3, 2, 99);
        let mut prev = relative_residual(&t, &factors).unwrap();
        for _ in 0..10 {
            factors = als_sweep(&t, &factors).unwrap();
            let res = relative_residual(&t, &factors).unwrap();
            assert!(res <= prev * (1.0 + 1e-12), "increase {prev} -> {res}");
            prev = res;
        }
        assert!(prev < 0.9, "no progress after 10 sweeps: {prev}");
    }

    #[test]
    fn d_update_is_real_on_clean_data() {
        let (t, f) = exact_setup(705);
        let factors = AlsFactors {
            a: f.a.clone(),
            b: f.b.clone(),
            d: RealMatrix::zeros(3, 2),
        };
        let residue = d_update_imag_residue(&t, &factors).unwrap();
        assert!(residue < 1e-10, "imag residue {residue}");
    }

    #[test]
    fn els_zero_direction_returns_one() {
        let (t, f) = exact_setup(707);
        let factors = AlsFactors {
            a: f.a.clone(),
            b: f.b.clone(),
            d: f.d.clone(),
        };
        let zero = AlsFactors {
            a: ComplexMatrix::zeros(4, 2),
            b: ComplexMatrix::zeros(4, 2),
            d: RealMatrix::zeros(3, 2),
        };
        assert_eq!(els_step(&t, &factors, &zero).unwrap(), 1.0);
    }

    #[test]
    fn els_finds_exact_step() {
        let (t, f) = exact_setup(709);
        // start away from the solution; direction = truth - start, so the
        // exact step is rho = 1
        let start = random_init(4, 4, 3, 2, 7);
        let truth = AlsFactors {
            a: f.a.clone(),
            b: f.b.clone(),
            d: f.d.clone(),
        };
        let dir = truth.delta(&start);
        let rho = els_step(&t, &start, &dir).unwrap();
        let res = relative_residual(&t, &start.add_scaled(&dir, rho)).unwrap();
        assert!(res < 1e-10, "rho {rho}, residual {res}");
    }

    #[test]
    fn els_poly_matches_held_out_probe() {
        let (t, _) = exact_setup(711);
        let base = random_init(4, 4, 3, 2, 13);
        let target = random_init(4, 4, 3, 2, 17);
        let dir = target.delta(&base);
        let poly = els_residual_poly(&t, &base, &dir).unwrap();
        let t_mat = matricize5(&t).unwrap();
        let scale: f64 = (0..11)
            .map(|g| poly.eval(ELS_LO + g as f64 * 0.5))
            .fold(0.0, f64::max);
        for &rho in &[-1.234, 0.577, 2.9] {
            let direct = squared_residual(&t_mat, &base.add_scaled(&dir, rho)).unwrap();
            let interp = poly.eval(rho);
            assert!(
                (direct - interp).abs() <= 1e-9 * scale.max(direct),
                "rho {rho}: direct {direct}, interp {interp}"
            );
        }
    }

    #[test]
    fn eals_from_exact_init_terminates_fast() {
        let (t, f) = exact_setup(713);
        let mut opts = AlsOptions::new(2);
        opts.init = AlsInit::Provided(f);
        let (est, trace) = cps5_eals(&t, &opts).unwrap();
        assert!(trace.iterations <= 2, "iterations {}", trace.iterations);
        assert!(trace.residuals.last().unwrap() < &1e-12);
        let rec = synthesize_cp5(&est, None).unwrap();
        assert!(rec.sub(&t).unwrap().frobenius_norm() < 1e-10 * t.frobenius_norm());
    }

    #[test]
    fn eals_monotone_trace_random_init() {
        let (t, _) = exact_setup(715);
        let mut opts = AlsOptions::new(2);
        opts.init = AlsInit::Random { seed: 3 };
        opts.max_iters = 60;
        let (_, trace) = cps5_eals(&t, &opts).unwrap();
        for w in trace.residuals.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
        }
        assert_eq!(trace.rho.len(), trace.residuals.len());
    }
}
