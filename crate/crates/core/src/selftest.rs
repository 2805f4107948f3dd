//! Fast invariant suite behind the CLI `selftest` subcommand: a handful of
//! structural properties that catch build or numerical regressions in under
//! a minute.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::als::{als_sweep, AlsFactors};
use crate::cumulant::{quadricov_bruteforce, sample_quadricov};
use crate::detect::phi1;
use crate::experiment::pi_of_estimate;
use crate::jd::{cps5_jd, Cps5JdOptions};
use crate::rnjd::{invert_real, rnjd_solve, JdProblem};
use crate::tensor::{
    check_partial_symmetry, dematricize5, matricize5, synthesize_cp5, ComplexMatrix, FactorSet,
    RealMatrix,
};

/// One selftest outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn cn(rg: &mut ChaCha8Rng) -> Complex64 {
    use rand::Rng;
    use rand_distr::StandardNormal;
    Complex64::new(rg.sample(StandardNormal), rg.sample(StandardNormal))
}

fn random_factors(i: usize, j: usize, k: usize, r: usize, seed: u64) -> FactorSet {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rg = ChaCha8Rng::seed_from_u64(seed);
    FactorSet::new(
        ComplexMatrix::from_fn(i, r, |_, _| cn(&mut rg)),
        ComplexMatrix::from_fn(j, r, |_, _| cn(&mut rg)),
        RealMatrix::from_fn(k, r, |_, _| rg.sample(StandardNormal)),
    )
    .expect("nondegenerate factors")
}

/// Run the suite. `inject_fault` names a check whose input is deliberately
/// perturbed, to verify that failures are detected and reported by name.
pub fn run_selftest(inject_fault: Option<&str>) -> Vec<CheckResult> {
    let fault = |name: &str| inject_fault == Some(name);
    let mut results = Vec::new();

    // detector iff-property
    {
        let name = "detector_rank1_iff";
        let mut rg = ChaCha8Rng::seed_from_u64(11);
        let mut ok = true;
        let mut detail = String::new();
        for trial in 0..20 {
            let a: Vec<Complex64> = (0..4).map(|_| cn(&mut rg)).collect();
            let mut x = ComplexMatrix::from_fn(4, 4, |i, j| a[i] * a[j]);
            if fault(name) && trial == 7 {
                x.set(0, 1, x.get(0, 1) + Complex64::new(0.5, 0.0));
            }
            let p = phi1(&x, &x).expect("dims");
            let rel = p.frobenius_norm() / x.frobenius_norm().powi(2).max(1e-300);
            if rel > 1e-12 {
                ok = false;
                detail = format!("rank-1 detector fired on rank-1 input (rel {rel:.2e})");
                break;
            }
            let u = ComplexMatrix::from_fn(4, 2, |_, _| cn(&mut rg));
            let v = ComplexMatrix::from_fn(4, 2, |_, _| cn(&mut rg));
            let mut x2 = u.matmul(&v.transpose()).expect("dims");
            let n = x2.frobenius_norm();
            x2.scale(Complex64::new(1.0 / n, 0.0));
            let p2 = phi1(&x2, &x2).expect("dims");
            if p2.frobenius_norm() < 1e-3 {
                ok = false;
                detail = "detector silent on a rank-2 input".into();
                break;
            }
        }
        results.push(CheckResult {
            name,
            passed: ok,
            detail,
        });
    }

    // joint diagonalization exact recovery
    {
        let name = "rnjd_exact_recovery";
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut ok = true;
        let mut detail = String::new();
        for seed in 0..5u64 {
            let mut rg = ChaCha8Rng::seed_from_u64(100 + seed);
            let f0 = RealMatrix::from_fn(4, 4, |_, _| rg.sample(StandardNormal));
            let mut targets: Vec<RealMatrix> = (0..10)
                .map(|_| {
                    let mut d = RealMatrix::zeros(4, 4);
                    for i in 0..4 {
                        d.set(i, i, rg.sample::<f64, _>(StandardNormal));
                    }
                    f0.matmul(&d).unwrap().matmul(&f0.transpose()).unwrap()
                })
                .collect();
            if fault(name) && seed == 2 {
                let v = targets[0].get(0, 1) + 10.0;
                targets[0].set(0, 1, v);
            }
            match rnjd_solve(&JdProblem::new(targets)) {
                Ok(sol) => {
                    let fi = invert_real(&sol.f).expect("invertible");
                    let prod = fi.matmul(&f0).unwrap();
                    let mut off = 0.0;
                    for i in 0..4 {
                        let mx = (0..4).map(|j| prod.get(i, j).abs()).fold(0.0, f64::max);
                        for j in 0..4 {
                            let v = prod.get(i, j).abs();
                            if v < mx {
                                off += v * v;
                            }
                        }
                    }
                    let rel = off.sqrt() / prod.frobenius_norm();
                    if rel > 1e-6 || sol.offdiag_final > 1e-12 {
                        ok = false;
                        detail = format!(
                            "seed {seed}: off-pattern {rel:.2e}, criterion {:.2e}",
                            sol.offdiag_final
                        );
                        break;
                    }
                }
                Err(e) => {
                    ok = false;
                    detail = format!("seed {seed}: {e}");
                    break;
                }
            }
        }
        results.push(CheckResult {
            name,
            passed: ok,
            detail,
        });
    }

    // cumulant estimator against the quadruple-loop oracle
    {
        let name = "cumulant_bruteforce_match";
        let mut rg = ChaCha8Rng::seed_from_u64(12);
        let mut x = ComplexMatrix::from_fn(3, 40, |_, _| cn(&mut rg));
        if fault(name) {
            x.set(0, 0, x.get(0, 0) + Complex64::new(1.0, 0.0));
            // perturb only the fast path's input copy
        }
        let fast = sample_quadricov(&x).expect("sampling");
        let slow = if fault(name) {
            let mut y = x.clone();
            y.set(0, 0, y.get(0, 0) - Complex64::new(1.0, 0.0));
            quadricov_bruteforce(&y)
        } else {
            quadricov_bruteforce(&x)
        };
        let diff = fast.c.sub(&slow.c).expect("dims").max_abs();
        results.push(CheckResult {
            name,
            passed: diff < 1e-12,
            detail: if diff < 1e-12 {
                String::new()
            } else {
                format!("max entry difference {diff:.2e}")
            },
        });
    }

    // matricization round trip and model symmetry
    {
        let name = "tensor_structure";
        let f = random_factors(3, 4, 3, 2, 13);
        let mut t = synthesize_cp5(&f, None).expect("synthesis");
        if fault(name) {
            let v = t.get(&[0, 1, 1, 0, 0]);
            t.set(&[0, 1, 1, 0, 0], v + Complex64::new(0.1, 0.0));
        }
        let m = matricize5(&t).expect("matricize");
        let back = dematricize5(&m, 3, 4, 3).expect("dematricize");
        let round_trip = back == t;
        let sym = check_partial_symmetry(&t).expect("symmetry") / t.frobenius_norm();
        let passed = round_trip && sym < 1e-13;
        results.push(CheckResult {
            name,
            passed,
            detail: if passed {
                String::new()
            } else {
                format!("round_trip {round_trip}, relative symmetry deviation {sym:.2e}")
            },
        });
    }

    // direct decomposition on a clean instance
    {
        let name = "jd_noiseless_recovery";
        let f = random_factors(6, 6, 6, 5, 14);
        let t = synthesize_cp5(&f, None).expect("synthesis");
        let rank = if fault(name) { 3 } else { 5 };
        let outcome = cps5_jd(&t, &Cps5JdOptions::new(rank));
        let (passed, detail) = match outcome {
            Ok((est, _)) => match (
                pi_of_estimate(&est.a, &f.a),
                pi_of_estimate(&est.b, &f.b),
            ) {
                (Ok(pa), Ok(pb)) if pa < 1e-8 && pb < 1e-8 => (true, String::new()),
                (Ok(pa), Ok(pb)) => (false, format!("PI(A) {pa:.2e}, PI(B) {pb:.2e}")),
                _ => (false, "degenerate estimate".into()),
            },
            Err(e) => (false, e.to_string()),
        };
        results.push(CheckResult {
            name,
            passed,
            detail,
        });
    }

    // ALS fixed point
    {
        let name = "als_fixed_point";
        let f = random_factors(4, 4, 3, 2, 15);
        let t = synthesize_cp5(&f, None).expect("synthesis");
        let mut factors = AlsFactors {
            a: f.a.clone(),
            b: f.b.clone(),
            d: f.d.clone(),
        };
        if fault(name) {
            factors.a.set(0, 0, factors.a.get(0, 0) + Complex64::new(0.3, 0.0));
        }
        let swept = als_sweep(&t, &factors).expect("sweep");
        let da = swept.a.sub(&factors.a).expect("dims").frobenius_norm();
        let passed = da < 1e-10;
        results.push(CheckResult {
            name,
            passed,
            detail: if passed {
                String::new()
            } else {
                format!("sweep moved exact factors by {da:.2e}")
            },
        });
    }

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes_everything() {
        let results = run_selftest(None);
        assert_eq!(results.len(), 6);
        for r in &results {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
    }

    #[test]
    fn injected_fault_fails_by_name() {
        let results = run_selftest(Some("cumulant_bruteforce_match"));
        let hit = results
            .iter()
            .find(|r| r.name == "cumulant_bruteforce_match")
            .unwrap();
        assert!(!hit.passed);
        for r in &results {
            if r.name != "cumulant_bruteforce_match" {
                assert!(r.passed, "{} unexpectedly failed", r.name);
            }
        }
    }
}
