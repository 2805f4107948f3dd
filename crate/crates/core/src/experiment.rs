//! Synthetic-data generators, the Amari performance index, and a seeded
//! Monte-Carlo runner with CSV and JSON output.
//!
//! Everything here is a deterministic function of (configuration, seed):
//! per-trial seeds are derived from the base seed by a documented splitmix
//! mixing of the SNR bits and the trial index, and methods within a trial
//! always see identical data.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::als::{cps5_eals, AlsInit, AlsOptions, AlsTrace};
use crate::cumulant::{assemble_t5, dominant_eigenmatrices, sample_quadricov};
use crate::error::{Error, Result};
use crate::jd::{cps5_jd, Cps5JdOptions};
use crate::linalg::pseudo_inverse;
use crate::pipeline::{recover_sources, Backend};
use crate::tensor::{
    khatri_rao, matricize3, synthesize_cp5, ComplexMatrix, ComplexTensor, FactorSet, RealMatrix,
};

/// First simulation: decompose a synthetic partially symmetric tensor with
/// highly collinear loadings under additive tensor noise.
#[derive(Debug, Clone)]
pub struct Sim1Config {
    pub i: usize,
    pub j: usize,
    pub rank: usize,
    pub k5: usize,
    /// Collinearity step: a_j = a_{j-1} + step * v_j.
    pub collinearity_step: f64,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
}

impl Default for Sim1Config {
    fn default() -> Self {
        Self {
            i: 6,
            j: 6,
            rank: 5,
            k5: 6,
            collinearity_step: 0.08,
            snr_grid_db: vec![20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0],
            trials: 200,
            base_seed: 42,
        }
    }
}

/// Second simulation: blind separation of a trilinear mixture of
/// constant-modulus random-phase sources under spatially colored Gaussian
/// noise.
#[derive(Debug, Clone)]
pub struct Sim2Config {
    pub i: usize,
    pub j: usize,
    pub samples: usize,
    pub rank: usize,
    /// Covariance coefficient between adjacent noise channels.
    pub noise_rho: f64,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
}

impl Default for Sim2Config {
    fn default() -> Self {
        Self {
            i: 6,
            j: 5,
            samples: 1000,
            rank: 3,
            noise_rho: 0.9,
            snr_grid_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            trials: 200,
            base_seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SimulationConfig {
    Sim1(Sim1Config),
    Sim2(Sim2Config),
}

/// One method run on one generated dataset.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub method: Backend,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub pi_a: f64,
    pub pi_b: f64,
    pub time_s: f64,
    pub status: String,
}

impl TrialResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: base xor a splitmix hash of the SNR bits and trial index.
pub fn mix_seed(base_seed: u64, snr_db: f64, trial: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(snr_db.to_bits() ^ splitmix64(trial as u64 + 1)))
}

fn cn(rg: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rg.sample(StandardNormal), rg.sample(StandardNormal))
}

/// Collinear loading matrix: a_1 = v_1, a_j = a_{j-1} + step * v_j with
/// standard-normal real and imaginary parts for every v_j.
pub fn gen_collinear_matrix(i: usize, r: usize, step: f64, rg: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(i, r);
    let mut prev: Vec<Complex64> = (0..i).map(|_| cn(rg)).collect();
    m.set_col(0, &prev);
    for c in 1..r {
        let col: Vec<Complex64> = prev.iter().map(|&p| p + cn(rg) * step).collect();
        m.set_col(c, &col);
        prev = col;
    }
    m
}

/// Generate the first simulation's noisy tensor and ground truth:
/// T~ = T/||T|| + sigma * N/||N|| with sigma = 10^(-snr/10).
pub fn gen_sim1(cfg: &Sim1Config, snr_db: f64, seed: u64) -> Result<(ComplexTensor, FactorSet)> {
    let mut rg = ChaCha8Rng::seed_from_u64(seed);
    let a = gen_collinear_matrix(cfg.i, cfg.rank, cfg.collinearity_step, &mut rg);
    let b = gen_collinear_matrix(cfg.j, cfg.rank, cfg.collinearity_step, &mut rg);
    let d = RealMatrix::from_fn(cfg.k5, cfg.rank, |_, _| rg.sample(StandardNormal));
    let truth = FactorSet::new(a, b, d)?;
    let mut t = synthesize_cp5(&truth, None)?;
    let tnorm = t.frobenius_norm();
    if tnorm == 0.0 {
        return Err(Error::Degenerate {
            context: "gen_sim1",
            detail: "degenerate zero tensor".into(),
        });
    }
    t.scale(Complex64::new(1.0 / tnorm, 0.0));
    let sigma = 10f64.powf(-snr_db / 10.0);
    if sigma > 0.0 {
        let mut noise = ComplexTensor::from_fn(t.dims().to_vec(), |_| cn(&mut rg));
        let nnorm = noise.frobenius_norm();
        noise.scale(Complex64::new(sigma / nnorm, 0.0));
        for (x, n) in t.data_mut().iter_mut().zip(noise.data()) {
            *x += n;
        }
    }
    Ok((t, truth))
}

/// Second simulation's ground truth and noisy observations.
#[derive(Debug, Clone)]
pub struct Sim2Data {
    pub x3: ComplexTensor,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    /// K x R constant-modulus random-phase sources.
    pub s: ComplexMatrix,
}

fn cholesky_lower(m: &RealMatrix) -> Option<RealMatrix> {
    let n = m.rows();
    let mut l = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Generate the second simulation's data: standard complex normal loadings,
/// unit-modulus random-phase sources, and zero-mean complex Gaussian noise
/// that is white in time and spatially colored across the IJ channels with
/// Toeplitz covariance rho^|p-q|, scaled so the realized SNR
/// 10 log10(p_s / p_n) matches the target exactly.
pub fn gen_sim2(cfg: &Sim2Config, snr_db: f64, seed: u64) -> Result<Sim2Data> {
    let mut rg = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.i * cfg.j;
    let a = ComplexMatrix::from_fn(cfg.i, cfg.rank, |_, _| cn(&mut rg));
    let b = ComplexMatrix::from_fn(cfg.j, cfg.rank, |_, _| cn(&mut rg));
    let s = ComplexMatrix::from_fn(cfg.samples, cfg.rank, |_, _| {
        let phase: f64 = rg.gen::<f64>() * std::f64::consts::TAU;
        Complex64::new(phase.cos(), phase.sin())
    });
    let m = khatri_rao(&a, &b)?;
    let mut x = m.matmul(&s.transpose())?; // n x K clean mixture

    if snr_db.is_finite() {
        let sigma_sp = RealMatrix::from_fn(n, n, |p, q| {
            cfg.noise_rho.powi((p as i64 - q as i64).unsigned_abs() as i32)
        });
        let l = cholesky_lower(&sigma_sp).ok_or_else(|| Error::Degenerate {
            context: "gen_sim2",
            detail: "noise covariance not positive definite".into(),
        })?;
        let g = ComplexMatrix::from_fn(n, cfg.samples, |_, _| cn(&mut rg) / (2.0f64).sqrt());
        let mut w = l.to_complex().matmul(&g)?;
        let p_signal = x.frobenius_norm().powi(2);
        let p_noise = w.frobenius_norm().powi(2);
        if p_noise > 0.0 {
            let scale = (p_signal / p_noise).sqrt() * 10f64.powf(-snr_db / 20.0);
            w.scale(Complex64::new(scale, 0.0));
            x = x.add(&w)?;
        }
    }
    let x3 = crate::tensor::dematricize3(&x, cfg.i, cfg.j)?;
    Ok(Sim2Data { x3, a, b, s })
}

/// Amari performance index: zero iff the matrix is a scaled permutation.
pub fn amari_pi(p: &ComplexMatrix) -> Result<f64> {
    let r = p.rows();
    if r != p.cols() || r < 2 {
        return Err(Error::dims(
            "amari_pi",
            "square matrix of size >= 2",
            format!("{}x{}", p.rows(), p.cols()),
        ));
    }
    let mut total = 0.0;
    for i in 0..r {
        let mx = (0..r).map(|j| p.get(i, j).norm()).fold(0.0, f64::max);
        if mx == 0.0 {
            return Err(Error::Degenerate {
                context: "amari_pi",
                detail: format!("all-zero row {i}"),
            });
        }
        total += (0..r).map(|j| p.get(i, j).norm() / mx).sum::<f64>() - 1.0;
    }
    for j in 0..r {
        let mx = (0..r).map(|i| p.get(i, j).norm()).fold(0.0, f64::max);
        if mx == 0.0 {
            return Err(Error::Degenerate {
                context: "amari_pi",
                detail: format!("all-zero column {j}"),
            });
        }
        total += (0..r).map(|i| p.get(i, j).norm() / mx).sum::<f64>() - 1.0;
    }
    Ok(total / (2.0 * r as f64 * (r as f64 - 1.0)))
}

/// PI of a loading estimate against the truth: amari_pi(pinv(est) * truth).
pub fn pi_of_estimate(est: &ComplexMatrix, truth: &ComplexMatrix) -> Result<f64> {
    if est.rows() != truth.rows() || est.cols() != truth.cols() {
        return Err(Error::dims(
            "pi_of_estimate",
            format!("{}x{}", truth.rows(), truth.cols()),
            format!("{}x{}", est.rows(), est.cols()),
        ));
    }
    let p = pseudo_inverse(est, 1e-12).matmul(truth)?;
    amari_pi(&p)
}

fn als_seed_for(seed: u64) -> u64 {
    // distinct stream for the random ALS initialization
    splitmix64(seed ^ 0x414c_5345)
}

fn run_sim1_trial(
    cfg: &Sim1Config,
    snr_db: f64,
    trial: usize,
    methods: &[Backend],
) -> Vec<TrialResult> {
    let seed = mix_seed(cfg.base_seed, snr_db, trial);
    let gen = gen_sim1(cfg, snr_db, seed);
    methods
        .iter()
        .map(|&method| {
            let base = TrialResult {
                method,
                snr_db,
                trial,
                seed,
                pi_a: f64::NAN,
                pi_b: f64::NAN,
                time_s: 0.0,
                status: String::new(),
            };
            match &gen {
                Err(e) => TrialResult {
                    status: err_status(e),
                    time_s: 1e-9,
                    ..base
                },
                Ok((t, truth)) => {
                    let start = std::time::Instant::now();
                    let outcome = decompose_t5(t, cfg.rank, method, seed);
                    let time_s = start.elapsed().as_secs_f64().max(1e-9);
                    match outcome {
                        Ok(est) => finish_trial(base, time_s, &est, &truth.a, &truth.b),
                        Err(e) => TrialResult {
                            status: err_status(&e),
                            time_s,
                            ..base
                        },
                    }
                }
            }
        })
        .collect()
}

fn decompose_t5(t: &ComplexTensor, rank: usize, method: Backend, seed: u64) -> Result<FactorSet> {
    match method {
        Backend::Jd => Ok(cps5_jd(t, &Cps5JdOptions::new(rank))?.0),
        Backend::Eals => {
            let mut opts = AlsOptions::new(rank);
            opts.init = AlsInit::Random {
                seed: als_seed_for(seed),
            };
            Ok(cps5_eals(t, &opts)?.0)
        }
        Backend::EalsJd => {
            let (f0, _) = cps5_jd(t, &Cps5JdOptions::new(rank))?;
            let mut opts = AlsOptions::new(rank);
            opts.init = AlsInit::Provided(f0);
            Ok(cps5_eals(t, &opts)?.0)
        }
    }
}

fn finish_trial(
    base: TrialResult,
    time_s: f64,
    est: &FactorSet,
    truth_a: &ComplexMatrix,
    truth_b: &ComplexMatrix,
) -> TrialResult {
    match (pi_of_estimate(&est.a, truth_a), pi_of_estimate(&est.b, truth_b)) {
        (Ok(pi_a), Ok(pi_b)) => TrialResult {
            pi_a,
            pi_b,
            time_s,
            status: "ok".into(),
            ..base
        },
        (a, b) => {
            let e = a.err().or(b.err()).unwrap();
            TrialResult {
                status: err_status(&e),
                time_s,
                ..base
            }
        }
    }
}

fn err_status(e: &Error) -> String {
    let mut s = e.to_string().replace([',', '\n'], ";");
    s.truncate(120);
    format!("err:{s}")
}

fn run_sim2_trial(
    cfg: &Sim2Config,
    snr_db: f64,
    trial: usize,
    methods: &[Backend],
) -> Vec<TrialResult> {
    let seed = mix_seed(cfg.base_seed, snr_db, trial);
    // the cumulant tensor is common pipeline input; each timed method is one
    // decomposition of it
    let prep = (|| -> Result<(ComplexTensor, ComplexMatrix, Sim2Data)> {
        let data = gen_sim2(cfg, snr_db, seed)?;
        let x = matricize3(&data.x3)?;
        let c = sample_quadricov(&x)?;
        let eig = dominant_eigenmatrices(&c, cfg.rank)?;
        let t5 = assemble_t5(&eig, cfg.i, cfg.j)?;
        Ok((t5, x, data))
    })();
    methods
        .iter()
        .map(|&method| {
            let base = TrialResult {
                method,
                snr_db,
                trial,
                seed,
                pi_a: f64::NAN,
                pi_b: f64::NAN,
                time_s: 0.0,
                status: String::new(),
            };
            match &prep {
                Err(e) => TrialResult {
                    status: err_status(e),
                    time_s: 1e-9,
                    ..base
                },
                Ok((t5, x, data)) => {
                    let start = std::time::Instant::now();
                    let outcome = decompose_t5(t5, cfg.rank, method, seed)
                        .and_then(|est| {
                            recover_sources(x, &est.a, &est.b)?;
                            Ok(est)
                        });
                    let time_s = start.elapsed().as_secs_f64().max(1e-9);
                    match outcome {
                        Ok(est) => finish_trial(base, time_s, &est, &data.a, &data.b),
                        Err(e) => TrialResult {
                            status: err_status(&e),
                            time_s,
                            ..base
                        },
                    }
                }
            }
        })
        .collect()
}

/// Run every (snr, trial, method) combination. Trials are independent and
/// may execute on `jobs` threads; the output is canonically sorted by
/// (method, snr, trial) so it does not depend on scheduling. Method timing
/// is wall time of the single-threaded method execution.
pub fn run_simulation(
    cfg: &SimulationConfig,
    methods: &[Backend],
    jobs: usize,
) -> Vec<TrialResult> {
    let (snrs, trials) = match cfg {
        SimulationConfig::Sim1(c) => (c.snr_grid_db.clone(), c.trials),
        SimulationConfig::Sim2(c) => (c.snr_grid_db.clone(), c.trials),
    };
    if methods.is_empty() {
        return Vec::new();
    }
    let tasks: Vec<(f64, usize)> = snrs
        .iter()
        .flat_map(|&s| (0..trials).map(move |t| (s, t)))
        .collect();
    let jobs = jobs.max(1).min(tasks.len().max(1));

    let mut results: Vec<TrialResult> = if jobs == 1 {
        tasks
            .iter()
            .flat_map(|&(s, t)| match cfg {
                SimulationConfig::Sim1(c) => run_sim1_trial(c, s, t, methods),
                SimulationConfig::Sim2(c) => run_sim2_trial(c, s, t, methods),
            })
            .collect()
    } else {
        let chunks: Vec<Vec<(f64, usize)>> = (0..jobs)
            .map(|w| {
                tasks
                    .iter()
                    .skip(w)
                    .step_by(jobs)
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut collected = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .into_iter()
                            .flat_map(|(s, t)| match cfg {
                                SimulationConfig::Sim1(c) => run_sim1_trial(c, s, t, methods),
                                SimulationConfig::Sim2(c) => run_sim2_trial(c, s, t, methods),
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                collected.extend(h.join().expect("worker panicked"));
            }
        });
        collected
    };

    results.sort_by(|a, b| {
        (a.method.as_str(), a.snr_db, a.trial)
            .partial_cmp(&(b.method.as_str(), b.snr_db, b.trial))
            .unwrap()
    });
    results
}

/// CSV emission with the fixed schema
/// `method,snr_db,trial,seed,pi_a,pi_b,time_s,status`.
pub fn results_to_csv(results: &[TrialResult]) -> String {
    let mut out = String::from("method,snr_db,trial,seed,pi_a,pi_b,time_s,status\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method, r.snr_db, r.trial, r.seed, r.pi_a, r.pi_b, r.time_s, r.status
        ));
    }
    out
}

/// Quartile summary for one (method, snr) cell, over successful trials.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryCell {
    pub method: Backend,
    pub snr_db: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub pi_a_median: f64,
    pub pi_a_q1: f64,
    pub pi_a_q3: f64,
    pub pi_b_median: f64,
    pub pi_b_q1: f64,
    pub pi_b_q3: f64,
    pub time_mean_s: f64,
    pub time_median_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub cells: Vec<SummaryCell>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Aggregate per (method, snr), in canonical order.
pub fn summarize(results: &[TrialResult]) -> Summary {
    let mut keys: Vec<(Backend, f64)> = Vec::new();
    for r in results {
        if !keys
            .iter()
            .any(|&(m, s)| m == r.method && s == r.snr_db)
        {
            keys.push((r.method, r.snr_db));
        }
    }
    keys.sort_by(|a, b| (a.0.as_str(), a.1).partial_cmp(&(b.0.as_str(), b.1)).unwrap());
    let cells = keys
        .into_iter()
        .map(|(method, snr_db)| {
            let group: Vec<&TrialResult> = results
                .iter()
                .filter(|r| r.method == method && r.snr_db == snr_db)
                .collect();
            let ok: Vec<&&TrialResult> = group.iter().filter(|r| r.is_ok()).collect();
            let mut pia: Vec<f64> = ok.iter().map(|r| r.pi_a).collect();
            let mut pib: Vec<f64> = ok.iter().map(|r| r.pi_b).collect();
            let mut times: Vec<f64> = ok.iter().map(|r| r.time_s).collect();
            pia.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pib.sort_by(|a, b| a.partial_cmp(b).unwrap());
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            SummaryCell {
                method,
                snr_db,
                n_ok: ok.len(),
                n_failed: group.len() - ok.len(),
                pi_a_median: quantile(&pia, 0.5),
                pi_a_q1: quantile(&pia, 0.25),
                pi_a_q3: quantile(&pia, 0.75),
                pi_b_median: quantile(&pib, 0.5),
                pi_b_q1: quantile(&pib, 0.25),
                pi_b_q3: quantile(&pib, 0.75),
                time_mean_s: if times.is_empty() {
                    f64::NAN
                } else {
                    times.iter().sum::<f64>() / times.len() as f64
                },
                time_median_s: quantile(&times, 0.5),
            }
        })
        .collect();
    Summary { cells }
}
