//! End-to-end source separation for trilinear mixtures: matricize the
//! three-way data, estimate the fourth-order cumulant, assemble the
//! fifth-order partially symmetric tensor from its leading eigenmatrices,
//! decompose it with the chosen backend, and recover the sources by
//! pseudo-inverse.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::als::{cps5_eals, AlsInit, AlsOptions, AlsTrace};
use crate::cumulant::{
    assemble_t5, dominant_eigenmatrices, sample_quadricov, QuadricovarianceMatrix,
};
use crate::error::{Error, Result};
use crate::jd::{cps5_jd, Cps5JdOptions, Cps5Report};
use crate::linalg::pseudo_inverse;
use crate::tensor::{khatri_rao, matricize3, ComplexMatrix, ComplexTensor, FactorSet};

/// Decomposition backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Backend {
    Jd,
    Eals,
    /// CPS5-JD output used as the initialization of CPS5-EALS.
    EalsJd,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Jd => "jd",
            Backend::Eals => "eals",
            Backend::EalsJd => "eals_jd",
        }
    }

    pub const ALL: [Backend; 3] = [Backend::Jd, Backend::Eals, Backend::EalsJd];
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jd" => Ok(Backend::Jd),
            "eals" => Ok(Backend::Eals),
            "eals_jd" | "eals-jd" => Ok(Backend::EalsJd),
            other => Err(Error::Degenerate {
                context: "Backend::from_str",
                detail: format!("unknown backend '{other}' (expected jd, eals, eals_jd)"),
            }),
        }
    }
}

/// Options shared by the pipeline stages; the rank fields of both sub-option
/// sets are overwritten with the pipeline rank.
#[derive(Debug, Clone)]
pub struct IcaCpaOptions {
    pub jd: Cps5JdOptions,
    pub als: AlsOptions,
}

impl IcaCpaOptions {
    pub fn new(rank: usize) -> Self {
        Self {
            jd: Cps5JdOptions::new(rank),
            als: AlsOptions::new(rank),
        }
    }
}

/// Backend diagnostics carried through the pipeline result.
#[derive(Debug, Clone, Serialize)]
pub enum BackendReport {
    Jd(Cps5Report),
    Eals(AlsTrace),
    EalsJd { jd: Cps5Report, eals: AlsTrace },
}

/// Pipeline output: loading estimates, recovered sources, diagnostics, and
/// the retained cumulant spectrum.
#[derive(Debug, Clone)]
pub struct IcaCpaResult {
    pub factors: FactorSet,
    /// K x R recovered sources, defined up to permutation and scale.
    pub sources: ComplexMatrix,
    pub report: BackendReport,
    /// Signed eigenvalues retained from the cumulant (descending magnitude).
    pub spectrum: Vec<f64>,
    /// Magnitude of the first discarded eigenvalue (rank-gap diagnostic).
    pub spectrum_next: f64,
}

/// Run the pipeline on a three-way data tensor (I x J x K samples).
/// Requires R <= IJ so the Khatri-Rao mixing matrix admits a pseudo-inverse.
pub fn ica_cpa(
    x3: &ComplexTensor,
    rank: usize,
    backend: Backend,
    opts: &IcaCpaOptions,
) -> Result<IcaCpaResult> {
    let dims = x3.dims();
    if dims.len() != 3 {
        return Err(Error::dims("ica_cpa", "3-way tensor", format!("{dims:?}")));
    }
    let (i, j) = (dims[0], dims[1]);
    if rank == 0 || rank > i * j {
        return Err(Error::RankOutOfRange {
            context: "ica_cpa",
            rank,
            max: i * j,
        });
    }
    let x = matricize3(x3)?;
    let c = sample_quadricov(&x)?;
    ica_cpa_from_cumulant(&c, &x, i, j, rank, backend, opts)
}

/// Pipeline tail starting from a given quadricovariance (lets callers inject
/// the exact-statistics cumulant in place of the sampled one).
pub fn ica_cpa_from_cumulant(
    c: &QuadricovarianceMatrix,
    x: &ComplexMatrix,
    i: usize,
    j: usize,
    rank: usize,
    backend: Backend,
    opts: &IcaCpaOptions,
) -> Result<IcaCpaResult> {
    if c.n != i * j || x.rows() != i * j {
        return Err(Error::dims(
            "ica_cpa_from_cumulant",
            format!("{} channels", i * j),
            format!("C: {}, X: {}", c.n, x.rows()),
        ));
    }
    let eig = dominant_eigenmatrices(c, rank)?;
    let t5 = assemble_t5(&eig, i, j)?;

    let mut jd_opts = opts.jd.clone();
    jd_opts.rank = rank;
    let mut als_opts = opts.als.clone();
    als_opts.rank = rank;

    let (factors, report) = match backend {
        Backend::Jd => {
            let (f, r) = cps5_jd(&t5, &jd_opts)?;
            (f, BackendReport::Jd(r))
        }
        Backend::Eals => {
            let (f, tr) = cps5_eals(&t5, &als_opts)?;
            (f, BackendReport::Eals(tr))
        }
        Backend::EalsJd => {
            let (f0, rj) = cps5_jd(&t5, &jd_opts)?;
            als_opts.init = AlsInit::Provided(f0);
            let (f, tr) = cps5_eals(&t5, &als_opts)?;
            (f, BackendReport::EalsJd { jd: rj, eals: tr })
        }
    };
    let sources = recover_sources(x, &factors.a, &factors.b)?;
    Ok(IcaCpaResult {
        factors,
        sources,
        report,
        spectrum: eig.lambdas,
        spectrum_next: eig.lambda_next,
    })
}

/// S = (pinv(A (.) B) X)^T, one column per recovered source.
pub fn recover_sources(
    x: &ComplexMatrix,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    if a.rows() * b.rows() != x.rows() {
        return Err(Error::dims(
            "recover_sources",
            format!("{} mixture rows", a.rows() * b.rows()),
            format!("{}", x.rows()),
        ));
    }
    let m = khatri_rao(a, b)?;
    let s = pseudo_inverse(&m, 1e-12).matmul(x)?;
    Ok(s.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::analytic_quadricov;
    use crate::experiment::pi_of_estimate;
    use crate::test_util::{rand_cmatrix, rng};
    use num_complex::Complex64;
    use rand::Rng;

    fn random_phase_sources(k: usize, r: usize, rg: &mut rand_chacha::ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(k, r, |_, _| {
            let phase: f64 = rg.gen::<f64>() * std::f64::consts::TAU;
            Complex64::new(phase.cos(), phase.sin())
        })
    }

    #[test]
    fn sources_recovered_exactly_from_clean_mixture() {
        let mut rg = rng(801);
        let (i, j, k, r) = (3, 2, 40, 2);
        let a = rand_cmatrix(i, r, &mut rg);
        let b = rand_cmatrix(j, r, &mut rg);
        let s = random_phase_sources(k, r, &mut rg);
        let m = khatri_rao(&a, &b).unwrap();
        let x = m.matmul(&s.transpose()).unwrap();
        let s_hat = recover_sources(&x, &a, &b).unwrap();
        let diff = s_hat.sub(&s).unwrap().frobenius_norm();
        assert!(diff < 1e-10 * s.frobenius_norm(), "diff {diff}");

        let zero = ComplexMatrix::zeros(i * j, k);
        let sz = recover_sources(&zero, &a, &b).unwrap();
        assert_eq!(sz.frobenius_norm(), 0.0);
    }

    #[test]
    fn exact_statistics_pipeline_recovers_mixing() {
        let mut rg = rng(803);
        let (i, j, r) = (3, 3, 2);
        let a = rand_cmatrix(i, r, &mut rg);
        let b = rand_cmatrix(j, r, &mut rg);
        let m = khatri_rao(&a, &b).unwrap();
        let c = analytic_quadricov(&m, &[-1.0, -1.0]).unwrap();
        // a token data record for the source-recovery stage
        let s = random_phase_sources(50, r, &mut rg);
        let x = m.matmul(&s.transpose()).unwrap();
        let res = ica_cpa_from_cumulant(&c, &x, i, j, r, Backend::Jd, &IcaCpaOptions::new(r))
            .unwrap();
        let pi_a = pi_of_estimate(&res.factors.a, &a).unwrap();
        let pi_b = pi_of_estimate(&res.factors.b, &b).unwrap();
        assert!(pi_a < 1e-6, "PI(A) = {pi_a}");
        assert!(pi_b < 1e-6, "PI(B) = {pi_b}");
        assert_eq!(res.spectrum.len(), r);
    }

    #[test]
    fn eals_jd_composition_matches_manual_wiring() {
        let mut rg = rng(805);
        let (i, j, r, k) = (3, 2, 2, 4000);
        let a = rand_cmatrix(i, r, &mut rg);
        let b = rand_cmatrix(j, r, &mut rg);
        let s = random_phase_sources(k, r, &mut rg);
        let m = khatri_rao(&a, &b).unwrap();
        let x = m.matmul(&s.transpose()).unwrap();
        let x3 = crate::tensor::dematricize3(&x, i, j).unwrap();

        let opts = IcaCpaOptions::new(r);
        let composed = ica_cpa(&x3, r, Backend::EalsJd, &opts).unwrap();

        // manual wiring of the same stages
        let c = sample_quadricov(&x).unwrap();
        let eig = dominant_eigenmatrices(&c, r).unwrap();
        let t5 = assemble_t5(&eig, i, j).unwrap();
        let (f0, _) = cps5_jd(&t5, &Cps5JdOptions::new(r)).unwrap();
        let mut als_opts = AlsOptions::new(r);
        als_opts.init = AlsInit::Provided(f0);
        let (manual, _) = cps5_eals(&t5, &als_opts).unwrap();

        let diff_a = composed.factors.a.sub(&manual.a).unwrap().frobenius_norm();
        let diff_b = composed.factors.b.sub(&manual.b).unwrap().frobenius_norm();
        assert!(diff_a < 1e-10 && diff_b < 1e-10, "{diff_a} {diff_b}");
    }

    #[test]
    fn rank_above_channel_count_rejected() {
        let x3 = ComplexTensor::zeros(vec![2, 2, 10]);
        assert!(ica_cpa(&x3, 5, Backend::Jd, &IcaCpaOptions::new(5)).is_err());
    }

    #[test]
    fn backend_parsing() {
        assert_eq!("jd".parse::<Backend>().unwrap(), Backend::Jd);
        assert_eq!("eals_jd".parse::<Backend>().unwrap(), Backend::EalsJd);
        assert!("nope".parse::<Backend>().is_err());
    }
}
