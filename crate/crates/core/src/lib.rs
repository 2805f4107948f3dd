//! Fifth-order partially symmetric canonical polyadic decomposition.
//!
//! The crate provides two decomposition backends for complex tensors of the
//! form T = sum_r a_r o b_r o conj(a_r) o conj(b_r) o d_r (d_r real):
//!
//! * **CPS5-JD** — a direct method: matricize, SVD, phase normalization of
//!   the singular factors, rank-1 detection systems, real non-orthogonal
//!   joint diagonalization, rank-1 factor recovery. No iterative updates of
//!   the loading matrices.
//! * **CPS5-EALS** — alternating least squares with an exact polynomial
//!   enhanced line search, preserving the partial symmetry structurally.
//!
//! On top of these sits a blind-source-separation pipeline for trilinear
//! mixtures: the sampled fourth-order cumulant of the matricized data is
//! eigen-decomposed and its leading eigenmatrices are assembled into exactly
//! such a fifth-order tensor, whose decomposition recovers the mixing
//! factors and (via pseudo-inverse) the sources.
//!
//! The `experiment` module contains seeded synthetic-data generators, the
//! Amari performance index, and a Monte-Carlo runner with CSV/JSON output.

pub mod als;
pub mod cumulant;
pub mod detect;
mod error;
pub mod experiment;
pub mod io;
pub mod jd;
pub mod linalg;
pub mod pipeline;
pub mod rnjd;
pub mod selftest;
pub mod tensor;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};
pub use tensor::{
    check_partial_symmetry, column_to_cube, column_to_square, cube_to_column, dematricize3,
    dematricize5, khatri_rao, khatri_rao3, matricize3, matricize5, square_to_column,
    synthesize_cp5, ComplexMatrix, ComplexTensor, FactorSet, RealMatrix,
};

pub use als::{cps5_eals, AlsOptions, AlsTrace};
pub use jd::{cps5_jd, Cps5JdOptions, Cps5Report};
pub use pipeline::{ica_cpa, Backend, IcaCpaOptions, IcaCpaResult};
