//! Mutually unbiased product bases of multi-qudit Hilbert spaces.
//!
//! The crate builds the canonical maximal sets of mutually unbiased (MU)
//! product bases, checks unbiasedness directly and factor-wise, analyses the
//! structure of product bases, tests equivalence of basis sets, audits the
//! entanglement of vectors unbiased to product bases, and runs small
//! numerical searches for further product bases.

pub mod constructions;
pub mod entanglement;
pub mod equivalence;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod mu;
pub mod optim;
pub mod random;
pub mod search;
pub mod structure;

pub use error::{Error, Result};
pub use linalg::{
    inner, partial_trace, tensor, validate_orthonormal, DensityMatrix, DimensionSignature, Ket,
    MubSet, ProductBasis, ProductKet, ValidationReport, CONSISTENCY_TOL, DEFAULT_TOL, NORM_TOL,
};
