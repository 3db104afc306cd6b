//! Exact cluster mutation combinatorics together with numerically verified
//! symplectic groupoid charts for log-canonical Poisson structures.
//!
//! The crate is organised in two halves. The exact half ([`exchange`],
//! [`trace`], [`laurent`]) runs on arbitrary-precision integers and rationals:
//! compatible pairs, c-/g-vector matrices and their duals, tropical signs,
//! F-polynomials and the separation-of-additions formulas. The numeric half
//! ([`numerics`], [`charts`], [`groupoids`], [`lifted`]) evaluates the chart
//! and groupoid maps in double precision and verifies every identity that is
//! checkable by sampling: groupoid axioms, multiplicativity of the symplectic
//! forms, Poisson compatibility of all maps, conserved quantities of the
//! Hamiltonian flows, periodicity of mutation sequences and the dilogarithm
//! integral identities attached to them.

pub mod charts;
pub mod exchange;
pub mod groupoids;
pub mod laurent;
pub mod lifted;
pub mod numerics;
pub mod report;
pub mod sample;
pub mod suites;
pub mod trace;

use thiserror::Error;

/// Arbitrary-precision integer used by all exact matrix arithmetic.
pub type Int = num::BigInt;
/// Arbitrary-precision rational used for Omega matrices and Laurent coefficients.
pub type Rat = num::BigRational;

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction {dir} out of range 1..={n}")]
    InvalidDirection { dir: usize, n: usize },

    /// A mixed-sign c-vector column. This violates the sign-coherence
    /// assumption every tropical-sign mutation relies on, so it aborts the
    /// computation rather than being recorded as a check failure.
    #[error("sign-coherence violation in c-matrix column {col}: {detail}")]
    SignCoherence { col: usize, detail: String },

    #[error("invalid exchange data: {0}")]
    InvalidExchange(String),

    #[error("incompatible pair: {0}")]
    Incompatible(String),

    #[error("exact Laurent division left a remainder")]
    InexactDivision,

    #[error("groupoid elements are not composable: {0}")]
    NotComposable(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, Error>;
