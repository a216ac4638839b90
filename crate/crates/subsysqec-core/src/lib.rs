//! Bacon-Shor subsystem codes `C(n1, n2)` on an `n1 x n2` qubit grid, the
//! fault-tolerant circuits that operate on them, and Monte Carlo machinery to
//! measure how well those circuits perform under asymmetric Pauli noise.
//!
//! The crate is organized bottom-up:
//!
//! - [`pauli`] — signed Pauli operators as GF(2) bit-vector pairs, with span
//!   and minimum-weight coset queries (the brute-force distance oracle).
//! - [`code`] — construction of the stabilizer group `S`, gauge group `T`,
//!   and logical operators `L` of `C(n1, n2)`, plus operator classification.
//! - [`circuit`] — a fault-location-level circuit IR with classical feedback.
//! - [`builders`] — syndrome extraction, encoding, code conversion
//!   (`C(3,3) <-> C(5,3)`), transversal gates, extended rectangles, and the
//!   repeated-memory chain.
//! - [`noise`] — the asymmetric stochastic error model (`alpha = p_z / p_x`):
//!   seeded sampling and exhaustive single-fault enumeration.
//! - [`engine`] — exact stabilizer (tableau) simulation with fault injection,
//!   classical feedback, ideal logical readout, and the single-fault
//!   tolerance verifier.
//! - [`decoder`] — gauge-outcome reconstruction of stabilizer syndromes,
//!   majority voting across repetitions, and minimal-weight corrections.
//! - [`experiments`] — failure-rate estimation with confidence intervals,
//!   pseudo-threshold extraction, and the chain experiment producing the
//!   failure-rate-reduction factor `R` and its crossover `N(R=1)`.

pub mod builders;
pub mod circuit;
pub mod code;
pub mod decoder;
pub mod engine;
pub mod experiments;
pub mod noise;
pub mod pauli;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator length mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported geometry {0}x{1}: dimensions must be odd and >= 3")]
    UnsupportedGeometry(u16, u16),
    #[error("coset enumeration over {0} generators exceeds the capacity of {1}")]
    EnumerationTooLarge(usize, usize),
    #[error("column {0} out of range 1..={1}")]
    ColumnOutOfRange(u16, u16),
    #[error("row {0} out of range 1..={1}")]
    RowOutOfRange(u16, u16),
    #[error("repetition counts must be odd, got rz={0} rx={1}")]
    EvenRepetition(u32, u32),
    #[error("majority vote needs an odd number of inputs, got {0}")]
    EvenMajority(usize),
    #[error("transversal H requires a square code, got {0}x{1}")]
    NonSquareHadamard(u16, u16),
    #[error("simulator capacity exceeded: {0} concurrently live qubits (max {1})")]
    EngineCapacity(usize, usize),
    #[error("register r{0} read before assignment")]
    UnwrittenRegister(u32),
    #[error("at least one trial is required")]
    ZeroTrials,
    #[error("no threshold crossing inside the bracket [{0:e}, {1:e}]")]
    NoCrossing(f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
