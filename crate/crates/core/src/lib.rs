//! Universal robust private information retrieval on MDS-coded storage.
//!
//! A user fetches one of `m` files from `n` storage nodes holding an
//! `(n, k)` MDS encoding, without any single node learning which file.
//! Retrieval is adaptive: a first layer of queries goes to every node, and if
//! up to `ν` of them stay silent a second layer, built from the observed
//! failure set, recovers exactly what was lost. The download cost matches
//! `n_i / (n_i − k)` for every number `i ≤ ν` of silent nodes.
//!
//! Modules, bottom up:
//!
//! - [`finite_field`]: GF(q) arithmetic and Gaussian elimination.
//! - [`mds_storage`]: systematic MDS codes and striped node stores.
//! - [`base_pir`]: the non-robust scheme the robust one is built from.
//! - [`robust_pir`]: universal parameters and the two-layer planner.
//! - [`pir_decoder`]: equation systems, decoding, download accounting.
//! - [`privacy_audit`]: exact and sampled checks that queries hide `f`.
//! - [`dss_sim`]: simulated nodes, failure injection, session driver.
//! - [`golden`]: reference query tables of the worked examples.

pub mod base_pir;
pub mod config;
pub mod dss_sim;
pub mod finite_field;
pub mod golden;
pub mod mds_storage;
pub mod pir_decoder;
pub mod privacy_audit;
pub mod robust_pir;

pub use config::SystemConfig;
pub use finite_field::{ExtSymbol, FieldElement, FieldMatrix, PrimeField};
pub use num_rational::Ratio;

use thiserror::Error;

/// Errors raised while building query plans.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("invalid code parameters (n={n}, k={k}): need 1 <= k < n")]
    InvalidCode { n: usize, k: usize },
    #[error("nu = {nu} exceeds n - k - 1 = {max}; privacy would require downloading everything")]
    NuTooLarge { nu: usize, max: usize },
    #[error("field size {0} is not a supported prime")]
    InvalidField(u32),
    #[error("ell must be at least 1")]
    InvalidEll,
    #[error("file index {f} out of range 1..={m}")]
    FileIndex { f: usize, m: usize },
    #[error("subquery index {j} out of range 1..={d}")]
    SubqueryIndex { j: usize, d: usize },
    #[error("stripe {stripe} outside 1..={alpha}")]
    StripeOutOfRange { stripe: usize, alpha: usize },
    #[error("{d} payload rotations do not fit in {k} systematic nodes")]
    RotationOverflow { d: usize, k: usize },
    #[error("node {node} out of range 1..={n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("{failed} unresponsive nodes exceed the tolerated nu = {nu}")]
    TooManyFailures { failed: usize, nu: usize },
    #[error("subquery {subquery} has no assignment for node {node}")]
    MissingAssignment { subquery: usize, node: usize },
    #[error("layer-1 query to node {node} in subquery {subquery} is malformed")]
    MalformedLayer1 { subquery: usize, node: usize },
    #[error("{missing} missing parts do not fill {capacity} layer-2 slots")]
    CountingMismatch { missing: usize, capacity: usize },
    #[error("no decodable layer-2 assignment for failures {failed:?} ({tried} candidates tried)")]
    Infeasible { failed: Vec<usize>, tried: usize },
    #[error("pad {0} has not been drawn")]
    UnknownPad(usize),
    #[error("unit {unit} outside query length {len}")]
    UnitOutOfRange { unit: usize, len: usize },
    #[error("query length {found}, expected {expected}")]
    QueryLength { expected: usize, found: usize },
    #[error("query coefficients disagree with their composition")]
    CompositionMismatch,
}
