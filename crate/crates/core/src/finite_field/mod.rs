//! Prime-field arithmetic and exact dense linear algebra.

mod element;
mod matrix;
mod symbol;

pub use element::{ff_add, ff_mul_inv, is_prime, next_prime, FieldElement, PrimeField};
pub use matrix::{determined_unknowns, gaussian_solve, rank, FieldMatrix, Solution};
pub use symbol::ExtSymbol;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("modulus {0} exceeds the supported maximum")]
    ModulusTooLarge(u32),
    #[error("value {value} out of range for modulus {modulus}")]
    OutOfRange { value: u64, modulus: u32 },
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("matrix is {0}x{1}, not square")]
    NotSquare(usize, usize),
    #[error("matrix is singular")]
    Singular,
    #[error("inconsistent linear system (row {row} reduces to 0 = nonzero)")]
    Inconsistent { row: usize },
}
