use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FieldError, PrimeField};

/// A data symbol of GF(q^ℓ), stored as its ℓ coordinates over GF(q).
///
/// Only GF(q)-linear operations are provided: the storage code, the query
/// projections and the decoder never multiply two data symbols together.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtSymbol(Vec<u32>);

impl ExtSymbol {
    pub fn zero(ell: usize) -> Self {
        Self(vec![0; ell])
    }

    pub fn from_coords(field: PrimeField, coords: Vec<u32>) -> Result<Self, FieldError> {
        for &c in &coords {
            field.check(c)?;
        }
        Ok(Self(coords))
    }

    /// Lifts a base-field scalar into the first coordinate.
    pub fn from_base(value: u32, ell: usize) -> Self {
        let mut v = vec![0; ell];
        if ell > 0 {
            v[0] = value;
        }
        Self(v)
    }

    pub fn random<R: Rng + ?Sized>(field: PrimeField, ell: usize, rng: &mut R) -> Self {
        Self((0..ell).map(|_| rng.gen_range(0..field.modulus())).collect())
    }

    pub fn ell(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, field: PrimeField, other: &Self) -> Self {
        debug_assert_eq!(self.ell(), other.ell());
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| field.add(a, b)).collect())
    }

    pub fn sub(&self, field: PrimeField, other: &Self) -> Self {
        debug_assert_eq!(self.ell(), other.ell());
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| field.sub(a, b)).collect())
    }

    pub fn scale(&self, field: PrimeField, c: u32) -> Self {
        Self(self.0.iter().map(|&a| field.mul(a, c)).collect())
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, field: PrimeField, c: u32, other: &Self) {
        debug_assert_eq!(self.ell(), other.ell());
        if c == 0 {
            return;
        }
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a = field.add(*a, field.mul(c, b));
        }
    }
}
