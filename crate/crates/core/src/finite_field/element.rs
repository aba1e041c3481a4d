use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::FieldError;

/// A prime field GF(q). Elements are carried around as plain `u32` residues
/// and all arithmetic goes through this context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PrimeField {
    q: u32,
}

impl PrimeField {
    /// Largest modulus accepted. Products of two residues must fit in `u64`.
    pub const MAX_MODULUS: u32 = 1 << 31;

    pub fn new(q: u32) -> Result<Self, FieldError> {
        if q > Self::MAX_MODULUS {
            return Err(FieldError::ModulusTooLarge(q));
        }
        if !is_prime(q) {
            return Err(FieldError::NotPrime(q));
        }
        Ok(Self { q })
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.q
    }

    /// Reduces an arbitrary signed integer into `[0, q)`.
    #[inline]
    pub fn reduce(&self, v: i64) -> u32 {
        v.rem_euclid(self.q as i64) as u32
    }

    /// Checks that `v` is already a canonical residue.
    pub fn check(&self, v: u32) -> Result<u32, FieldError> {
        if v < self.q {
            Ok(v)
        } else {
            Err(FieldError::OutOfRange { value: v as u64, modulus: self.q })
        }
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a as u64 + b as u64;
        (s % self.q as u64) as u32
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        let s = a as u64 + (self.q - b) as u64;
        (s % self.q as u64) as u32
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1 % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: u32) -> Result<u32, FieldError> {
        if a.is_multiple_of(self.q) {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(a, self.q as u64 - 2))
    }

    pub fn element(&self, v: u32) -> Result<FieldElement, FieldError> {
        FieldElement::new(v, self.q)
    }

    /// Iterates every element of the field in increasing order.
    pub fn elements(&self) -> impl Iterator<Item = u32> {
        0..self.q
    }
}

impl TryFrom<u32> for PrimeField {
    type Error = FieldError;

    fn try_from(q: u32) -> Result<Self, Self::Error> {
        PrimeField::new(q)
    }
}

impl From<PrimeField> for u32 {
    fn from(f: PrimeField) -> u32 {
        f.q
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.q)
    }
}

pub fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let q = q as u64;
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `>= lo`.
pub fn next_prime(lo: u32) -> u32 {
    let mut p = lo.max(2);
    while !is_prime(p) {
        p += 1;
    }
    p
}

/// A residue tagged with its modulus.
///
/// This is the self-describing form used at API boundaries. Hot loops work
/// on raw residues through [`PrimeField`] instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    modulus: u32,
}

impl FieldElement {
    pub fn new(value: u32, modulus: u32) -> Result<Self, FieldError> {
        let field = PrimeField::new(modulus)?;
        Ok(Self { value: field.check(value)?, modulus })
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    fn field(&self) -> PrimeField {
        PrimeField { q: self.modulus }
    }

    fn same_field(&self, other: &Self) -> Result<PrimeField, FieldError> {
        if self.modulus != other.modulus {
            return Err(FieldError::ModulusMismatch(self.modulus, other.modulus));
        }
        Ok(self.field())
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, FieldError> {
        let f = self.same_field(&rhs)?;
        Ok(Self { value: f.add(self.value, rhs.value), modulus: self.modulus })
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, FieldError> {
        let f = self.same_field(&rhs)?;
        Ok(Self { value: f.sub(self.value, rhs.value), modulus: self.modulus })
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self, FieldError> {
        let f = self.same_field(&rhs)?;
        Ok(Self { value: f.mul(self.value, rhs.value), modulus: self.modulus })
    }

    pub fn inv(self) -> Result<Self, FieldError> {
        Ok(Self { value: self.field().inv(self.value)?, modulus: self.modulus })
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
}

/// `a + b`, failing when the moduli differ.
pub fn ff_add(a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
    a.checked_add(b)
}

/// Multiplicative inverse, failing on zero.
pub fn ff_mul_inv(a: FieldElement) -> Result<FieldElement, FieldError> {
    a.inv()
}

// Operator forms panic on mismatched moduli; use the `checked_*` methods
// when the operands come from untrusted input.
impl Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.checked_add(rhs).expect("field elements from different fields")
    }
}

impl Sub for FieldElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.checked_sub(rhs).expect("field elements from different fields")
    }
}

impl Mul for FieldElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.checked_mul(rhs).expect("field elements from different fields")
    }
}

impl Neg for FieldElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self { value: self.field().neg(self.value), modulus: self.modulus }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}
