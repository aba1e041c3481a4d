//! The non-robust building block: one `(n, k)` scheme of `d'` subqueries that
//! retrieves `α'` stripes of the desired file.
//!
//! Node groups (1-based):
//!
//! ```text
//! group 1        nodes 1..=k          systematic; r of them carry payload
//! groups 2..β+1  β groups of k nodes  every node gets pad + e_t
//! group β+2      last r nodes         pure pad
//! ```
//!
//! where `n − k = β·k + r`. Across the `d'` subqueries the group-1 payload
//! rotates cyclically downwards, so each stripe routed through group 1 is
//! read from `k` different systematic nodes.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::finite_field::PrimeField;
use crate::PlanError;

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// Subdivisions and subquery count of the non-robust scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseParams {
    pub alpha_prime: usize,
    pub d_prime: usize,
}

pub fn base_params(n: usize, k: usize) -> Result<BaseParams, PlanError> {
    if k == 0 || k >= n {
        return Err(PlanError::InvalidCode { n, k });
    }
    let l = lcm(k, n - k);
    Ok(BaseParams { alpha_prime: l / k, d_prime: l / (n - k) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLayout {
    pub n: usize,
    pub k: usize,
    pub beta: usize,
    pub r: usize,
}

impl GroupLayout {
    /// Nodes `1..=k`.
    pub fn systematic(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.k
    }

    /// Parity group `s ∈ 2..=β+1`.
    pub fn parity_group(&self, s: usize) -> std::ops::RangeInclusive<usize> {
        debug_assert!((2..=self.beta + 1).contains(&s));
        let start = self.k * (s - 1) + 1;
        start..=start + self.k - 1
    }

    /// The trailing `r` parity nodes.
    pub fn tail(&self) -> std::ops::RangeInclusive<usize> {
        (self.beta + 1) * self.k + 1..=self.n
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.k];
        sizes.extend(std::iter::repeat_n(self.k, self.beta));
        sizes.push(self.r);
        sizes
    }
}

pub fn group_layout(n: usize, k: usize) -> Result<GroupLayout, PlanError> {
    if k == 0 || k >= n {
        return Err(PlanError::InvalidCode { n, k });
    }
    Ok(GroupLayout { n, k, beta: (n - k) / k, r: (n - k) % k })
}

/// Symbolic content of a query: a sum of pads and unit vectors.
///
/// Pads are numbered from 1 in the order they are created in a session;
/// units are 1-based positions in the length-`mα` query space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Composition {
    pub pads: Vec<usize>,
    pub units: Vec<usize>,
}

/// Coarse shape of a query, as used in the worked tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryClass {
    PurePad,
    PadUnit,
    PadPad,
    /// Anything else; never produced by the honest planner.
    Other,
}

impl Composition {
    pub fn pure(pad: usize) -> Self {
        Self { pads: vec![pad], units: vec![] }
    }

    pub fn with_unit(pad: usize, unit: usize) -> Self {
        Self { pads: vec![pad], units: vec![unit] }
    }

    pub fn with_pad(fresh: usize, old: usize) -> Self {
        let mut pads = vec![fresh, old];
        pads.sort_unstable();
        Self { pads, units: vec![] }
    }

    pub fn is_payload(&self) -> bool {
        !self.units.is_empty() || self.pads.len() > 1
    }

    pub fn class(&self) -> QueryClass {
        match (self.pads.len(), self.units.len()) {
            (1, 0) => QueryClass::PurePad,
            (1, 1) => QueryClass::PadUnit,
            (2, 0) => QueryClass::PadPad,
            _ => QueryClass::Other,
        }
    }

    pub fn contains_pad(&self, pad: usize) -> bool {
        self.pads.contains(&pad)
    }
}

/// Realized values of the pads of one session, each of length `mα`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PadBank(Vec<Vec<u32>>);

impl PadBank {
    pub fn new(pads: Vec<Vec<u32>>) -> Self {
        Self(pads)
    }

    pub fn random<R: Rng + ?Sized>(field: PrimeField, count: usize, len: usize, rng: &mut R) -> Self {
        let mut bank = Self::default();
        bank.extend_random(field, count, len, rng);
        bank
    }

    pub fn extend_random<R: Rng + ?Sized>(&mut self, field: PrimeField, count: usize, len: usize, rng: &mut R) {
        for _ in 0..count {
            self.0.push((0..len).map(|_| rng.gen_range(0..field.modulus())).collect());
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based pad id.
    pub fn get(&self, pad: usize) -> Option<&[u32]> {
        pad.checked_sub(1).and_then(|i| self.0.get(i)).map(Vec::as_slice)
    }
}

/// One row of a node's query matrix together with its symbolic composition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryVector {
    pub coeffs: Vec<u32>,
    pub composition: Composition,
}

impl QueryVector {
    /// Evaluates `composition` against realized pads.
    pub fn realize(
        field: PrimeField,
        composition: &Composition,
        pads: &PadBank,
        len: usize,
    ) -> Result<Self, PlanError> {
        let mut coeffs = vec![0u32; len];
        for &p in &composition.pads {
            let pad = pads.get(p).ok_or(PlanError::UnknownPad(p))?;
            if pad.len() != len {
                return Err(PlanError::QueryLength { expected: len, found: pad.len() });
            }
            for (c, &v) in coeffs.iter_mut().zip(pad) {
                *c = field.add(*c, v);
            }
        }
        for &u in &composition.units {
            if u == 0 || u > len {
                return Err(PlanError::UnitOutOfRange { unit: u, len });
            }
            coeffs[u - 1] = field.add(coeffs[u - 1], 1);
        }
        Ok(Self { coeffs, composition: composition.clone() })
    }

    /// Builds a query from explicit coefficients, checking that they agree
    /// with the tagged composition.
    pub fn new(
        field: PrimeField,
        coeffs: Vec<u32>,
        composition: Composition,
        pads: &PadBank,
    ) -> Result<Self, PlanError> {
        let expect = Self::realize(field, &composition, pads, coeffs.len())?;
        if expect.coeffs != coeffs {
            return Err(PlanError::CompositionMismatch);
        }
        Ok(expect)
    }
}

/// Number of stripes the group-1 payload covers within one copy.
pub fn group1_stripes(layout: &GroupLayout, params: &BaseParams) -> usize {
    layout.r * params.d_prime / layout.k
}

/// Per-node compositions of subquery `j` (1-based) of one copy of the base
/// scheme. `stripe_offset` is the 0-based first stripe of the copy's window
/// and `alpha` the global number of stripes per file.
pub fn base_subquery(
    j: usize,
    f: usize,
    stripe_offset: usize,
    alpha: usize,
    pad: usize,
    layout: &GroupLayout,
    params: &BaseParams,
) -> Result<BTreeMap<usize, Composition>, PlanError> {
    let GroupLayout { n, k, beta, r } = *layout;
    let d = params.d_prime;
    if j == 0 || j > d {
        return Err(PlanError::SubqueryIndex { j, d });
    }
    if f == 0 {
        return Err(PlanError::FileIndex { f, m: 0 });
    }
    let base = (f - 1) * alpha + stripe_offset;
    let unit = |stripe: usize| -> Result<usize, PlanError> {
        // stripe is 1-based within the copy
        if stripe == 0 || stripe_offset + stripe > alpha {
            return Err(PlanError::StripeOutOfRange { stripe: stripe_offset + stripe, alpha });
        }
        Ok(base + stripe)
    };

    let mut out = BTreeMap::new();
    for node in 1..=n {
        out.insert(node, Composition::pure(pad));
    }

    if r > 0 {
        if d > k {
            return Err(PlanError::RotationOverflow { d, k });
        }
        for p in 0..r {
            let (node, stripe) = if d == k {
                // fixed stripe p, carried one node further down each round
                ((p + j - 1) % k + 1, p + 1)
            } else {
                // gcd(k, r) > 1: fewer rounds than systematic nodes, so fill
                // r·d' payload slots k at a time, one stripe per k slots
                let slot = (j - 1) * r + p;
                (slot % k + 1, slot / k + 1)
            };
            out.insert(node, Composition::with_unit(pad, unit(stripe)?));
        }
    }

    let g1 = group1_stripes(layout, params);
    for s in 2..=beta + 1 {
        let e = unit(g1 + (s - 2) * d + j)?;
        for node in layout.parity_group(s) {
            out.insert(node, Composition::with_unit(pad, e));
        }
    }
    Ok(out)
}
