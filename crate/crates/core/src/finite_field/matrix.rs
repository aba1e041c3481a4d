use std::fmt;

use rand::Rng;

use super::{ExtSymbol, FieldError, PrimeField};

/// Dense row-major matrix over a prime field.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl FieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(field: PrimeField, rows: Vec<Vec<u32>>) -> Result<Self, FieldError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != c {
                return Err(FieldError::Ragged { row: i, expected: c, found: row.len() });
            }
            for v in row {
                data.push(field.check(v)?);
            }
        }
        Ok(Self { field, rows: r, cols: c, data })
    }

    /// `rows × points.len()` Vandermonde matrix, entry `(b, j) = points[j]^b`.
    pub fn vandermonde(field: PrimeField, rows: usize, points: &[u32]) -> Self {
        let mut m = Self::zeros(field, rows, points.len());
        for (j, &x) in points.iter().enumerate() {
            let mut p = 1 % field.modulus();
            for b in 0..rows {
                m.set(b, j, p);
                p = field.mul(p, x % field.modulus());
            }
        }
        m
    }

    pub fn random<R: Rng + ?Sized>(field: PrimeField, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(0..field.modulus())).collect();
        Self { field, rows, cols, data }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        debug_assert!(v < self.field.modulus());
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut m = Self::zeros(self.field, self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                m.set(r, j, self.get(r, c));
            }
        }
        m
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, FieldError> {
        if self.field != rhs.field {
            return Err(FieldError::ModulusMismatch(self.field.modulus(), rhs.field.modulus()));
        }
        if self.cols != rhs.rows {
            return Err(FieldError::DimensionMismatch { left: (self.rows, self.cols), right: (rhs.rows, rhs.cols) });
        }
        let f = self.field;
        let mut out = Self::zeros(f, self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = f.add(out.get(i, j), f.mul(a, rhs.get(l, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        rref(&mut work, None).len()
    }

    pub fn inverse(&self) -> Result<Self, FieldError> {
        if self.rows != self.cols {
            return Err(FieldError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let f = self.field;
        let mut aug = Self::zeros(f, n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, n + r, 1);
        }
        let pivots = rref(&mut aug, None);
        if pivots.len() < n || pivots.iter().enumerate().any(|(i, &p)| p != i) {
            return Err(FieldError::Singular);
        }
        let mut inv = Self::zeros(f, n, n);
        for r in 0..n {
            for c in 0..n {
                inv.set(r, c, aug.get(r, n + c));
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FieldMatrix {}x{} over {}", self.rows, self.cols, self.field)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

/// In-place reduced row-echelon form. Pivot search takes the first nonzero
/// entry at or below the current row; columns are scanned left to right.
/// Returns the pivot column of each nonzero row, in row order.
fn rref(m: &mut FieldMatrix, mut rhs: Option<&mut [ExtSymbol]>) -> Vec<usize> {
    let f = m.field;
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m.cols {
        if row == m.rows {
            break;
        }
        let Some(p) = (row..m.rows).find(|&r| m.get(r, col) != 0) else {
            continue;
        };
        m.swap_rows(row, p);
        if let Some(y) = rhs.as_deref_mut() {
            y.swap(row, p);
        }
        let inv = f.inv(m.get(row, col)).expect("pivot is nonzero");
        if inv != 1 {
            for c in col..m.cols {
                let v = f.mul(m.get(row, c), inv);
                m.set(row, c, v);
            }
            if let Some(y) = rhs.as_deref_mut() {
                y[row] = y[row].scale(f, inv);
            }
        }
        for r in 0..m.rows {
            if r == row {
                continue;
            }
            let factor = m.get(r, col);
            if factor == 0 {
                continue;
            }
            let neg = f.neg(factor);
            for c in col..m.cols {
                let v = f.add(m.get(r, c), f.mul(neg, m.get(row, c)));
                m.set(r, c, v);
            }
            if let Some(y) = rhs.as_deref_mut() {
                let pivot_rhs = y[row].clone();
                y[r].add_scaled(f, neg, &pivot_rhs);
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Outcome of [`gaussian_solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub rank: usize,
    /// Pivot columns in row order of the reduced system.
    pub pivots: Vec<usize>,
    pub free: Vec<usize>,
    /// `Some(x)` for unknowns pinned regardless of the free variables.
    pub determined: Vec<Option<ExtSymbol>>,
    /// One solution, taking every free variable to be zero.
    pub particular: Vec<ExtSymbol>,
}

impl Solution {
    pub fn is_unique(&self) -> bool {
        self.free.is_empty()
    }

    pub fn value(&self, unknown: usize) -> Option<&ExtSymbol> {
        self.determined[unknown].as_ref()
    }
}

/// Solves `A x = y` where `y` holds extension symbols; elimination runs once on
/// `A` and is applied to all ℓ coordinates of the right-hand side.
pub fn gaussian_solve(a: &FieldMatrix, y: &[ExtSymbol]) -> Result<Solution, FieldError> {
    if y.len() != a.rows {
        return Err(FieldError::DimensionMismatch { left: (a.rows, a.cols), right: (y.len(), 1) });
    }
    let f = a.field;
    let ell = y.first().map_or(1, ExtSymbol::ell);
    if let Some(bad) = y.iter().find(|s| s.ell() != ell) {
        return Err(FieldError::DimensionMismatch { left: (a.rows, ell), right: (1, bad.ell()) });
    }
    for s in y {
        for &c in s.coords() {
            f.check(c)?;
        }
    }
    let mut work = a.clone();
    let mut rhs = y.to_vec();
    let pivots = rref(&mut work, Some(&mut rhs));
    let rank = pivots.len();
    if let Some(r) = (rank..work.rows).find(|&r| !rhs[r].is_zero()) {
        return Err(FieldError::Inconsistent { row: r });
    }
    let mut is_pivot = vec![false; a.cols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..a.cols).filter(|&c| !is_pivot[c]).collect();
    let mut particular = vec![ExtSymbol::zero(ell); a.cols];
    let mut determined = vec![None; a.cols];
    for (r, &p) in pivots.iter().enumerate() {
        particular[p] = rhs[r].clone();
        if free.iter().all(|&c| work.get(r, c) == 0) {
            determined[p] = Some(rhs[r].clone());
        }
    }
    Ok(Solution { rank, pivots, free, determined, particular })
}

/// Rank of `a` over its field.
pub fn rank(a: &FieldMatrix) -> usize {
    a.rank()
}

/// Which unknowns of `A x = y` are uniquely determined, independent of `y`.
pub fn determined_unknowns(a: &FieldMatrix) -> Vec<bool> {
    let mut work = a.clone();
    let pivots = rref(&mut work, None);
    let mut is_pivot = vec![false; a.cols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..a.cols).filter(|&c| !is_pivot[c]).collect();
    let mut out = vec![false; a.cols];
    for (r, &p) in pivots.iter().enumerate() {
        out[p] = free.iter().all(|&c| work.get(r, c) == 0);
    }
    out
}
