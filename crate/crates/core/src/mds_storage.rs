//! Systematic MDS storage: code construction, striped encoding of the file
//! store onto nodes, and plain erasure decoding.
//!
//! Every file is a `k × α` matrix of [`ExtSymbol`]s. Stripe `t` of file `x`
//! lands at position `(x−1)·α + t` (1-based) of every node's stored vector,
//! so node `i` holds `W_i[(x−1)α + t] = Σ_b G[b,i]·X_x[b,t]`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finite_field::{gaussian_solve, next_prime, ExtSymbol, FieldError, FieldMatrix, PrimeField};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid code parameters (n={n}, k={k}): need 1 <= k <= n")]
    InvalidParams { n: usize, k: usize },
    #[error("GF({q}) is too small for a systematic ({n},{k}) MDS code")]
    FieldTooSmall { n: usize, k: usize, q: u32 },
    #[error("generator is not systematic: column {0} differs from the identity")]
    NotSystematic(usize),
    #[error("generator is not MDS: columns {0:?} are dependent")]
    NotMds(Vec<usize>),
    #[error("generator has shape {found:?}, expected {expected:?}")]
    GeneratorShape { expected: (usize, usize), found: (usize, usize) },
    #[error("m ≥ 1 required")]
    NoFiles,
    #[error("file {file}: shape {found:?} does not match k x alpha = {expected:?}")]
    FileShape { file: usize, expected: (usize, usize), found: (usize, usize) },
    #[error("file {file}, block {block}, stripe {stripe}: symbol has {found} coordinates, expected ell = {ell}")]
    SymbolWidth { file: usize, block: usize, stripe: usize, ell: usize, found: usize },
    #[error("file {file}, block {block}, stripe {stripe}: {source}")]
    SymbolValue { file: usize, block: usize, stripe: usize, source: FieldError },
    #[error("header declares m = {declared} but {found} files are present")]
    FileCount { declared: usize, found: usize },
    #[error("need exactly k = {k} distinct node symbols, got {found}")]
    WrongSymbolCount { k: usize, found: usize },
    #[error("node {0} out of range or repeated")]
    BadNode(usize),
    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("malformed store file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Systematic `(n, k)` MDS code; column `i` of the generator is the encoding
/// vector of node `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdsCode {
    n: usize,
    k: usize,
    generator: FieldMatrix,
}

impl MdsCode {
    /// Wraps an explicit generator after checking it is systematic and MDS.
    pub fn from_generator(generator: FieldMatrix) -> Result<Self, StoreError> {
        let (k, n) = (generator.rows(), generator.cols());
        if k == 0 || k > n {
            return Err(StoreError::InvalidParams { n, k });
        }
        for c in 0..k {
            for r in 0..k {
                if generator.get(r, c) != u32::from(r == c) {
                    return Err(StoreError::NotSystematic(c));
                }
            }
        }
        if let Some(bad) = first_dependent_subset(&generator) {
            return Err(StoreError::NotMds(bad));
        }
        Ok(Self { n, k, generator })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> PrimeField {
        self.generator.field()
    }

    pub fn generator(&self) -> &FieldMatrix {
        &self.generator
    }

    /// `G[b, node]` with 0-based block `b` and 1-based `node`.
    #[inline]
    pub fn coeff(&self, block: usize, node: usize) -> u32 {
        self.generator.get(block, node - 1)
    }

    /// Encoding vector of 1-based `node`.
    pub fn encoding_vector(&self, node: usize) -> Vec<u32> {
        self.generator.column(node - 1)
    }

    pub fn is_mds(&self) -> bool {
        first_dependent_subset(&self.generator).is_none()
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn first_dependent_subset(g: &FieldMatrix) -> Option<Vec<usize>> {
    let k = g.rows();
    k_subsets(g.cols(), k).into_iter().find(|cols| g.select_columns(cols).rank() < k)
}

/// Builds a systematic `(n, k)` MDS code over GF(q).
///
/// Parity node `k + j` gets the Vandermonde column `(1, j, j², …, j^{k−1})ᵀ`
/// for `j = 1..=n−k`, which reproduces the familiar `A+B, A+2B, …` layouts.
/// When that extension is not MDS (possible for `k ≥ 3`), the generator
/// falls back to the Vandermonde matrix on points `0..n` brought to
/// systematic form.
pub fn make_code(n: usize, k: usize, q: u32) -> Result<MdsCode, StoreError> {
    if k == 0 || k > n {
        return Err(StoreError::InvalidParams { n, k });
    }
    let field = PrimeField::new(q)?;
    let r = n - k;
    if r as u64 >= q as u64 && k > 1 {
        // fewer than n−k distinct nonzero points; fallback needs q >= n too
        return Err(StoreError::FieldTooSmall { n, k, q });
    }
    let points: Vec<u32> = (1..=r as u32).collect();
    let parity = FieldMatrix::vandermonde(field, k, &points);
    let mut g = FieldMatrix::zeros(field, k, n);
    for b in 0..k {
        g.set(b, b, 1);
        for j in 0..r {
            g.set(b, k + j, parity.get(b, j));
        }
    }
    if first_dependent_subset(&g).is_none() {
        return Ok(MdsCode { n, k, generator: g });
    }
    if (n as u64) > q as u64 {
        return Err(StoreError::FieldTooSmall { n, k, q });
    }
    let all: Vec<u32> = (0..n as u32).collect();
    let v = FieldMatrix::vandermonde(field, k, &all);
    let left = v.select_columns(&(0..k).collect::<Vec<_>>());
    let sys = left.inverse()?.mul(&v)?;
    MdsCode::from_generator(sys)
}

/// Smallest prime for which [`make_code`] succeeds.
pub fn smallest_field(n: usize, k: usize) -> Result<u32, StoreError> {
    if k == 0 || k > n {
        return Err(StoreError::InvalidParams { n, k });
    }
    let mut q = next_prime(2);
    loop {
        if make_code(n, k, q).is_ok() {
            return Ok(q);
        }
        q = next_prime(q + 1);
    }
}

/// One file: `k × α` symbols, row-major (block, stripe).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileMatrix {
    k: usize,
    alpha: usize,
    symbols: Vec<ExtSymbol>,
}

impl FileMatrix {
    pub fn new(k: usize, alpha: usize, symbols: Vec<ExtSymbol>) -> Result<Self, StoreError> {
        if symbols.len() != k * alpha {
            return Err(StoreError::Length { expected: k * alpha, found: symbols.len() });
        }
        Ok(Self { k, alpha, symbols })
    }

    pub fn zero(k: usize, alpha: usize, ell: usize) -> Self {
        Self { k, alpha, symbols: vec![ExtSymbol::zero(ell); k * alpha] }
    }

    pub fn random<R: Rng + ?Sized>(field: PrimeField, k: usize, alpha: usize, ell: usize, rng: &mut R) -> Self {
        let symbols = (0..k * alpha).map(|_| ExtSymbol::random(field, ell, rng)).collect();
        Self { k, alpha, symbols }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    /// 0-based block and stripe.
    pub fn get(&self, block: usize, stripe: usize) -> &ExtSymbol {
        &self.symbols[block * self.alpha + stripe]
    }

    pub fn symbols(&self) -> &[ExtSymbol] {
        &self.symbols
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<u32>>> {
        (0..self.k).map(|b| (0..self.alpha).map(|t| self.get(b, t).coords().to_vec()).collect()).collect()
    }
}

/// The `m` files of the system, all sharing one shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileStore {
    field: PrimeField,
    ell: usize,
    k: usize,
    alpha: usize,
    files: Vec<FileMatrix>,
}

impl FileStore {
    pub fn new(field: PrimeField, ell: usize, files: Vec<FileMatrix>) -> Result<Self, StoreError> {
        let first = files.first().ok_or(StoreError::NoFiles)?;
        let (k, alpha) = (first.k, first.alpha);
        for (i, file) in files.iter().enumerate() {
            if (file.k, file.alpha) != (k, alpha) {
                return Err(StoreError::FileShape { file: i + 1, expected: (k, alpha), found: (file.k, file.alpha) });
            }
            for (idx, s) in file.symbols.iter().enumerate() {
                let (block, stripe) = (idx / alpha + 1, idx % alpha + 1);
                if s.ell() != ell {
                    return Err(StoreError::SymbolWidth { file: i + 1, block, stripe, ell, found: s.ell() });
                }
                for &c in s.coords() {
                    field.check(c).map_err(|source| StoreError::SymbolValue { file: i + 1, block, stripe, source })?;
                }
            }
        }
        Ok(Self { field, ell, k, alpha, files })
    }

    pub fn random<R: Rng + ?Sized>(
        field: PrimeField,
        ell: usize,
        k: usize,
        alpha: usize,
        m: usize,
        rng: &mut R,
    ) -> Self {
        let files = (0..m).map(|_| FileMatrix::random(field, k, alpha, ell, rng)).collect();
        Self { field, ell, k, alpha, files }
    }

    pub fn zero(field: PrimeField, ell: usize, k: usize, alpha: usize, m: usize) -> Self {
        Self { field, ell, k, alpha, files: vec![FileMatrix::zero(k, alpha, ell); m] }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn m(&self) -> usize {
        self.files.len()
    }

    /// 1-based file index.
    pub fn file(&self, f: usize) -> &FileMatrix {
        &self.files[f - 1]
    }

    pub fn files(&self) -> &[FileMatrix] {
        &self.files
    }

    /// Length-`mα` vector of block `b` (0-based) across all files and stripes.
    pub fn block_vector(&self, block: usize) -> Vec<ExtSymbol> {
        self.files.iter().flat_map(|file| (0..self.alpha).map(move |t| file.get(block, t).clone())).collect()
    }
}

/// The vector `W_i` held by one storage node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeStore {
    node: usize,
    data: Vec<ExtSymbol>,
}

impl NodeStore {
    pub fn new(node: usize, data: Vec<ExtSymbol>) -> Self {
        Self { node, data }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn data(&self) -> &[ExtSymbol] {
        &self.data
    }

    /// Inner product of a GF(q) query with the stored symbols.
    pub fn project(&self, field: PrimeField, coeffs: &[u32]) -> Result<ExtSymbol, StoreError> {
        if coeffs.len() != self.data.len() {
            return Err(StoreError::Length { expected: self.data.len(), found: coeffs.len() });
        }
        let ell = self.data.first().map_or(1, ExtSymbol::ell);
        let mut acc = ExtSymbol::zero(ell);
        for (&c, s) in coeffs.iter().zip(&self.data) {
            acc.add_scaled(field, c, s);
        }
        Ok(acc)
    }
}

/// Encodes every stripe of every file separately with the code's generator.
pub fn encode_store(files: &FileStore, code: &MdsCode) -> Result<Vec<NodeStore>, StoreError> {
    if files.k != code.k {
        return Err(StoreError::FileShape { file: 1, expected: (code.k, files.alpha), found: (files.k, files.alpha) });
    }
    if files.field != code.field() {
        return Err(FieldError::ModulusMismatch(files.field.modulus(), code.field().modulus()).into());
    }
    let f = code.field();
    let blocks: Vec<Vec<ExtSymbol>> = (0..code.k).map(|b| files.block_vector(b)).collect();
    let len = files.m() * files.alpha;
    Ok((1..=code.n)
        .map(|node| {
            let data = (0..len)
                .map(|pos| {
                    let mut acc = ExtSymbol::zero(files.ell);
                    for (b, block) in blocks.iter().enumerate() {
                        acc.add_scaled(f, code.coeff(b, node), &block[pos]);
                    }
                    acc
                })
                .collect();
            NodeStore::new(node, data)
        })
        .collect())
}

/// Recovers the `k` block symbols of one stripe position from any `k`
/// `(node, W_node[pos])` pairs.
pub fn erasure_reconstruct(code: &MdsCode, symbols: &[(usize, ExtSymbol)]) -> Result<Vec<ExtSymbol>, StoreError> {
    if symbols.len() != code.k {
        return Err(StoreError::WrongSymbolCount { k: code.k, found: symbols.len() });
    }
    let mut seen = vec![false; code.n + 1];
    for &(node, _) in symbols {
        if node == 0 || node > code.n || seen[node] {
            return Err(StoreError::BadNode(node));
        }
        seen[node] = true;
    }
    let f = code.field();
    let rows = symbols.iter().map(|(node, _)| code.encoding_vector(*node)).collect();
    let a = FieldMatrix::from_rows(f, rows)?;
    let y: Vec<ExtSymbol> = symbols.iter().map(|(_, s)| s.clone()).collect();
    let sol = gaussian_solve(&a, &y)?;
    if !sol.is_unique() {
        return Err(FieldError::Singular.into());
    }
    Ok(sol.particular)
}

/// On-disk store container. Field coordinates are plain integers; `files`
/// is indexed `[file][block][stripe][coordinate]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreFile {
    pub q: u32,
    pub ell: usize,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: usize,
    /// Robustness level the striping was chosen for, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    pub generator: Vec<Vec<u32>>,
    pub files: Vec<Vec<Vec<Vec<u32>>>>,
}

impl StoreFile {
    pub fn from_parts(code: &MdsCode, files: &FileStore, nu: Option<usize>) -> Self {
        Self {
            q: code.field().modulus(),
            ell: files.ell,
            n: code.n,
            k: code.k,
            m: files.m(),
            alpha: files.alpha,
            nu,
            generator: code.generator.to_rows(),
            files: files.files.iter().map(FileMatrix::to_nested).collect(),
        }
    }

    /// Validates every invariant and returns the typed code and store.
    pub fn into_parts(&self) -> Result<(MdsCode, FileStore), StoreError> {
        let field = PrimeField::new(self.q)?;
        if self.k == 0 || self.k > self.n {
            return Err(StoreError::InvalidParams { n: self.n, k: self.k });
        }
        let found = (self.generator.len(), self.generator.first().map_or(0, Vec::len));
        if found != (self.k, self.n) {
            return Err(StoreError::GeneratorShape { expected: (self.k, self.n), found });
        }
        let code = MdsCode::from_generator(FieldMatrix::from_rows(field, self.generator.clone())?)?;
        if self.files.is_empty() {
            return Err(StoreError::NoFiles);
        }
        if self.files.len() != self.m {
            return Err(StoreError::FileCount { declared: self.m, found: self.files.len() });
        }
        let files = parse_files(field, self.ell, self.k, self.alpha, &self.files)?;
        Ok((code, FileStore::new(field, self.ell, files)?))
    }
}

/// Turns nested integer arrays into file matrices, naming the first file
/// that does not have shape `k × α`.
pub fn parse_files(
    field: PrimeField,
    ell: usize,
    k: usize,
    alpha: usize,
    raw: &[Vec<Vec<Vec<u32>>>],
) -> Result<Vec<FileMatrix>, StoreError> {
    if raw.is_empty() {
        return Err(StoreError::NoFiles);
    }
    raw.iter()
        .enumerate()
        .map(|(i, file)| {
            let file_no = i + 1;
            let rows = file.len();
            let cols = file.first().map_or(0, Vec::len);
            if rows != k || file.iter().any(|row| row.len() != alpha) {
                return Err(StoreError::FileShape { file: file_no, expected: (k, alpha), found: (rows, cols) });
            }
            let mut symbols = Vec::with_capacity(k * alpha);
            for (b, row) in file.iter().enumerate() {
                for (t, coords) in row.iter().enumerate() {
                    if coords.len() != ell {
                        return Err(StoreError::SymbolWidth {
                            file: file_no,
                            block: b + 1,
                            stripe: t + 1,
                            ell,
                            found: coords.len(),
                        });
                    }
                    let s = ExtSymbol::from_coords(field, coords.clone()).map_err(|source| {
                        StoreError::SymbolValue { file: file_no, block: b + 1, stripe: t + 1, source }
                    })?;
                    symbols.push(s);
                }
            }
            FileMatrix::new(k, alpha, symbols)
        })
        .collect()
}
