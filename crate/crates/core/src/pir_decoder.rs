//! Turns a retrieval transcript into a linear system over GF(q) and solves it.
//!
//! The response of node `x` to a query made of pads `P` and units `E` is
//!
//! ```text
//! Σ_{p∈P} Σ_b G[b,x]·I_b(p)  +  Σ_{e∈E} Σ_b G[b,x]·X_f[b, t(e)]
//! ```
//!
//! where `I_b(p) = pᵀ·Block_b` is the interference of pad `p` on block `b`.
//! Unknowns are ordered file symbols first (block-major), then interference
//! grouped by pad with blocks inner.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base_pir::{Composition, QueryVector};
use crate::config::SystemConfig;
use crate::finite_field::{determined_unknowns, gaussian_solve, ExtSymbol, FieldError, FieldMatrix};
use crate::mds_storage::{FileMatrix, MdsCode};
use crate::robust_pir::{universal_params, Layer, Subquery, UniversalParams};
use crate::PlanError;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("node {node} is marked unresponsive but answered subquery {subquery}")]
    ResponseFromFailedNode { subquery: usize, node: usize },
    #[error("no response from node {node} to subquery {subquery}")]
    MissingResponse { subquery: usize, node: usize },
    #[error("response from node {node} to subquery {subquery}, which never queried it")]
    UnsolicitedResponse { subquery: usize, node: usize },
    #[error("duplicate response from node {node} to subquery {subquery}")]
    DuplicateResponse { subquery: usize, node: usize },
    #[error("query to node {node} in subquery {subquery} touches unit {unit} outside file {f}")]
    UnitOutsideFile { subquery: usize, node: usize, unit: usize, f: usize },
    #[error("query references pad {0}, which the session never created")]
    UnknownPad(usize),
    #[error("file symbol X[{block},{stripe}] is not determined by the responses")]
    Underdetermined { block: usize, stripe: usize },
    #[error("responses are inconsistent (equation {0}); a node answered incorrectly")]
    Inconsistent(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// One unknown of the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unknown {
    /// 0-based block and stripe of the requested file.
    File { block: usize, stripe: usize },
    /// Interference of 1-based pad `pad` on 0-based block `block`.
    Interference { block: usize, pad: usize },
}

struct Columns {
    k: usize,
    alpha: usize,
    pads: usize,
}

impl Columns {
    fn count(&self) -> usize {
        self.k * self.alpha + self.k * self.pads
    }

    fn file(&self, block: usize, stripe: usize) -> usize {
        block * self.alpha + stripe
    }

    fn pad(&self, block: usize, pad: usize) -> usize {
        self.k * self.alpha + (pad - 1) * self.k + block
    }

    fn unknowns(&self) -> Vec<Unknown> {
        let mut v = Vec::with_capacity(self.count());
        for block in 0..self.k {
            for stripe in 0..self.alpha {
                v.push(Unknown::File { block, stripe });
            }
        }
        for pad in 1..=self.pads {
            for block in 0..self.k {
                v.push(Unknown::Interference { block, pad });
            }
        }
        v
    }
}

fn equation_row(
    code: &MdsCode,
    cols: &Columns,
    f: usize,
    subquery: usize,
    node: usize,
    comp: &Composition,
) -> Result<Vec<u32>, DecodeError> {
    let field = code.field();
    let mut row = vec![0u32; cols.count()];
    for &p in &comp.pads {
        if p == 0 || p > cols.pads {
            return Err(DecodeError::UnknownPad(p));
        }
        for b in 0..cols.k {
            let c = cols.pad(b, p);
            row[c] = field.add(row[c], code.coeff(b, node));
        }
    }
    let lo = (f - 1) * cols.alpha;
    for &unit in &comp.units {
        if unit <= lo || unit > lo + cols.alpha {
            return Err(DecodeError::UnitOutsideFile { subquery, node, unit, f });
        }
        let t = unit - lo - 1;
        for b in 0..cols.k {
            let c = cols.file(b, t);
            row[c] = field.add(row[c], code.coeff(b, node));
        }
    }
    Ok(row)
}

/// Checks, without any pad values or responses, that the answers `plan`
/// would collect determine every symbol of file `f`.
pub fn structurally_decodable(
    code: &MdsCode,
    params: &UniversalParams,
    f: usize,
    _m: usize,
    failed: &BTreeSet<usize>,
    layer1: &[Subquery],
    layer2: &[Subquery],
) -> Result<bool, DecodeError> {
    let pads = layer1.len() + layer2.len();
    let cols = Columns { k: params.k, alpha: params.alpha, pads };
    let mut rows = Vec::new();
    for sq in layer1.iter().chain(layer2) {
        for (&node, comp) in &sq.assignments {
            if failed.contains(&node) {
                continue;
            }
            rows.push(equation_row(code, &cols, f, sq.index, node, comp)?);
        }
    }
    let a = FieldMatrix::from_rows(code.field(), rows)?;
    let det = determined_unknowns(&a);
    Ok(det.iter().take(params.k * params.alpha).all(|&d| d))
}

/// A linear system in file symbols and interference unknowns.
#[derive(Debug, Clone)]
pub struct EquationSystem {
    pub f: usize,
    pub k: usize,
    pub alpha: usize,
    pub unknowns: Vec<Unknown>,
    pub matrix: FieldMatrix,
    pub rhs: Vec<ExtSymbol>,
    /// `(subquery, node)` behind each equation.
    pub sources: Vec<(usize, usize)>,
}

impl EquationSystem {
    pub fn equations(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedSubquery {
    pub index: usize,
    pub layer: Layer,
    pub fresh_pad: usize,
    pub queries: BTreeMap<usize, QueryVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub subquery: usize,
    pub node: usize,
    pub value: ExtSymbol,
}

/// Everything the user sent and received during one retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: SystemConfig,
    pub f: usize,
    pub seed: u64,
    pub failed: Vec<usize>,
    pub subqueries: Vec<RealizedSubquery>,
    pub responses: Vec<Response>,
    pub downloaded: usize,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// One equation per received response.
pub fn build_system(transcript: &Transcript, code: &MdsCode, f: usize) -> Result<EquationSystem, DecodeError> {
    let cfg = &transcript.config;
    let params = universal_params(cfg.n, cfg.k, cfg.nu)?;
    let failed: BTreeSet<usize> = transcript.failed.iter().copied().collect();
    let cols = Columns { k: cfg.k, alpha: params.alpha, pads: transcript.subqueries.len() };
    let by_index: BTreeMap<usize, &RealizedSubquery> = transcript.subqueries.iter().map(|s| (s.index, s)).collect();

    let mut seen = BTreeSet::new();
    let mut rows = Vec::with_capacity(transcript.responses.len());
    let mut rhs = Vec::with_capacity(transcript.responses.len());
    let mut sources = Vec::with_capacity(transcript.responses.len());
    let mut ordered: Vec<&Response> = transcript.responses.iter().collect();
    ordered.sort_by_key(|r| (r.subquery, r.node));
    for r in ordered {
        let (subquery, node) = (r.subquery, r.node);
        if failed.contains(&node) {
            return Err(DecodeError::ResponseFromFailedNode { subquery, node });
        }
        let qv = by_index
            .get(&subquery)
            .and_then(|s| s.queries.get(&node))
            .ok_or(DecodeError::UnsolicitedResponse { subquery, node })?;
        if !seen.insert((subquery, node)) {
            return Err(DecodeError::DuplicateResponse { subquery, node });
        }
        rows.push(equation_row(code, &cols, f, subquery, node, &qv.composition)?);
        rhs.push(r.value.clone());
        sources.push((subquery, node));
    }
    for s in &transcript.subqueries {
        for &node in s.queries.keys() {
            if !failed.contains(&node) && !seen.contains(&(s.index, node)) {
                return Err(DecodeError::MissingResponse { subquery: s.index, node });
            }
        }
    }
    let matrix = if rows.is_empty() {
        FieldMatrix::zeros(code.field(), 0, cols.count())
    } else {
        FieldMatrix::from_rows(code.field(), rows)?
    };
    Ok(EquationSystem { f, k: cfg.k, alpha: params.alpha, unknowns: cols.unknowns(), matrix, rhs, sources })
}

/// Solves the system and reads off the requested file.
pub fn decode_file(system: &EquationSystem) -> Result<FileMatrix, DecodeError> {
    let sol = gaussian_solve(&system.matrix, &system.rhs).map_err(|e| match e {
        FieldError::Inconsistent { row } => DecodeError::Inconsistent(row),
        other => DecodeError::Field(other),
    })?;
    let mut symbols = Vec::with_capacity(system.k * system.alpha);
    for block in 0..system.k {
        for stripe in 0..system.alpha {
            let v = sol
                .value(block * system.alpha + stripe)
                .ok_or(DecodeError::Underdetermined { block: block + 1, stripe: stripe + 1 })?;
            symbols.push(v.clone());
        }
    }
    Ok(FileMatrix::new(system.k, system.alpha, symbols).expect("k·α symbols"))
}

/// Downloaded symbols divided by file symbols.
pub fn compute_cpop(transcript: &Transcript) -> Result<Ratio<u64>, DecodeError> {
    let cfg = &transcript.config;
    let params = universal_params(cfg.n, cfg.k, cfg.nu)?;
    Ok(Ratio::new(transcript.responses.len() as u64, (cfg.k * params.alpha) as u64))
}

/// `n_i / (n_i − k)` for `i` unresponsive nodes.
pub fn optimal_cpop(n: usize, k: usize, i: usize) -> Ratio<u64> {
    let n_i = (n - i) as u64;
    Ratio::new(n_i, n_i - k as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub f: usize,
    pub decoded_file: Vec<Vec<Vec<u32>>>,
    pub cpop_num: u64,
    pub cpop_den: u64,
    pub equations_used: usize,
    pub failure_set: Vec<usize>,
}

impl DecodeReport {
    pub fn new(system: &EquationSystem, file: &FileMatrix, cpop: Ratio<u64>, failed: &[usize]) -> Self {
        Self {
            f: system.f,
            decoded_file: file.to_nested(),
            cpop_num: *cpop.numer(),
            cpop_den: *cpop.denom(),
            equations_used: system.equations(),
            failure_set: failed.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_pir::PadBank;
    use crate::finite_field::PrimeField;
    use crate::mds_storage::{encode_store, make_code, FileStore, NodeStore};
    use crate::robust_pir::SessionPlan;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        code: MdsCode,
        store: FileStore,
        nodes: Vec<NodeStore>,
        cfg: SystemConfig,
    }

    fn fixture(n: usize, k: usize, q: u32, m: usize, nu: usize, seed: u64) -> Fixture {
        let code = make_code(n, k, q).unwrap();
        let alpha = universal_params(n, k, nu).unwrap().alpha;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let store = FileStore::random(code.field(), 1, k, alpha, m, &mut rng);
        let nodes = encode_store(&store, &code).unwrap();
        let cfg = SystemConfig { n, k, q, ell: 1, m, nu };
        Fixture { code, store, nodes, cfg }
    }

    fn transcript(fx: &Fixture, f: usize, failed: &[usize], pads: &PadBank) -> Transcript {
        let params = universal_params(fx.cfg.n, fx.cfg.k, fx.cfg.nu).unwrap();
        let failed_set: BTreeSet<usize> = failed.iter().copied().collect();
        let plan = SessionPlan::build(&fx.code, &params, fx.cfg.m, f, &failed_set).unwrap();
        let field = fx.code.field();
        let mut subqueries = Vec::new();
        let mut responses = Vec::new();
        for sq in plan.subqueries() {
            let mut queries = BTreeMap::new();
            for (&node, comp) in &sq.assignments {
                let qv = QueryVector::realize(field, comp, pads, plan.query_len()).unwrap();
                if !failed_set.contains(&node) {
                    let value = fx.nodes[node - 1].project(field, &qv.coeffs).unwrap();
                    responses.push(Response { subquery: sq.index, node, value });
                }
                queries.insert(node, qv);
            }
            subqueries.push(RealizedSubquery { index: sq.index, layer: sq.layer, fresh_pad: sq.fresh_pad, queries });
        }
        let downloaded = responses.len();
        Transcript { config: fx.cfg.clone(), f, seed: 0, failed: failed.to_vec(), subqueries, responses, downloaded }
    }

    #[test]
    fn example_one_equations() {
        let fx = fixture(4, 2, 3, 2, 1, 3);
        let field = fx.code.field();
        let pads = PadBank::new(vec![vec![1, 2], vec![0, 1]]);
        let t = transcript(&fx, 2, &[], &pads);
        let sys = build_system(&t, &fx.code, 2).unwrap();
        // node 3: I_A(u) + I_B(u) + a_f + b_f ; node 2: I_B(u)
        let row3 = sys.sources.iter().position(|&s| s == (1, 3)).unwrap();
        assert_eq!(sys.matrix.row(row3), &[1, 1, 1, 1]);
        let row2 = sys.sources.iter().position(|&s| s == (1, 2)).unwrap();
        assert_eq!(sys.matrix.row(row2), &[0, 0, 0, 1]);
        // I_B(u) = uᵀB
        let blk_b = NodeStore::new(0, fx.store.block_vector(1));
        assert_eq!(sys.rhs[row2], blk_b.project(field, pads.get(1).unwrap()).unwrap());
        let file = decode_file(&sys).unwrap();
        assert_eq!(&file, fx.store.file(2));
        assert_eq!(compute_cpop(&t).unwrap(), Ratio::new(2, 1));
    }

    #[test]
    fn zero_store_gives_zero_rhs() {
        let code = make_code(5, 2, 5).unwrap();
        let field = code.field();
        let store = FileStore::zero(field, 1, 2, 3, 2);
        let nodes = encode_store(&store, &code).unwrap();
        let fx = Fixture { code, store, nodes, cfg: SystemConfig { n: 5, k: 2, q: 5, ell: 1, m: 2, nu: 2 } };
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let pads = PadBank::random(field, 6, 6, &mut rng);
        let t = transcript(&fx, 1, &[2, 4], &pads);
        let sys = build_system(&t, &fx.code, 1).unwrap();
        assert!(sys.rhs.iter().all(ExtSymbol::is_zero));
    }

    #[test]
    fn five_two_decodes_and_cpop() {
        let fx = fixture(5, 2, 5, 3, 2, 9);
        let field = fx.code.field();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let pads = PadBank::random(field, 6, 9, &mut rng);
        for (failed, cpop) in [(vec![], Ratio::new(5, 3)), (vec![1], Ratio::new(2, 1)), (vec![1, 3], Ratio::new(3, 1))]
        {
            let t = transcript(&fx, 2, &failed, &pads);
            let sys = build_system(&t, &fx.code, 2).unwrap();
            assert_eq!(&decode_file(&sys).unwrap(), fx.store.file(2));
            assert_eq!(compute_cpop(&t).unwrap(), cpop);
            assert_eq!(sys.equations(), sys.unknowns.len());
        }
    }

    #[test]
    fn protocol_violations_rejected() {
        let fx = fixture(5, 2, 5, 1, 2, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let pads = PadBank::random(fx.code.field(), 3, 3, &mut rng);
        let mut t = transcript(&fx, 1, &[1], &pads);
        let good = t.clone();
        t.responses.push(Response { subquery: 1, node: 1, value: ExtSymbol::zero(1) });
        assert!(matches!(build_system(&t, &fx.code, 1), Err(DecodeError::ResponseFromFailedNode { .. })));
        let mut t = good.clone();
        t.responses.pop();
        assert!(matches!(build_system(&t, &fx.code, 1), Err(DecodeError::MissingResponse { .. })));
        let mut t = good.clone();
        let dup = t.responses[0].clone();
        t.responses.push(dup);
        assert!(matches!(build_system(&t, &fx.code, 1), Err(DecodeError::DuplicateResponse { .. })));
    }

    #[test]
    fn corrupted_response_is_inconsistent() {
        let fx = fixture(5, 2, 5, 1, 2, 4);
        let field = fx.code.field();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let pads = PadBank::random(field, 2, 3, &mut rng);
        let mut t = transcript(&fx, 1, &[], &pads);
        // square full-rank system: any tampering still solves, just wrongly
        let sys = build_system(&t, &fx.code, 1).unwrap();
        assert_eq!(sys.matrix.rank(), sys.unknowns.len());
        // add a redundant equation from a third party to expose the lie
        t.responses[0].value = t.responses[0].value.add(field, &ExtSymbol::from_base(1, 1));
        let mut sys = build_system(&t, &fx.code, 1).unwrap();
        let honest = build_system(&transcript(&fx, 1, &[], &pads), &fx.code, 1).unwrap();
        let mut rows = sys.matrix.to_rows();
        rows.push(honest.matrix.row(0).to_vec());
        sys.matrix = FieldMatrix::from_rows(field, rows).unwrap();
        sys.rhs.push(honest.rhs[0].clone());
        sys.sources.push((0, 0));
        assert!(matches!(decode_file(&sys), Err(DecodeError::Inconsistent(_))));
    }

    #[test]
    fn decode_reports_missing_equations() {
        let fx = fixture(4, 2, 3, 2, 1, 8);
        let pads = PadBank::new(vec![vec![1, 1]]);
        let t = transcript(&fx, 1, &[], &pads);
        let mut sys = build_system(&t, &fx.code, 1).unwrap();
        let keep: Vec<Vec<u32>> = sys.matrix.to_rows().into_iter().take(3).collect();
        sys.matrix = FieldMatrix::from_rows(PrimeField::new(3).unwrap(), keep).unwrap();
        sys.rhs.truncate(3);
        assert!(matches!(decode_file(&sys), Err(DecodeError::Underdetermined { .. })));
    }

    #[test]
    fn optimal_cpop_values() {
        assert_eq!(optimal_cpop(5, 2, 0), Ratio::new(5, 3));
        assert_eq!(optimal_cpop(5, 2, 1), Ratio::new(2, 1));
        assert_eq!(optimal_cpop(5, 2, 2), Ratio::new(3, 1));
    }
}
