//! In-process storage nodes, failure injection and the two-layer session
//! state machine.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base_pir::{PadBank, QueryVector};
use crate::config::SystemConfig;
use crate::finite_field::{ExtSymbol, PrimeField};
use crate::mds_storage::{encode_store, make_code, FileMatrix, FileStore, MdsCode, NodeStore, StoreError};
use crate::pir_decoder::{
    build_system, compute_cpop, decode_file, optimal_cpop, DecodeError, DecodeReport, RealizedSubquery, Response,
    Transcript,
};
use crate::robust_pir::{layer1_plan, layer2_plan, Subquery, UniversalParams};
use crate::PlanError;

/// Environment variable consulted for a default session seed.
pub const SEED_ENV: &str = "RPIR_SEED";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{requested} unresponsive nodes exceed the tolerated nu = {nu}")]
    CapacityExceeded { requested: usize, nu: usize },
    #[error("nodes {0:?} stopped responding during layer 2; session aborted")]
    LateFailure(Vec<usize>),
    #[error("illegal phase transition {from:?} -> {to:?}")]
    Phase { from: Phase, to: Phase },
    #[error("invalid failure model: {0}")]
    FailureModel(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Latency law of one node, in arbitrary time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Latency {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
}

impl Latency {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Latency::Constant { value } => value,
            Latency::Uniform { low, high } => low + (high - low) * rng.gen::<f64>(),
            Latency::Exponential { mean } => -mean * (1.0 - rng.gen::<f64>()).ln(),
        }
    }
}

/// How unresponsive nodes are chosen for a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureModel {
    /// Exactly these nodes stay silent.
    Fixed { nodes: Vec<usize> },
    /// A uniformly random count in `0..=max`, then a uniform subset of that size.
    RandomSubset { max: usize, seed: u64 },
    /// Nodes slower than `timeout` are cut; at most `cap` of them, slowest first.
    LatencyCutoff { latencies: Vec<Latency>, timeout: f64, cap: usize },
}

impl Default for FailureModel {
    fn default() -> Self {
        FailureModel::Fixed { nodes: vec![] }
    }
}

impl FailureModel {
    /// Draws the failure set for one session. The result may exceed `nu` only
    /// for [`FailureModel::Fixed`]; the caller turns that into a
    /// capacity-exceeded outcome.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, nu: usize, rng: &mut R) -> Result<BTreeSet<usize>, SessionError> {
        match self {
            FailureModel::Fixed { nodes } => {
                let set: BTreeSet<usize> = nodes.iter().copied().collect();
                if let Some(&bad) = set.iter().find(|&&x| x == 0 || x > n) {
                    return Err(SessionError::FailureModel(format!("node {bad} not in 1..={n}")));
                }
                Ok(set)
            }
            FailureModel::RandomSubset { max, seed } => {
                if *max > nu {
                    return Err(SessionError::FailureModel(format!("max {max} exceeds nu = {nu}")));
                }
                let mut own = ChaCha20Rng::seed_from_u64(*seed ^ rng.gen::<u64>());
                let count = own.gen_range(0..=*max);
                let mut nodes: Vec<usize> = (1..=n).collect();
                for i in 0..count {
                    let j = own.gen_range(i..n);
                    nodes.swap(i, j);
                }
                Ok(nodes[..count].iter().copied().collect())
            }
            FailureModel::LatencyCutoff { latencies, timeout, cap } => {
                if latencies.len() != n {
                    return Err(SessionError::FailureModel(format!("{} latency laws for {n} nodes", latencies.len())));
                }
                if *cap > nu {
                    return Err(SessionError::FailureModel(format!("cap {cap} exceeds nu = {nu}")));
                }
                let mut slow: Vec<(f64, usize)> = latencies
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.sample(rng), i + 1))
                    .filter(|(t, _)| *t > *timeout)
                    .collect();
                slow.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                Ok(slow.into_iter().take(*cap).map(|(_, x)| x).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Init,
    Layer1Sent,
    FailuresObserved,
    Layer2Sent,
    Decoded,
    Aborted,
}

/// Phase tracker; only forward moves are legal, and `Aborted` is reachable
/// from anywhere but `Decoded`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub history: Vec<Phase>,
}

impl Default for SessionState {
    fn default() -> Self {
        Self { phase: Phase::Init, history: vec![Phase::Init] }
    }
}

impl SessionState {
    pub fn advance(&mut self, to: Phase) -> Result<(), SessionError> {
        use Phase::*;
        let ok = matches!(
            (self.phase, to),
            (Init, Layer1Sent)
                | (Layer1Sent, FailuresObserved)
                | (FailuresObserved, Layer2Sent)
                | (FailuresObserved, Decoded)
                | (Layer2Sent, Decoded)
        ) || (to == Aborted && !matches!(self.phase, Decoded | Aborted));
        if !ok {
            return Err(SessionError::Phase { from: self.phase, to });
        }
        self.phase = to;
        self.history.push(to);
        Ok(())
    }
}

/// Answers a query by projecting the node's data onto it.
pub fn node_respond(field: PrimeField, store: &NodeStore, qv: &QueryVector) -> Result<ExtSymbol, StoreError> {
    store.project(field, &qv.coeffs)
}

/// Extra knobs for exercising unusual paths.
#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    /// Nodes that answer layer 1 but go silent during layer 2.
    pub late_failures: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub transcript: Transcript,
    pub decoded: FileMatrix,
    pub cpop: Ratio<u64>,
    pub state: SessionState,
    pub report: DecodeReport,
}

/// A simulated storage system: the code, the plaintext files (kept for
/// checking) and the encoded node contents.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SystemConfig,
    params: UniversalParams,
    code: MdsCode,
    store: FileStore,
    nodes: Vec<NodeStore>,
}

impl Simulator {
    pub fn new(code: MdsCode, store: FileStore, nu: usize) -> Result<Self, SessionError> {
        let config =
            SystemConfig { n: code.n(), k: code.k(), q: code.field().modulus(), ell: store.ell(), m: store.m(), nu };
        let params = config.validate()?;
        if store.alpha() != params.alpha || store.k() != code.k() {
            return Err(StoreError::FileShape {
                file: 1,
                expected: (code.k(), params.alpha),
                found: (store.k(), store.alpha()),
            }
            .into());
        }
        let nodes = encode_store(&store, &code)?;
        Ok(Self { config, params, code, store, nodes })
    }

    /// Random store for `config`, reproducible from `seed`.
    pub fn random(config: &SystemConfig, seed: u64) -> Result<Self, SessionError> {
        let params = config.validate()?;
        let code = make_code(config.n, config.k, config.q)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(7);
        let store = FileStore::random(code.field(), config.ell, config.k, params.alpha, config.m, &mut rng);
        Self::new(code, store, config.nu)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn params(&self) -> &UniversalParams {
        &self.params
    }

    pub fn code(&self) -> &MdsCode {
        &self.code
    }

    pub fn store(&self) -> &FileStore {
        &self.store
    }

    pub fn nodes(&self) -> &[NodeStore] {
        &self.nodes
    }

    fn dispatch(
        &self,
        subqueries: &[Subquery],
        pads: &PadBank,
        silent: &BTreeSet<usize>,
        transcript: &mut Transcript,
    ) -> Result<(), SessionError> {
        let field = self.code.field();
        let len = self.config.m * self.params.alpha;
        for sq in subqueries {
            let mut queries = BTreeMap::new();
            for (&node, comp) in &sq.assignments {
                queries.insert(node, QueryVector::realize(field, comp, pads, len)?);
            }
            // Nodes may answer in any order; answers are keyed, not positional.
            let answers: Vec<Response> = queries
                .par_iter()
                .filter(|(node, _)| !silent.contains(node))
                .map(|(&node, qv)| {
                    node_respond(field, &self.nodes[node - 1], qv).map(|value| Response {
                        subquery: sq.index,
                        node,
                        value,
                    })
                })
                .collect::<Result<_, _>>()?;
            transcript.responses.extend(answers);
            transcript.subqueries.push(RealizedSubquery {
                index: sq.index,
                layer: sq.layer,
                fresh_pad: sq.fresh_pad,
                queries,
            });
        }
        Ok(())
    }

    /// Runs one full retrieval of file `f`.
    pub fn run(&self, f: usize, model: &FailureModel, seed: u64) -> Result<SessionOutcome, SessionError> {
        self.run_with(f, model, seed, &SessionOptions::default())
    }

    pub fn run_with(
        &self,
        f: usize,
        model: &FailureModel,
        seed: u64,
        opts: &SessionOptions,
    ) -> Result<SessionOutcome, SessionError> {
        let mut state = SessionState::default();
        let result = self.drive(f, model, seed, opts, &mut state);
        if result.is_err() && state.phase != Phase::Aborted {
            // best effort; an aborted session keeps its history for diagnostics
            let _ = state.advance(Phase::Aborted);
        }
        result
    }

    fn drive(
        &self,
        f: usize,
        model: &FailureModel,
        seed: u64,
        opts: &SessionOptions,
        state: &mut SessionState,
    ) -> Result<SessionOutcome, SessionError> {
        let field = self.code.field();
        let len = self.config.m * self.params.alpha;
        let mut pad_rng = ChaCha20Rng::seed_from_u64(seed);
        let mut fail_rng = ChaCha20Rng::seed_from_u64(seed);
        fail_rng.set_stream(1);

        let layer1 = layer1_plan(f, self.config.m, &self.params)?;
        let mut pads = PadBank::random(field, layer1.len(), len, &mut pad_rng);
        let failed = model.draw(self.config.n, self.config.nu, &mut fail_rng)?;

        let mut transcript = Transcript {
            config: self.config.clone(),
            f,
            seed,
            failed: failed.iter().copied().collect(),
            subqueries: Vec::new(),
            responses: Vec::new(),
            downloaded: 0,
        };
        self.dispatch(&layer1, &pads, &failed, &mut transcript)?;
        state.advance(Phase::Layer1Sent)?;

        if failed.len() > self.config.nu {
            return Err(SessionError::CapacityExceeded { requested: failed.len(), nu: self.config.nu });
        }
        state.advance(Phase::FailuresObserved)?;

        if !failed.is_empty() {
            let layer2 = layer2_plan(f, self.config.m, &failed, &layer1, &self.params, &self.code)?;
            pads.extend_random(field, layer2.len(), len, &mut pad_rng);
            let late: Vec<usize> = opts.late_failures.difference(&failed).copied().collect();
            if !late.is_empty() {
                return Err(SessionError::LateFailure(late));
            }
            self.dispatch(&layer2, &pads, &failed, &mut transcript)?;
            state.advance(Phase::Layer2Sent)?;
        }

        transcript.downloaded = transcript.responses.len();
        let system = build_system(&transcript, &self.code, f)?;
        let decoded = decode_file(&system)?;
        let cpop = compute_cpop(&transcript)?;
        state.advance(Phase::Decoded)?;
        let report = DecodeReport::new(&system, &decoded, cpop, &transcript.failed);
        Ok(SessionOutcome { transcript, decoded, cpop, state: state.clone(), report })
    }
}

/// Session description as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(flatten)]
    pub system: SystemConfig,
    #[serde(default)]
    pub failure_model: FailureModel,
    #[serde(default)]
    pub seed: u64,
}

/// Runs one session on a random store derived from `config.seed`.
pub fn run_session(config: &SessionConfig, f: usize) -> Result<SessionOutcome, SessionError> {
    let sim = Simulator::random(&config.system, config.seed)?;
    sim.run(f, &config.failure_model, config.seed)
}

/// One line of a cPoP benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub nu: usize,
    pub i: usize,
    pub cpop_num: u64,
    pub cpop_den: u64,
    pub formula_num: u64,
    pub formula_den: u64,
    pub matched: bool,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "n,k,nu,i,cpop_num,cpop_den,formula_num,formula_den,match";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.k,
            self.nu,
            self.i,
            self.cpop_num,
            self.cpop_den,
            self.formula_num,
            self.formula_den,
            self.matched
        )
    }
}

/// Measures cPoP for every failure count `0..=ν` of each `(n, k, ν)`,
/// silencing the first `i` nodes, and compares with `n_i / (n_i − k)`.
pub fn bench_grid(grid: &[(usize, usize, usize)], m: usize, seed: u64) -> Result<Vec<BenchRow>, SessionError> {
    let jobs: Vec<(usize, usize, usize, usize)> =
        grid.iter().flat_map(|&(n, k, nu)| (0..=nu).map(move |i| (n, k, nu, i))).collect();
    jobs.par_iter()
        .map(|&(n, k, nu, i)| {
            let q = crate::mds_storage::smallest_field(n, k)?;
            let config = SystemConfig { n, k, q, ell: 1, m, nu };
            let sim = Simulator::random(&config, seed)?;
            let model = FailureModel::Fixed { nodes: (1..=i).collect() };
            let out = sim.run(1, &model, seed)?;
            if &out.decoded != sim.store().file(1) {
                return Err(DecodeError::Inconsistent(0).into());
            }
            let formula = optimal_cpop(n, k, i);
            Ok(BenchRow {
                n,
                k,
                nu,
                i,
                cpop_num: *out.cpop.numer(),
                cpop_den: *out.cpop.denom(),
                formula_num: *formula.numer(),
                formula_den: *formula.denom(),
                matched: out.cpop == formula,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_pir::Composition;
    use crate::robust_pir::Layer;

    fn cfg(n: usize, k: usize, q: u32, m: usize, nu: usize) -> SystemConfig {
        SystemConfig { n, k, q, ell: 1, m, nu }
    }

    fn fixed(nodes: &[usize]) -> FailureModel {
        FailureModel::Fixed { nodes: nodes.to_vec() }
    }

    #[test]
    fn respond_projects() {
        let f = PrimeField::new(5).unwrap();
        let store = NodeStore::new(1, vec![ExtSymbol::from_base(3, 1), ExtSymbol::from_base(4, 1)]);
        let qv = |c: Vec<u32>| QueryVector { coeffs: c, composition: Composition::default() };
        assert_eq!(node_respond(f, &store, &qv(vec![2, 1])).unwrap(), ExtSymbol::from_base(0, 1));
        assert!(node_respond(f, &store, &qv(vec![0, 0])).unwrap().is_zero());
        assert_eq!(node_respond(f, &store, &qv(vec![0, 1])).unwrap(), ExtSymbol::from_base(4, 1));
        assert!(node_respond(f, &store, &qv(vec![1])).is_err());
    }

    #[test]
    fn example_two_sessions() {
        let sim = Simulator::random(&cfg(5, 2, 5, 2, 2), 3).unwrap();
        for (failed, cpop, phases) in
            [(vec![], Ratio::new(5, 3), 4), (vec![1], Ratio::new(2, 1), 5), (vec![1, 3], Ratio::new(3, 1), 5)]
        {
            let out = sim.run(1, &fixed(&failed), 11).unwrap();
            assert_eq!(out.cpop, cpop);
            assert_eq!(&out.decoded, sim.store().file(1));
            assert_eq!(out.state.history.len(), phases);
            assert_eq!(out.state.phase, Phase::Decoded);
            let l2 = out.transcript.subqueries.iter().filter(|s| s.layer == Layer::Two).count();
            assert_eq!(l2, [0, 1, 4][failed.len()]);
            for s in out.transcript.subqueries.iter().filter(|s| s.layer == Layer::Two) {
                assert!(failed.iter().all(|x| !s.queries.contains_key(x)));
            }
        }
    }

    #[test]
    fn capacity_exceeded_is_an_outcome() {
        let sim = Simulator::random(&cfg(5, 2, 5, 1, 2), 3).unwrap();
        let err = sim.run(1, &fixed(&[1, 2, 3]), 0).unwrap_err();
        assert!(matches!(err, SessionError::CapacityExceeded { requested: 3, nu: 2 }));
    }

    #[test]
    fn late_failure_aborts() {
        let sim = Simulator::random(&cfg(5, 2, 5, 1, 2), 3).unwrap();
        let opts = SessionOptions { late_failures: [4].into_iter().collect() };
        let err = sim.run_with(1, &fixed(&[1]), 0, &opts).unwrap_err();
        assert!(matches!(err, SessionError::LateFailure(ref v) if v == &vec![4]));
    }

    #[test]
    fn deterministic_transcripts() {
        let sim = Simulator::random(&cfg(5, 2, 5, 2, 2), 1).unwrap();
        let model = FailureModel::RandomSubset { max: 2, seed: 9 };
        let a = sim.run(2, &model, 77).unwrap().transcript.to_json();
        let b = sim.run(2, &model, 77).unwrap().transcript.to_json();
        assert_eq!(a, b);
        let c = sim.run(2, &model, 78).unwrap().transcript.to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn transcript_roundtrips() {
        let sim = Simulator::random(&cfg(5, 2, 5, 2, 2), 1).unwrap();
        let t = sim.run(1, &fixed(&[2, 5]), 5).unwrap().transcript;
        let s = t.to_json();
        let back = Transcript::from_json(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn phase_machine_is_monotone() {
        let mut s = SessionState::default();
        assert!(s.advance(Phase::Layer2Sent).is_err());
        s.advance(Phase::Layer1Sent).unwrap();
        s.advance(Phase::FailuresObserved).unwrap();
        s.advance(Phase::Decoded).unwrap();
        assert!(s.advance(Phase::Aborted).is_err());
        assert!(s.advance(Phase::Layer1Sent).is_err());
    }

    #[test]
    fn latency_cutoff_truncates_to_slowest() {
        let lat = vec![
            Latency::Constant { value: 9.0 },
            Latency::Constant { value: 1.0 },
            Latency::Constant { value: 5.0 },
            Latency::Constant { value: 7.0 },
            Latency::Constant { value: 2.0 },
        ];
        let model = FailureModel::LatencyCutoff { latencies: lat, timeout: 3.0, cap: 2 };
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let got = model.draw(5, 2, &mut rng).unwrap();
        assert_eq!(got, [1, 4].into_iter().collect());
        let sim = Simulator::random(&cfg(5, 2, 5, 1, 2), 3).unwrap();
        let out = sim.run(1, &model, 0).unwrap();
        assert_eq!(out.transcript.failed, vec![1, 4]);
        assert_eq!(out.cpop, Ratio::new(3, 1));
    }

    #[test]
    fn random_subset_respects_bound() {
        let model = FailureModel::RandomSubset { max: 2, seed: 1 };
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut sizes = [0usize; 3];
        for _ in 0..300 {
            let s = model.draw(5, 2, &mut rng).unwrap();
            sizes[s.len()] += 1;
        }
        assert!(sizes.iter().all(|&c| c > 50), "{sizes:?}");
        assert!(FailureModel::RandomSubset { max: 3, seed: 1 }.draw(5, 2, &mut rng).is_err());
    }

    #[test]
    fn bench_rows_match_formula() {
        let rows = bench_grid(&[(4, 2, 1), (6, 3, 2)], 2, 1).unwrap();
        let got: Vec<_> = rows.iter().map(|r| (r.n, r.i, r.cpop_num, r.cpop_den, r.matched)).collect();
        assert_eq!(
            got,
            vec![(4, 0, 2, 1, true), (4, 1, 3, 1, true), (6, 0, 2, 1, true), (6, 1, 5, 2, true), (6, 2, 4, 1, true)]
        );
    }
}
