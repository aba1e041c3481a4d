//! Universal ν-robust retrieval.
//!
//! Layer 1 runs `α/α_0` copies of the base scheme over the full set of `n`
//! nodes. Once the set `U` of unresponsive nodes is known, every query `U`
//! failed to answer becomes a [`MissingPart`], and layer 2 asks the `n_i`
//! responsive nodes for substitutes, `n_i − k` per subquery, each hidden
//! behind a fresh pad that `k` other nodes receive in the clear so its
//! interference can be cancelled.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::base_pir::{base_params, base_subquery, group_layout, lcm, Composition, PadBank};
use crate::finite_field::PrimeField;
use crate::mds_storage::MdsCode;
use crate::pir_decoder::structurally_decodable;
use crate::PlanError;

/// Parameters of the scheme for one number `i` of unresponsive nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelParams {
    pub i: usize,
    pub n_i: usize,
    pub alpha_i: usize,
    pub d_prime_i: usize,
    pub d_i: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniversalParams {
    pub n: usize,
    pub k: usize,
    pub nu: usize,
    pub alpha: usize,
    pub levels: Vec<LevelParams>,
}

impl UniversalParams {
    /// Number of subqueries when `i` nodes are unresponsive.
    pub fn d(&self, i: usize) -> usize {
        self.levels[i].d_i
    }

    pub fn d_list(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.d_i).collect()
    }

    pub fn level(&self, i: usize) -> &LevelParams {
        &self.levels[i]
    }
}

pub fn universal_params(n: usize, k: usize, nu: usize) -> Result<UniversalParams, PlanError> {
    if k == 0 || k >= n {
        return Err(PlanError::InvalidCode { n, k });
    }
    if nu + k >= n {
        return Err(PlanError::NuTooLarge { nu, max: n - k - 1 });
    }
    let mut levels = Vec::with_capacity(nu + 1);
    let mut alpha = 1;
    for i in 0..=nu {
        let bp = base_params(n - i, k)?;
        alpha = lcm(alpha, bp.alpha_prime);
        levels.push(LevelParams { i, n_i: n - i, alpha_i: bp.alpha_prime, d_prime_i: bp.d_prime, d_i: 0 });
    }
    for l in &mut levels {
        l.d_i = l.d_prime_i * (alpha / l.alpha_i);
    }
    Ok(UniversalParams { n, k, nu, alpha, levels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    One,
    Two,
}

/// One round of queries. Nodes absent from `assignments` are not queried.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subquery {
    pub index: usize,
    pub layer: Layer,
    pub fresh_pad: usize,
    pub assignments: BTreeMap<usize, Composition>,
}

/// A layer-1 answer lost to an unresponsive node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MissingPart {
    /// The lost query carried unit `unit` (a file-stripe position) under `pad`.
    Case1 { unit: usize, pad: usize, node: usize },
    /// The lost query was the bare pad.
    Case2 { pad: usize, node: usize },
}

impl MissingPart {
    pub fn node(&self) -> usize {
        match *self {
            MissingPart::Case1 { node, .. } | MissingPart::Case2 { node, .. } => node,
        }
    }

    pub fn pad(&self) -> usize {
        match *self {
            MissingPart::Case1 { pad, .. } | MissingPart::Case2 { pad, .. } => pad,
        }
    }

    pub fn is_case1(&self) -> bool {
        matches!(self, MissingPart::Case1 { .. })
    }
}

/// Layer-1 subqueries for file `f` out of `m`.
pub fn layer1_plan(f: usize, m: usize, params: &UniversalParams) -> Result<Vec<Subquery>, PlanError> {
    if f == 0 || f > m {
        return Err(PlanError::FileIndex { f, m });
    }
    let (n, k) = (params.n, params.k);
    let layout = group_layout(n, k)?;
    let bp = base_params(n, k)?;
    let copies = params.alpha / bp.alpha_prime;
    let mut out = Vec::with_capacity(copies * bp.d_prime);
    for c in 0..copies {
        for j in 1..=bp.d_prime {
            let index = c * bp.d_prime + j;
            let assignments = base_subquery(j, f, c * bp.alpha_prime, params.alpha, index, &layout, &bp)?;
            out.push(Subquery { index, layer: Layer::One, fresh_pad: index, assignments });
        }
    }
    debug_assert_eq!(out.len(), params.d(0));
    Ok(out)
}

fn check_failed(failed: &BTreeSet<usize>, n: usize, nu: usize) -> Result<(), PlanError> {
    if let Some(&bad) = failed.iter().find(|&&x| x == 0 || x > n) {
        return Err(PlanError::NodeOutOfRange { node: bad, n });
    }
    if failed.len() > nu {
        return Err(PlanError::TooManyFailures { failed: failed.len(), nu });
    }
    Ok(())
}

/// Lists, node by node and subquery by subquery, what `failed` did not answer.
/// This is also the order in which layer 2 packs the parts.
pub fn classify_missing(
    failed: &BTreeSet<usize>,
    layer1: &[Subquery],
    params: &UniversalParams,
) -> Result<Vec<MissingPart>, PlanError> {
    check_failed(failed, params.n, params.nu)?;
    let mut out = Vec::with_capacity(failed.len() * layer1.len());
    for &node in failed {
        for sq in layer1 {
            let c = sq.assignments.get(&node).ok_or(PlanError::MissingAssignment { subquery: sq.index, node })?;
            let part = match c.units.as_slice() {
                [] => MissingPart::Case2 { pad: sq.fresh_pad, node },
                [unit] => MissingPart::Case1 { unit: *unit, pad: sq.fresh_pad, node },
                _ => return Err(PlanError::MalformedLayer1 { subquery: sq.index, node }),
            };
            out.push(part);
        }
    }
    Ok(out)
}

/// What each node has been asked so far; drives layer-2 eligibility.
#[derive(Debug, Clone, Default)]
struct NodeHistory {
    units: BTreeSet<usize>,
    /// Pads whose interference this node already answers for, either as a
    /// bare pad or through an earlier layer-2 substitute.
    pad_equations: BTreeSet<usize>,
}

impl NodeHistory {
    fn eligible(&self, part: &MissingPart) -> bool {
        match *part {
            MissingPart::Case1 { unit, .. } => !self.units.contains(&unit),
            MissingPart::Case2 { pad, .. } => !self.pad_equations.contains(&pad),
        }
    }

    fn record(&mut self, part: &MissingPart) -> bool {
        match *part {
            MissingPart::Case1 { unit, .. } => self.units.insert(unit),
            MissingPart::Case2 { pad, .. } => self.pad_equations.insert(pad),
        }
    }

    fn forget(&mut self, part: &MissingPart) {
        match *part {
            MissingPart::Case1 { unit, .. } => self.units.remove(&unit),
            MissingPart::Case2 { pad, .. } => self.pad_equations.remove(&pad),
        };
    }
}

/// Upper bound on complete assignments tried before giving up.
const MAX_LEAVES: usize = 100_000;

struct Search<'a> {
    parts: &'a [MissingPart],
    /// Order in which parts are placed: Case 1 first, then Case 2.
    visit: Vec<usize>,
    chunk: usize,
    responsive: Vec<usize>,
    history: BTreeMap<usize, NodeHistory>,
    load: BTreeMap<usize, usize>,
    choice: Vec<usize>,
    used: Vec<BTreeSet<usize>>,
    leaves: usize,
}

impl Search<'_> {
    fn candidates(&self, part: &MissingPart) -> Vec<usize> {
        let mut nodes = self.responsive.clone();
        if !part.is_case1() {
            nodes.sort_by_key(|x| (self.load[x], *x));
        }
        nodes
    }

    fn run(&mut self, step: usize, accept: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if step == self.visit.len() {
            self.leaves += 1;
            return accept(&self.choice);
        }
        if self.leaves >= MAX_LEAVES {
            return false;
        }
        let idx = self.visit[step];
        let part = self.parts[idx];
        let c = idx / self.chunk;
        for node in self.candidates(&part) {
            if self.used[c].contains(&node) || !self.history[&node].eligible(&part) {
                continue;
            }
            self.used[c].insert(node);
            self.history.get_mut(&node).expect("responsive node").record(&part);
            *self.load.get_mut(&node).expect("responsive node") += 1;
            self.choice[idx] = node;
            if self.run(step + 1, accept) {
                return true;
            }
            *self.load.get_mut(&node).expect("responsive node") -= 1;
            self.history.get_mut(&node).expect("responsive node").forget(&part);
            self.used[c].remove(&node);
        }
        false
    }
}

/// Synthesizes the layer-2 subqueries compensating for `failed`.
///
/// Missing parts keep their classification order and are packed `n_i − k`
/// per subquery. Case-1 parts go to the lowest eligible node, then Case-2
/// parts to the eligible node with the fewest layer-2 payloads so far. The
/// search backtracks fully; a candidate plan is only accepted once the
/// combined equation system pins every symbol of the requested file.
pub fn layer2_plan(
    f: usize,
    m: usize,
    failed: &BTreeSet<usize>,
    layer1: &[Subquery],
    params: &UniversalParams,
    code: &MdsCode,
) -> Result<Vec<Subquery>, PlanError> {
    let parts = classify_missing(failed, layer1, params)?;
    let i = failed.len();
    if i == 0 {
        return Ok(Vec::new());
    }
    let (n, k) = (params.n, params.k);
    let lvl = params.level(i);
    let chunk = lvl.n_i - k;
    let rounds = lvl.d_i - params.d(0);
    if parts.len() != chunk * rounds {
        return Err(PlanError::CountingMismatch { missing: parts.len(), capacity: chunk * rounds });
    }
    let responsive: Vec<usize> = (1..=n).filter(|x| !failed.contains(x)).collect();

    let mut history: BTreeMap<usize, NodeHistory> = responsive.iter().map(|&x| (x, NodeHistory::default())).collect();
    for sq in layer1 {
        for (node, c) in &sq.assignments {
            let Some(h) = history.get_mut(node) else { continue };
            h.units.extend(c.units.iter().copied());
            if c.units.is_empty() {
                h.pad_equations.extend(c.pads.iter().copied());
            }
        }
    }

    let first_pad = layer1.iter().map(|s| s.fresh_pad).max().unwrap_or(0) + 1;
    let first_index = layer1.iter().map(|s| s.index).max().unwrap_or(0) + 1;
    let build = |choice: &[usize]| -> Vec<Subquery> {
        (0..rounds)
            .map(|s| {
                let fresh = first_pad + s;
                let mut assignments: BTreeMap<usize, Composition> =
                    responsive.iter().map(|&x| (x, Composition::pure(fresh))).collect();
                for (idx, part) in parts.iter().enumerate().skip(s * chunk).take(chunk) {
                    let comp = match *part {
                        MissingPart::Case1 { unit, .. } => Composition::with_unit(fresh, unit),
                        MissingPart::Case2 { pad, .. } => Composition::with_pad(fresh, pad),
                    };
                    assignments.insert(choice[idx], comp);
                }
                Subquery { index: first_index + s, layer: Layer::Two, fresh_pad: fresh, assignments }
            })
            .collect()
    };

    let mut search = Search {
        parts: &parts,
        chunk,
        visit: (0..parts.len())
            .filter(|&x| parts[x].is_case1())
            .chain((0..parts.len()).filter(|&x| !parts[x].is_case1()))
            .collect(),
        responsive: responsive.clone(),
        history,
        load: responsive.iter().map(|&x| (x, 0)).collect(),
        choice: vec![0; parts.len()],
        used: vec![BTreeSet::new(); rounds],
        leaves: 0,
    };
    let mut found = None;
    let mut accept = |choice: &[usize]| {
        let layer2 = build(choice);
        match structurally_decodable(code, params, f, m, failed, layer1, &layer2) {
            Ok(true) => {
                found = Some(layer2);
                true
            }
            _ => false,
        }
    };
    search.run(0, &mut accept);
    found.ok_or(PlanError::Infeasible { failed: failed.iter().copied().collect(), tried: search.leaves })
}

/// The structural plan of one retrieval: who is asked what, in terms of pad
/// and unit identifiers. Pad values are drawn separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub f: usize,
    pub m: usize,
    pub params: UniversalParams,
    pub failed: BTreeSet<usize>,
    pub missing: Vec<MissingPart>,
    pub layer1: Vec<Subquery>,
    pub layer2: Vec<Subquery>,
}

impl SessionPlan {
    pub fn build(
        code: &MdsCode,
        params: &UniversalParams,
        m: usize,
        f: usize,
        failed: &BTreeSet<usize>,
    ) -> Result<Self, PlanError> {
        if code.n() != params.n || code.k() != params.k {
            return Err(PlanError::InvalidCode { n: code.n(), k: code.k() });
        }
        let layer1 = layer1_plan(f, m, params)?;
        let missing = classify_missing(failed, &layer1, params)?;
        let layer2 = layer2_plan(f, m, failed, &layer1, params, code)?;
        Ok(Self { f, m, params: params.clone(), failed: failed.clone(), missing, layer1, layer2 })
    }

    pub fn subqueries(&self) -> impl Iterator<Item = &Subquery> {
        self.layer1.iter().chain(&self.layer2)
    }

    pub fn pad_count(&self) -> usize {
        self.layer1.len() + self.layer2.len()
    }

    pub fn query_len(&self) -> usize {
        self.m * self.params.alpha
    }

    /// What `node` is sent, in session order. Unresponsive nodes still see
    /// their layer-1 queries.
    pub fn node_queries(&self, node: usize) -> Vec<&Composition> {
        self.subqueries().filter_map(|s| s.assignments.get(&node)).collect()
    }

    /// Number of answers the user downloads.
    pub fn downloads(&self) -> usize {
        let l1: usize =
            self.layer1.iter().map(|s| s.assignments.keys().filter(|x| !self.failed.contains(x)).count()).sum();
        let l2: usize = self.layer2.iter().map(|s| s.assignments.len()).sum();
        l1 + l2
    }

    /// Test hook: a planner that forgets to pad payload queries. Every query
    /// carrying a unit vector loses its pads.
    pub fn strip_payload_pads(&mut self) {
        for sq in self.layer1.iter_mut().chain(self.layer2.iter_mut()) {
            for c in sq.assignments.values_mut() {
                if !c.units.is_empty() {
                    c.pads.clear();
                }
            }
        }
    }

    /// Draws fresh uniform pads for every subquery of the plan.
    pub fn draw_pads<R: rand::Rng + ?Sized>(&self, field: PrimeField, rng: &mut R) -> PadBank {
        PadBank::random(field, self.pad_count(), self.query_len(), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_pir::QueryClass;
    use crate::mds_storage::{make_code, smallest_field};

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn universal_params_examples() {
        let p = universal_params(5, 2, 2).unwrap();
        assert_eq!(p.alpha, 3);
        assert_eq!(p.d_list(), vec![2, 3, 6]);
        let alphas: Vec<_> = p.levels.iter().map(|l| (l.alpha_i, l.d_prime_i)).collect();
        assert_eq!(alphas, vec![(3, 2), (1, 1), (1, 2)]);

        let p = universal_params(4, 2, 1).unwrap();
        assert_eq!((p.alpha, p.d_list()), (1, vec![1, 2]));

        let p = universal_params(5, 2, 0).unwrap();
        assert_eq!((p.alpha, p.d_list()), (3, vec![2]));
    }

    #[test]
    fn nu_bound_enforced() {
        assert!(matches!(universal_params(5, 2, 3), Err(PlanError::NuTooLarge { nu: 3, max: 2 })));
        assert!(matches!(universal_params(3, 3, 0), Err(PlanError::InvalidCode { .. })));
    }

    #[test]
    fn counting_identity_and_integrality() {
        for n in 2..=10 {
            for k in 1..n {
                for nu in 0..n - k {
                    let p = universal_params(n, k, nu).unwrap();
                    let d0 = p.d(0);
                    for l in &p.levels {
                        assert_eq!(p.alpha % l.alpha_i, 0);
                        assert_eq!((l.n_i - k) * (l.d_i - d0), d0 * (n - l.n_i), "({n},{k},{nu}) i={}", l.i);
                        assert_eq!(l.d_i * (l.n_i - k), k * p.alpha);
                    }
                }
            }
        }
    }

    #[test]
    fn layer1_five_two() {
        let p = universal_params(5, 2, 2).unwrap();
        let l1 = layer1_plan(1, 2, &p).unwrap();
        assert_eq!(l1.len(), 2);
        assert_eq!(l1[0].assignments[&1], Composition::with_unit(1, 1));
        assert_eq!(l1[1].assignments[&3], Composition::with_unit(2, 3));
        assert!(matches!(layer1_plan(3, 2, &p), Err(PlanError::FileIndex { .. })));
    }

    #[test]
    fn layer1_units_stay_in_file_window() {
        for (n, k, nu) in [(5, 2, 2), (6, 3, 2), (7, 3, 3), (8, 2, 5), (10, 4, 3)] {
            let p = universal_params(n, k, nu).unwrap();
            let l1 = layer1_plan(1, 1, &p).unwrap();
            for sq in &l1 {
                for c in sq.assignments.values() {
                    assert!(c.units.iter().all(|&u| (1..=p.alpha).contains(&u)));
                }
            }
            // second file shifts by alpha
            let l1b = layer1_plan(2, 2, &p).unwrap();
            for (a, b) in l1.iter().zip(&l1b) {
                for (x, c) in &a.assignments {
                    let shifted: Vec<_> = c.units.iter().map(|u| u + p.alpha).collect();
                    assert_eq!(b.assignments[x].units, shifted);
                }
            }
        }
    }

    #[test]
    fn classify_examples() {
        let p = universal_params(5, 2, 2).unwrap();
        let l1 = layer1_plan(1, 1, &p).unwrap();
        assert_eq!(
            classify_missing(&set(&[1]), &l1, &p).unwrap(),
            vec![MissingPart::Case1 { unit: 1, pad: 1, node: 1 }, MissingPart::Case2 { pad: 2, node: 1 }]
        );
        assert_eq!(
            classify_missing(&set(&[1, 3]), &l1, &p).unwrap(),
            vec![
                MissingPart::Case1 { unit: 1, pad: 1, node: 1 },
                MissingPart::Case2 { pad: 2, node: 1 },
                MissingPart::Case1 { unit: 2, pad: 1, node: 3 },
                MissingPart::Case1 { unit: 3, pad: 2, node: 3 },
            ]
        );
        assert!(classify_missing(&set(&[]), &l1, &p).unwrap().is_empty());
        assert!(matches!(
            classify_missing(&set(&[1, 2, 3]), &l1, &p),
            Err(PlanError::TooManyFailures { failed: 3, nu: 2 })
        ));
    }

    #[test]
    fn layer2_single_failure_five_two() {
        let code = make_code(5, 2, 5).unwrap();
        let p = universal_params(5, 2, 2).unwrap();
        let l1 = layer1_plan(1, 1, &p).unwrap();
        let l2 = layer2_plan(1, 1, &set(&[1]), &l1, &p, &code).unwrap();
        assert_eq!(l2.len(), 1);
        let a = &l2[0].assignments;
        assert!(!a.contains_key(&1));
        assert_eq!(a[&2], Composition::with_pad(3, 2));
        assert_eq!(a[&3], Composition::with_unit(3, 1));
        assert_eq!(a[&4], Composition::pure(3));
        assert_eq!(a[&5], Composition::pure(3));
    }

    #[test]
    fn layer2_double_failure_five_two() {
        let code = make_code(5, 2, 5).unwrap();
        let p = universal_params(5, 2, 2).unwrap();
        let l1 = layer1_plan(1, 1, &p).unwrap();
        let l2 = layer2_plan(1, 1, &set(&[1, 3]), &l1, &p, &code).unwrap();
        assert_eq!(l2.len(), 4);
        let expect = [
            (Composition::pure(3), Composition::with_unit(3, 1)),
            (Composition::pure(4), Composition::with_pad(4, 2)),
            (Composition::with_unit(5, 2), Composition::pure(5)),
            (Composition::with_unit(6, 3), Composition::pure(6)),
        ];
        for (sq, (two, four)) in l2.iter().zip(expect) {
            assert_eq!(sq.assignments.keys().copied().collect::<Vec<_>>(), vec![2, 4, 5]);
            assert_eq!(sq.assignments[&2], two);
            assert_eq!(sq.assignments[&4], four);
            assert_eq!(sq.assignments[&5], Composition::pure(sq.fresh_pad));
        }
    }

    #[test]
    fn layer2_four_two_table() {
        let code = make_code(4, 2, 3).unwrap();
        let p = universal_params(4, 2, 1).unwrap();
        let l1 = layer1_plan(2, 2, &p).unwrap();
        let expect = |failed: usize| -> Vec<(usize, Composition)> {
            match failed {
                1 => vec![(2, Composition::pure(2)), (3, Composition::with_pad(2, 1)), (4, Composition::pure(2))],
                2 => vec![(1, Composition::pure(2)), (3, Composition::with_pad(2, 1)), (4, Composition::pure(2))],
                3 => vec![(1, Composition::with_unit(2, 2)), (2, Composition::pure(2)), (4, Composition::pure(2))],
                _ => vec![(1, Composition::with_unit(2, 2)), (2, Composition::pure(2)), (3, Composition::pure(2))],
            }
        };
        for failed in 1..=4 {
            let l2 = layer2_plan(2, 2, &set(&[failed]), &l1, &p, &code).unwrap();
            assert_eq!(l2.len(), 1);
            let got: Vec<_> = l2[0].assignments.iter().map(|(x, c)| (*x, c.clone())).collect();
            assert_eq!(got, expect(failed), "node {failed} down");
        }
    }

    fn check_plan_invariants(plan: &SessionPlan) {
        let p = &plan.params;
        let i = plan.failed.len();
        let lvl = p.level(i);
        assert_eq!(plan.missing.len(), (p.n - lvl.n_i) * p.d(0));
        assert_eq!(plan.missing.len(), (lvl.n_i - p.k) * (lvl.d_i - p.d(0)));
        assert_eq!(plan.layer2.len(), lvl.d_i - p.d(0));
        for sq in &plan.layer2 {
            assert!(sq.assignments.keys().all(|x| !plan.failed.contains(x)));
            let pure: Vec<_> =
                sq.assignments.iter().filter(|(_, c)| c.class() == QueryClass::PurePad).map(|(x, _)| *x).collect();
            assert_eq!(pure.len(), p.k);
            assert_eq!(sq.assignments.len() - pure.len(), lvl.n_i - p.k);
        }
        for node in 1..=p.n {
            let qs = plan.node_queries(node);
            let mut units = BTreeSet::new();
            let mut embedded = BTreeSet::new();
            let mut pure = BTreeSet::new();
            for c in &qs {
                for &u in &c.units {
                    assert!(units.insert(u), "node {node} asked twice about unit {u}");
                }
                match c.class() {
                    QueryClass::PurePad => {
                        pure.insert(c.pads[0]);
                    }
                    QueryClass::PadPad => {
                        let old = c.pads[0];
                        assert!(embedded.insert(old), "node {node} got pad {old} embedded twice");
                    }
                    _ => {}
                }
            }
            assert!(pure.is_disjoint(&embedded), "node {node}");
        }
        let d = p.d(i);
        assert_eq!(plan.downloads(), lvl.n_i * d);
    }

    #[test]
    fn plans_exist_for_every_failure_pattern() {
        for (n, k, nu) in
            [(3, 1, 1), (4, 1, 2), (4, 2, 1), (5, 2, 2), (5, 3, 1), (6, 2, 3), (6, 3, 2), (6, 4, 1), (7, 3, 3)]
        {
            let q = smallest_field(n, k).unwrap();
            let code = make_code(n, k, q).unwrap();
            let p = universal_params(n, k, nu).unwrap();
            for mask in 0u32..(1 << n) {
                let failed: BTreeSet<usize> = (1..=n).filter(|x| mask & (1 << (x - 1)) != 0).collect();
                if failed.len() > nu {
                    continue;
                }
                let plan = SessionPlan::build(&code, &p, 2, 2, &failed)
                    .unwrap_or_else(|e| panic!("({n},{k},{nu}) U={failed:?}: {e}"));
                check_plan_invariants(&plan);
            }
        }
    }
}
