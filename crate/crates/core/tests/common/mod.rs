//! Brute-force decoding oracle shared by the integration targets.
//!
//! Given a transcript, it searches every possible content of the stored
//! files for those that would have produced exactly the recorded answers,
//! using nothing but node-side projection. Two files are handled by meeting
//! in the middle: answers for every choice of file 1 are tabulated, then
//! each choice of file 2 is matched against what remains.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rpir_core::dss_sim::node_respond;
use rpir_core::mds_storage::{encode_store, FileMatrix, FileStore, MdsCode};
use rpir_core::pir_decoder::Transcript;
use rpir_core::ExtSymbol;

/// Answers to the transcript's queries for the store whose only non-zero
/// symbol is a 1 at `(file, symbol)`, for every such position.
fn unit_answers(code: &MdsCode, t: &Transcript, m: usize, k: usize, alpha: usize) -> Vec<Vec<Vec<u32>>> {
    let field = code.field();
    let per_file = k * alpha;
    (0..m)
        .map(|file| {
            (0..per_file)
                .map(|j| {
                    let files: Vec<FileMatrix> = (0..m)
                        .map(|g| {
                            let syms =
                                (0..per_file).map(|x| ExtSymbol::from_base((g == file && x == j) as u32, 1)).collect();
                            FileMatrix::new(k, alpha, syms).unwrap()
                        })
                        .collect();
                    let store = FileStore::new(field, 1, files).unwrap();
                    let nodes = encode_store(&store, code).unwrap();
                    t.responses
                        .iter()
                        .map(|r| {
                            let sq = t.subqueries.iter().find(|s| s.index == r.subquery).unwrap();
                            let qv = &sq.queries[&r.node];
                            node_respond(field, &nodes[r.node - 1], qv).unwrap().coords()[0]
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn all_vectors(q: u32, len: usize) -> impl Iterator<Item = Vec<u32>> {
    let total = (q as u64).pow(len as u32);
    (0..total).map(move |mut idx| {
        (0..len)
            .map(|_| {
                let d = (idx % q as u64) as u32;
                idx /= q as u64;
                d
            })
            .collect()
    })
}

fn combine(q: u32, basis: &[Vec<u32>], x: &[u32], width: usize) -> Vec<u32> {
    let mut out = vec![0u64; width];
    for (b, &c) in basis.iter().zip(x) {
        if c != 0 {
            for (o, &v) in out.iter_mut().zip(b) {
                *o += c as u64 * v as u64;
            }
        }
    }
    out.into_iter().map(|v| (v % q as u64) as u32).collect()
}

/// Every content of file `t.f` consistent with the recorded answers, as flat
/// block-major symbol vectors. Supports `ell = 1` and at most two files.
pub fn consistent_files(code: &MdsCode, t: &Transcript, alpha: usize) -> BTreeSet<Vec<u32>> {
    let cfg = &t.config;
    assert_eq!(cfg.ell, 1, "oracle handles ell = 1 only");
    assert!(cfg.m <= 2, "oracle handles at most two files");
    let q = cfg.q;
    let len = cfg.k * alpha;
    let width = t.responses.len();
    let target: Vec<u32> = t.responses.iter().map(|r| r.value.coords()[0]).collect();
    let basis = unit_answers(code, t, cfg.m, cfg.k, alpha);

    let mut table: HashMap<Vec<u32>, Vec<Vec<u32>>> = HashMap::new();
    for x1 in all_vectors(q, len) {
        table.entry(combine(q, &basis[0], &x1, width)).or_default().push(x1);
    }
    let mut found = BTreeSet::new();
    if cfg.m == 1 {
        for x1 in table.remove(&target).unwrap_or_default() {
            found.insert(x1);
        }
        return found;
    }
    for x2 in all_vectors(q, len) {
        let r2 = combine(q, &basis[1], &x2, width);
        let rest: Vec<u32> = target.iter().zip(&r2).map(|(&a, &b)| (a + q - b) % q).collect();
        if let Some(firsts) = table.get(&rest) {
            for x1 in firsts {
                found.insert(if t.f == 1 { x1.clone() } else { x2.clone() });
            }
        }
    }
    found
}

pub fn flatten(file: &FileMatrix) -> Vec<u32> {
    file.symbols().iter().map(|s| s.coords()[0]).collect()
}
