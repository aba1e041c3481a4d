//! Reference query tables for the two worked examples and a cell-by-cell
//! comparison against the planner.
//!
//! Cells are written as in the tables: `u`, `v`, `u3` are pads, `e1` unit
//! vectors, `-` marks a node that is not asked. Both examples retrieve file 1
//! out of 2.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::base_pir::{Composition, QueryClass};
use crate::config::SystemConfig;
use crate::mds_storage::{make_code, StoreError};
use crate::robust_pir::SessionPlan;
use crate::PlanError;

/// Coarse cell shape used when reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellClass {
    #[serde(rename = "pure-pad")]
    PurePad,
    #[serde(rename = "pad+e")]
    PadUnit,
    #[serde(rename = "pad+pad")]
    PadPad,
    #[serde(rename = "empty")]
    Empty,
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellClass::PurePad => "pure-pad",
            CellClass::PadUnit => "pad+e",
            CellClass::PadPad => "pad+pad",
            CellClass::Empty => "∅",
        })
    }
}

fn class_of(cell: Option<&Composition>) -> CellClass {
    match cell.map(Composition::class) {
        None => CellClass::Empty,
        Some(QueryClass::PurePad) => CellClass::PurePad,
        Some(QueryClass::PadUnit) => CellClass::PadUnit,
        // Never produced by the honest planner; counted as a mismatch anyway.
        Some(QueryClass::PadPad) | Some(QueryClass::Other) => CellClass::PadPad,
    }
}

/// One failure pattern of a table: the layer-2 columns sent when `failed`
/// do not answer. Rows are nodes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub failed: &'static [usize],
    pub layer2: &'static [&'static [&'static str]],
}

#[derive(Debug, Clone)]
pub struct GoldenTable {
    pub name: &'static str,
    pub config: SystemConfig,
    pub f: usize,
    /// Symbolic pad names in creation order; empty means `u1, u2, ...`.
    pub pad_names: &'static [&'static str],
    pub layer1: &'static [&'static [&'static str]],
    pub scenarios: Vec<Scenario>,
}

const EX1_LAYER1: &[&[&str]] = &[&["u"], &["u"], &["u+e1"], &["u+e1"]];

const EX2_LAYER1: &[&[&str]] =
    &[&["u1+e1", "u2"], &["u1", "u2+e1"], &["u1+e2", "u2+e3"], &["u1+e2", "u2+e3"], &["u1", "u2"]];

/// The (4,2) code with one tolerated failure.
pub fn example_one() -> Vec<GoldenTable> {
    vec![GoldenTable {
        name: "(4,2) two-layer scheme",
        config: SystemConfig { n: 4, k: 2, q: 3, ell: 1, m: 2, nu: 1 },
        f: 1,
        pad_names: &["u", "v"],
        layer1: EX1_LAYER1,
        scenarios: vec![
            Scenario { failed: &[1], layer2: &[&["-"], &["v"], &["v+u"], &["v"]] },
            Scenario { failed: &[2], layer2: &[&["v"], &["-"], &["v+u"], &["v"]] },
            Scenario { failed: &[3], layer2: &[&["v+e1"], &["v"], &["-"], &["v"]] },
            Scenario { failed: &[4], layer2: &[&["v+e1"], &["v"], &["v"], &["-"]] },
        ],
    }]
}

/// The (5,2) code with two tolerated failures: every single failure, then
/// nodes 1 and 3 together.
pub fn example_two() -> Vec<GoldenTable> {
    let config = SystemConfig { n: 5, k: 2, q: 5, ell: 1, m: 2, nu: 2 };
    vec![
        GoldenTable {
            name: "(5,2) one unresponsive node",
            config: config.clone(),
            f: 1,
            pad_names: &[],
            layer1: EX2_LAYER1,
            scenarios: vec![
                Scenario { failed: &[1], layer2: &[&["-"], &["u3+u2"], &["u3+e1"], &["u3"], &["u3"]] },
                Scenario { failed: &[2], layer2: &[&["u3+u1"], &["-"], &["u3+e1"], &["u3"], &["u3"]] },
                Scenario { failed: &[3], layer2: &[&["u3+e2"], &["u3+e3"], &["-"], &["u3"], &["u3"]] },
                Scenario { failed: &[4], layer2: &[&["u3+e2"], &["u3+e3"], &["u3"], &["-"], &["u3"]] },
                Scenario { failed: &[5], layer2: &[&["u3+u1"], &["u3+u2"], &["u3"], &["u3"], &["-"]] },
            ],
        },
        GoldenTable {
            name: "(5,2) nodes 1 and 3 unresponsive",
            config,
            f: 1,
            pad_names: &[],
            layer1: EX2_LAYER1,
            scenarios: vec![Scenario {
                failed: &[1, 3],
                layer2: &[
                    &["-", "-", "-", "-"],
                    &["u3", "u4", "u5+e2", "u6+e3"],
                    &["-", "-", "-", "-"],
                    &["u3+e1", "u4+u2", "u5", "u6"],
                    &["u3", "u4", "u5", "u6"],
                ],
            }],
        },
    ]
}

#[derive(Debug, thiserror::Error)]
pub enum GoldenError {
    #[error("cannot parse cell {0:?}")]
    Cell(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn pad_id(token: &str, names: &[&str]) -> Option<usize> {
    if let Some(i) = names.iter().position(|&x| x == token) {
        return Some(i + 1);
    }
    token.strip_prefix('u')?.parse().ok().filter(|&p| p > 0)
}

fn pad_name(id: usize, names: &[&str]) -> String {
    names.get(id - 1).map_or_else(|| format!("u{id}"), |s| s.to_string())
}

/// Parses `"u3+e1"`, `"v+u"`, `"-"`.
pub fn parse_cell(text: &str, names: &[&str]) -> Result<Option<Composition>, GoldenError> {
    let text = text.trim();
    if text == "-" {
        return Ok(None);
    }
    let err = || GoldenError::Cell(text.to_string());
    let mut c = Composition::default();
    for tok in text.split('+').map(str::trim) {
        if let Some(u) = tok.strip_prefix('e') {
            c.units.push(u.parse().map_err(|_| err())?);
        } else {
            c.pads.push(pad_id(tok, names).ok_or_else(err)?);
        }
    }
    if c.pads.is_empty() {
        return Err(err());
    }
    c.pads.sort_unstable();
    c.units.sort_unstable();
    Ok(Some(c))
}

pub fn format_cell(cell: Option<&Composition>, names: &[&str]) -> String {
    let Some(c) = cell else { return "∅".into() };
    // Fresh pad first, as the tables write it.
    let mut parts: Vec<String> = c.pads.iter().rev().map(|&p| pad_name(p, names)).collect();
    parts.extend(c.units.iter().map(|u| format!("e{u}")));
    parts.join("+")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub class: CellClass,
    pub cells: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDiff {
    pub node: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub table: String,
    pub failed: Vec<usize>,
    pub classes: Vec<ClassTally>,
    pub diffs: Vec<CellDiff>,
    /// Rendered rows, one per node: expected and planned cells.
    pub rows: Vec<(Vec<String>, Vec<String>)>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Compares one scenario, layer 1 included, cell by cell.
pub fn check_scenario(table: &GoldenTable, scenario: &Scenario) -> Result<ScenarioReport, GoldenError> {
    let cfg = &table.config;
    let params = cfg.validate()?;
    let code = make_code(cfg.n, cfg.k, cfg.q)?;
    let failed: BTreeSet<usize> = scenario.failed.iter().copied().collect();
    let plan = SessionPlan::build(&code, &params, cfg.m, table.f, &failed)?;
    let planned: Vec<_> = plan.subqueries().collect();
    let names = table.pad_names;

    let mut tallies: Vec<ClassTally> = [CellClass::PurePad, CellClass::PadUnit, CellClass::PadPad, CellClass::Empty]
        .into_iter()
        .map(|class| ClassTally { class, cells: 0, matched: 0 })
        .collect();
    let mut diffs = Vec::new();
    let mut rows = Vec::new();
    for node in 1..=cfg.n {
        let golden: Vec<&str> =
            table.layer1[node - 1].iter().chain(scenario.layer2[node - 1].iter()).copied().collect();
        let mut exp_row = Vec::new();
        let mut got_row = Vec::new();
        let width = golden.len().max(planned.len());
        for col in 0..width {
            let expected = golden.get(col).map(|t| parse_cell(t, names)).transpose()?.flatten();
            let found = planned.get(col).and_then(|s| s.assignments.get(&node));
            let class = class_of(expected.as_ref());
            let ok = col < golden.len() && expected.as_ref() == found;
            let tally = tallies.iter_mut().find(|t| t.class == class).expect("all classes tallied");
            tally.cells += 1;
            tally.matched += ok as usize;
            let (e, g) = (format_cell(expected.as_ref(), names), format_cell(found, names));
            if !ok {
                diffs.push(CellDiff { node, column: col + 1, expected: e.clone(), found: g.clone() });
            }
            exp_row.push(e);
            got_row.push(g);
        }
        rows.push((exp_row, got_row));
    }
    Ok(ScenarioReport {
        table: table.name.to_string(),
        failed: scenario.failed.to_vec(),
        classes: tallies,
        diffs,
        rows,
    })
}

pub fn check_tables(tables: &[GoldenTable]) -> Result<Vec<ScenarioReport>, GoldenError> {
    tables.iter().flat_map(|t| t.scenarios.iter().map(move |s| check_scenario(t, s))).collect()
}

/// Side-by-side text rendering with one PASS/FAIL line per cell class.
pub fn render(report: &ScenarioReport) -> String {
    let mut out = format!("{} | unresponsive {:?}\n", report.table, report.failed);
    let width = report.rows.iter().flat_map(|(e, g)| e.iter().chain(g)).map(|s| s.chars().count()).max().unwrap_or(1);
    for (i, (exp, got)) in report.rows.iter().enumerate() {
        let fmt_row = |r: &[String]| r.iter().map(|s| format!("{s:<width$}")).collect::<Vec<_>>().join(" ");
        let mark = if exp == got { ' ' } else { '*' };
        out += &format!("{mark} node {:<2} expected {}   planned {}\n", i + 1, fmt_row(exp), fmt_row(got));
    }
    for t in &report.classes {
        if t.cells == 0 {
            continue;
        }
        let verdict = if t.matched == t.cells { "PASS" } else { "FAIL" };
        out += &format!("  {verdict} {:<8} {}/{}\n", t.class.to_string(), t.matched, t.cells);
    }
    out
}
