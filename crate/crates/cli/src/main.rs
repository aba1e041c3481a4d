//! `rpir`: encode stores, run retrievals, reproduce the worked tables, audit
//! privacy and benchmark download cost.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rpir_core::dss_sim::{bench_grid, BenchRow, FailureModel, SessionError, Simulator, SEED_ENV};
use rpir_core::golden::{self, GoldenTable};
use rpir_core::mds_storage::{make_code, parse_files, FileStore, StoreFile};
use rpir_core::privacy_audit::{
    all_pass, assert_privacy, assert_privacy_mixed, failure_patterns, AuditOptions, AuditReport, Method, Planner,
};
use rpir_core::SystemConfig;

/// Exit status when more nodes fail than the scheme tolerates.
const EXIT_CAPACITY: u8 = 3;
/// Exit status when a requested check ran but did not pass.
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Parser)]
#[command(name = "rpir", version, about = "Robust private retrieval from MDS-coded storage")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode plaintext files into a store file.
    Encode {
        /// System config JSON: {"n", "k", "q", "ell", "m", "nu"}.
        #[arg(long)]
        config: PathBuf,
        /// Files JSON indexed [file][block][stripe], symbols as integers or coordinate lists.
        #[arg(long)]
        files: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Privately retrieve one file from a store.
    Retrieve {
        #[arg(long)]
        store: PathBuf,
        /// 1-based file index.
        #[arg(long = "file")]
        f: usize,
        /// `none`, `fixed:1,3` or `random:MAX`.
        #[arg(long, default_value = "none")]
        failures: String,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Tolerated failures; defaults to the value recorded in the store.
        #[arg(long)]
        nu: Option<usize>,
        /// Write the full session transcript as JSON.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Write the decode report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare the planner with the embedded reference tables.
    Repro {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        example: u8,
        /// Only the scenario with these unresponsive nodes, e.g. `1,3`.
        #[arg(long)]
        failed: Option<String>,
    },
    /// Check that no single node's view depends on the requested file.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long, default_value_t = 100_000)]
        sessions: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Failure pattern to condition on, e.g. `1` or `1,3`; `none` for
        /// no failures. Defaults to every pattern of size at most nu.
        #[arg(long)]
        failures: Option<String>,
        /// Also audit the mixture over uniformly drawn failure patterns.
        #[arg(long)]
        mixed: bool,
        /// Use a planner that leaves payload queries unpadded.
        #[arg(long, hide = true)]
        broken_planner: bool,
        /// Write all reports as a JSON array.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure cPoP for each failure count and compare with n_i/(n_i - k).
    Bench {
        /// `n,k,nu`; repeat for several systems.
        #[arg(long, required = true)]
        grid: Vec<String>,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Sample,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSymbol {
    Scalar(u32),
    Coords(Vec<u32>),
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_nodes(list: &str) -> Result<Vec<usize>> {
    if list.trim().is_empty() || list.trim() == "none" {
        return Ok(Vec::new());
    }
    list.split(',').map(|s| s.trim().parse::<usize>().with_context(|| format!("bad node index {s:?}"))).collect()
}

fn parse_failures(text: &str, seed: u64) -> Result<FailureModel> {
    let text = text.trim();
    if text == "none" {
        return Ok(FailureModel::Fixed { nodes: vec![] });
    }
    match text.split_once(':') {
        Some(("fixed", list)) => Ok(FailureModel::Fixed { nodes: parse_nodes(list)? }),
        Some(("random", max)) => {
            Ok(FailureModel::RandomSubset { max: max.trim().parse().context("bad random:MAX")?, seed })
        }
        _ => bail!("unknown failure model {text:?}; use none, fixed:1,3 or random:MAX"),
    }
}

fn parse_grid(entry: &str) -> Result<(usize, usize, usize)> {
    let v = parse_nodes(entry)?;
    match v.as_slice() {
        &[n, k, nu] => Ok((n, k, nu)),
        _ => bail!("grid entry {entry:?} must be n,k,nu"),
    }
}

fn cmd_encode(config: &Path, files: &Path, out: &Path) -> Result<ExitCode> {
    let cfg: SystemConfig = read_json(config)?;
    let raw: Vec<Vec<Vec<RawSymbol>>> = read_json(files)?;
    let nested: Vec<Vec<Vec<Vec<u32>>>> = raw
        .into_iter()
        .map(|f| {
            f.into_iter()
                .map(|b| {
                    b.into_iter()
                        .map(|s| match s {
                            RawSymbol::Scalar(x) => vec![x],
                            RawSymbol::Coords(c) => c,
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let field = cfg.field()?;
    let params = cfg.validate()?;
    let parsed = parse_files(field, cfg.ell, cfg.k, params.alpha, &nested)?;
    if parsed.len() != cfg.m {
        bail!("config declares m = {} but {} files were given", cfg.m, parsed.len());
    }
    let code = make_code(cfg.n, cfg.k, cfg.q)?;
    let store = FileStore::new(field, cfg.ell, parsed)?;
    let file = StoreFile::from_parts(&code, &store, Some(cfg.nu));
    fs::write(out, serde_json::to_string_pretty(&file)?).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "encoded {} files of {}x{} symbols for a ({},{}) code over GF({})",
        cfg.m, cfg.k, params.alpha, cfg.n, cfg.k, cfg.q
    );
    for node in 1..=cfg.n {
        println!("  node {node}: encoding vector {:?}", code.encoding_vector(node));
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_retrieve(
    store: &Path,
    f: usize,
    failures: &str,
    seed: u64,
    nu: Option<usize>,
    transcript: Option<&Path>,
    report: Option<&Path>,
) -> Result<ExitCode> {
    let file: StoreFile = read_json(store)?;
    let nu = nu.or(file.nu).context("store does not record nu; pass --nu")?;
    let (code, files) = file.into_parts()?;
    let sim = Simulator::new(code, files, nu)?;
    let model = parse_failures(failures, seed)?;
    let outcome = match sim.run(f, &model, seed) {
        Ok(o) => o,
        Err(e @ SessionError::CapacityExceeded { .. }) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_CAPACITY));
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = transcript {
        fs::write(path, outcome.transcript.to_json())?;
    }
    if let Some(path) = report {
        fs::write(path, serde_json::to_string_pretty(&outcome.report)?)?;
    }
    let ok = &outcome.decoded == sim.store().file(f);
    println!("unresponsive: {:?}", outcome.transcript.failed);
    println!("downloaded: {}", outcome.transcript.downloaded);
    println!("cPoP: {}", outcome.cpop);
    println!("decoded file {f}: {}", if ok { "matches store" } else { "MISMATCH" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK_FAILED) })
}

fn cmd_repro(example: u8, failed: Option<&str>) -> Result<ExitCode> {
    let tables: Vec<GoldenTable> = if example == 1 { golden::example_one() } else { golden::example_two() };
    let wanted: Option<Vec<usize>> = failed.map(parse_nodes).transpose()?;
    let mut all_ok = true;
    let mut shown = 0;
    for table in &tables {
        for scenario in &table.scenarios {
            if wanted.as_ref().is_some_and(|w| w.as_slice() != scenario.failed) {
                continue;
            }
            let report = golden::check_scenario(table, scenario)?;
            print!("{}", golden::render(&report));
            all_ok &= report.passed();
            shown += 1;
        }
    }
    if shown == 0 {
        bail!("no reference scenario for unresponsive nodes {:?}", wanted.unwrap_or_default());
    }
    println!("{}", if all_ok { "PASS" } else { "FAIL" });
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK_FAILED) })
}

fn print_reports(reports: &[AuditReport]) {
    for r in reports {
        let pattern = r.failure_set.as_ref().map_or_else(|| "mixed".to_string(), |u| format!("{u:?}"));
        let p = r.p_value.map_or_else(String::new, |p| format!(" p={p:.4}"));
        println!("U={pattern} node {} {:?} {:?} max_tv={:.6}{p}", r.node, r.method, r.verdict, r.max_tv);
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_audit(
    config: &Path,
    mode: Mode,
    sessions: usize,
    seed: u64,
    failures: Option<&str>,
    mixed: bool,
    broken: bool,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let cfg: SystemConfig = read_json(config)?;
    cfg.validate()?;
    let opts = AuditOptions {
        method: match mode {
            Mode::Exact => Method::Exact,
            Mode::Sample => Method::Sampled,
        },
        planner: if broken { Planner::Broken } else { Planner::Honest },
        sessions,
        seed,
        ..AuditOptions::default()
    };
    let patterns: Vec<BTreeSet<usize>> = match failures {
        Some(list) => vec![parse_nodes(list)?.into_iter().collect()],
        None => failure_patterns(cfg.n, cfg.nu),
    };
    let mut reports = Vec::new();
    for u in &patterns {
        let r = assert_privacy(&cfg, u, &opts)?;
        print_reports(&r);
        reports.extend(r);
    }
    if mixed {
        let r = assert_privacy_mixed(&cfg, &opts)?;
        print_reports(&r);
        reports.extend(r);
    }
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&reports)?)?;
    }
    let ok = all_pass(&reports);
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK_FAILED) })
}

fn cmd_bench(grid: &[String], m: usize, seed: u64, out: Option<&Path>) -> Result<ExitCode> {
    let grid: Vec<_> = grid.iter().map(|g| parse_grid(g)).collect::<Result<_>>()?;
    let rows = bench_grid(&grid, m, seed)?;
    let mut csv = String::from(BenchRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv += &r.csv_line();
        csv.push('\n');
    }
    match out {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    let ok = rows.iter().all(|r| r.matched);
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_CHECK_FAILED) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Encode { config, files, out } => cmd_encode(&config, &files, &out),
        Command::Retrieve { store, f, failures, seed, nu, transcript, report } => {
            cmd_retrieve(&store, f, &failures, seed, nu, transcript.as_deref(), report.as_deref())
        }
        Command::Repro { example, failed } => cmd_repro(example, failed.as_deref()),
        Command::Audit { config, mode, sessions, seed, failures, mixed, broken_planner, out } => {
            cmd_audit(&config, mode, sessions, seed, failures.as_deref(), mixed, broken_planner, out.as_deref())
        }
        Command::Bench { grid, m, seed, out } => cmd_bench(&grid, m, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}
