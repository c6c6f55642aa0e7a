//! Batch front end: argument parsing, dispatch and report writing.
//!
//! Every JSON report is wrapped with the seed and the tolerance set it was
//! checked against. Wall-clock data goes to `run_metadata.json` only, so
//! report files are byte-identical across runs with the same inputs.

pub mod json;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bergman::{self, IndexEstimate, ToeplitzProblem, DEFAULT_BAND_DEPTH, DEFAULT_SCHEDULE};
use crate::calderon;
use crate::greens::{self, GreenCheck, Section};
use crate::linalg::{self, c};
use crate::poly::{DiscPoly, LinePoly, MatPoly};
use crate::symbolcore::spec_file::{parse_operator_spec, parse_symbol};
use crate::symbolcore::{check_elliptic, Builtin, CosphereGrid, Domain, OperatorSpec};
use crate::tolerances::Tolerances;
use crate::topoindex::{self, CalibrationStore, TopologicalIndexReport};
use crate::transformlab::{self, Cutoff, DecayModel, DecayTable, PolarRow};
use crate::{CMat, Error, Result};
use plot::Series;

#[derive(Debug, Parser)]
#[command(name = "indexlab", version, about = "Calderón symbols, Bergman-space Toeplitz indices and boundary index checks")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, env = "INDEXLAB_OUT", default_value = "indexlab-out", global = true)]
    pub out: PathBuf,
    /// Tolerance override, e.g. `--tol sv=1e-7`. Repeatable.
    #[arg(long = "tol", value_name = "KEY=VAL", global = true)]
    pub tol: Vec<String>,
    /// Truncation schedule for index estimation.
    #[arg(long, value_delimiter = ',', value_name = "N1,N2,N3", global = true)]
    pub schedule: Option<Vec<usize>>,
    /// Boundary points of the cosphere grid.
    #[arg(long, default_value_t = CosphereGrid::DEFAULT_POINTS, global = true)]
    pub grid: usize,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Also write SVG diagnostics.
    #[arg(long, global = true)]
    pub plots: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Orientation calibration store (default: `<out>/calibration.toml`).
    #[arg(long, env = "INDEXLAB_CALIBRATION", global = true)]
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    /// Operator spec file (TOML).
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    pub spec: Option<PathBuf>,
    /// Built-in operator: cr, dbar<m>, laplacian, bilaplacian, wave.
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    Numerical,
    Topological,
    Both,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Root separation of the boundary symbol on the cosphere grid.
    Ellipticity(SpecArgs),
    /// Calderón projector symbol by the Riesz and residue routes.
    CalderonSymbol(SpecArgs),
    /// Green's formula residuals on polynomial test pairs.
    GreensCheck {
        #[command(flatten)]
        spec: SpecArgs,
        /// Test-pair file (TOML); defaults to the built-in pairs.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Toeplitz index of `P α P` on `Ker D_max`.
    Index {
        #[command(flatten)]
        spec: SpecArgs,
        /// Symbol file (TOML).
        #[arg(long)]
        symbol: PathBuf,
        #[arg(long, value_enum, default_value_t = IndexMode::Both)]
        mode: IndexMode,
        /// Use the numerical kernel even when a closed form exists.
        #[arg(long)]
        fallback: bool,
    },
    /// Bounded-transform identities and decay probes on finite matrices.
    TransformLab,
    /// Numerical against topological index over the built-in matrix.
    CrossCheckSuite,
    /// Pin the orientation signs and write the calibration store.
    Calibrate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ellipticity(_) => "ellipticity",
            Command::CalderonSymbol(_) => "calderon-symbol",
            Command::GreensCheck { .. } => "greens-check",
            Command::Index { .. } => "index",
            Command::TransformLab => "transform-lab",
            Command::CrossCheckSuite => "cross-check-suite",
            Command::Calibrate => "calibrate",
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub out: PathBuf,
    pub tolerances: Tolerances,
    pub schedule: Vec<usize>,
    pub grid: usize,
    pub seed: u64,
    pub plots: bool,
    pub workers: Option<usize>,
    pub calibration: PathBuf,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let c = cli.common;
        let mut tolerances = Tolerances::default();
        for kv in &c.tol {
            tolerances.apply_override(kv)?;
        }
        let schedule = c.schedule.unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
        if schedule.is_empty() || schedule.contains(&0) {
            return Err(Error::invalid("schedule sizes must be positive"));
        }
        if c.grid < 4 {
            return Err(Error::invalid("grid needs at least 4 boundary points"));
        }
        if c.workers == Some(0) {
            return Err(Error::invalid("worker count must be positive"));
        }
        let calibration = c.calibration.unwrap_or_else(|| c.out.join("calibration.toml"));
        Ok(Self {
            command: cli.command,
            out: c.out,
            tolerances,
            schedule,
            grid: c.grid,
            seed: c.seed,
            plots: c.plots,
            workers: c.workers,
            calibration,
        })
    }
}

/// Result of a run: which contracts failed and what was written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    tolerances: Tolerances,
    pass: bool,
    report: T,
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    outcome: Outcome,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text)?;
        self.outcome.artifacts.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, pass: bool, report: T) -> Result<()> {
        let env = Envelope {
            command: self.cfg.command.name(),
            seed: self.cfg.seed,
            tolerances: self.cfg.tolerances,
            pass,
            report,
        };
        self.write(name, &json::to_string(&env))
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        self.write(name, &String::from_utf8_lossy(&bytes))
    }

    fn plot(&mut self, name: &str, title: &str, xl: &str, yl: &str, series: &[Series]) -> Result<()> {
        if self.cfg.plots {
            let svg = plot::line_plot(title, xl, yl, series);
            self.write(name, &svg)?;
        }
        Ok(())
    }
}

fn read_input(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::invalid(format!("cannot read {}: {e}", p.display())))
}

/// Read an operator spec from a file or a built-in name.
pub fn load_spec(args: &SpecArgs) -> Result<OperatorSpec> {
    match (&args.spec, &args.builtin) {
        (Some(p), _) => parse_operator_spec(&read_input(p)?),
        (None, Some(name)) => Builtin::parse(name)
            .map(OperatorSpec::builtin)
            .ok_or_else(|| Error::invalid(format!("unknown built-in operator `{name}`"))),
        (None, None) => Err(Error::invalid("either --spec or --builtin is required")),
    }
}

/// Run one subcommand, writing artifacts under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&cfg.out)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut w = Writer { cfg, outcome: Outcome::default() };
    let mut work = || -> Result<()> {
        match &cfg.command {
            Command::Ellipticity(s) => cmd_ellipticity(&mut w, &load_spec(s)?),
            Command::CalderonSymbol(s) => cmd_calderon(&mut w, &load_spec(s)?),
            Command::GreensCheck { spec, pairs } => cmd_greens(&mut w, &load_spec(spec)?, pairs.as_deref()),
            Command::Index { spec, symbol, mode, fallback } => {
                let alpha = parse_symbol(&read_input(symbol)?)?;
                cmd_index(&mut w, &load_spec(spec)?, &alpha, *mode, *fallback)
            }
            Command::TransformLab => cmd_transform_lab(&mut w),
            Command::CrossCheckSuite => cmd_cross_check_suite(&mut w),
            Command::Calibrate => cmd_calibrate(&mut w),
        }
    };
    let result = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(work),
        None => work(),
    };
    let meta = RunMetadata {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        seed: cfg.seed,
        started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        pass: result.is_ok() && w.outcome.pass(),
        error: result.as_ref().err().map(|e| e.to_string()),
        artifacts: w.outcome.artifacts.iter().map(|p| p.display().to_string()).collect(),
    };
    std::fs::write(cfg.out.join("run_metadata.json"), json::to_string(&meta))?;
    result.map(|_| w.outcome)
}

#[derive(Serialize)]
struct RunMetadata {
    tool_version: &'static str,
    command: &'static str,
    seed: u64,
    started_unix: f64,
    elapsed_seconds: f64,
    pass: bool,
    error: Option<String>,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct FailureReport {
    operator: String,
    error: String,
}

fn cmd_ellipticity(w: &mut Writer, spec: &OperatorSpec) -> Result<()> {
    let grid = CosphereGrid::for_spec(spec, w.cfg.grid);
    match check_elliptic(spec, &grid, &w.cfg.tolerances) {
        Ok(rep) => {
            if !rep.pass {
                let real: Vec<String> = rep
                    .worst_roots
                    .iter()
                    .filter(|r| r.im.abs() <= rep.tolerance)
                    .map(|r| format!("{:.6}", r.re))
                    .collect();
                w.outcome.fail(format!(
                    "ellipticity: boundary symbol has real root(s) {} at {} (min |Im| = {:.3e} ≤ {:.0e})",
                    real.join(", "),
                    rep.worst_node.describe(),
                    rep.min_distance,
                    rep.tolerance
                ));
            }
            let series = [0usize, 1]
                .map(|comp| Series {
                    label: format!("xi' = {}", if comp == 0 { "+1" } else { "-1" }),
                    points: rep
                        .nodes
                        .iter()
                        .filter(|n| n.node.component() == comp)
                        .enumerate()
                        .map(|(k, n)| (k as f64, n.min_distance))
                        .collect(),
                });
            w.plot("ellipticity.svg", "root distance from the real axis", "node", "min |Im root|", &series)?;
            let pass = rep.pass;
            w.json("ellipticity.json", pass, rep)
        }
        Err(e @ Error::EllipticityViolation { .. }) => {
            let msg = e.to_string();
            w.json("ellipticity.json", false, FailureReport { operator: spec.label.clone(), error: msg.clone() })?;
            w.outcome.fail(format!("ellipticity: {msg}"));
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn cmd_calderon(w: &mut Writer, spec: &OperatorSpec) -> Result<()> {
    let grid = CosphereGrid::for_spec(spec, w.cfg.grid);
    let rep = calderon::calderon_report(spec, &grid, &w.cfg.tolerances)?;
    if rep.max_disagreement > rep.tolerance_agree {
        w.outcome.fail(format!(
            "calderon-symbol: two-route disagreement {:.3e} exceeds {:.0e}",
            rep.max_disagreement, rep.tolerance_agree
        ));
    }
    if rep.max_idempotency_defect > rep.tolerance_idem {
        w.outcome.fail(format!(
            "calderon-symbol: idempotency defect {:.3e} exceeds {:.0e}",
            rep.max_idempotency_defect, rep.tolerance_idem
        ));
    }
    if !rep.pass && w.outcome.pass() {
        w.outcome.fail("calderon-symbol: rank of E+ not constant on a fiber component");
    }
    let series: Vec<Series> = [0usize, 1]
        .into_iter()
        .flat_map(|comp| {
            let nodes: Vec<_> = rep.nodes.iter().filter(|n| n.node.component() == comp).collect();
            let tag = if comp == 0 { "+" } else { "-" };
            [
                Series {
                    label: format!("Re p00 (xi' {tag})"),
                    points: nodes.iter().enumerate().map(|(k, n)| (k as f64, n.matrix[(0, 0)].re)).collect(),
                },
                Series {
                    label: format!("Im p00 (xi' {tag})"),
                    points: nodes.iter().enumerate().map(|(k, n)| (k as f64, n.matrix[(0, 0)].im)).collect(),
                },
            ]
        })
        .collect();
    w.plot("calderon_symbol.svg", "Calderón symbol entry (0,0) on the boundary", "node", "value", &series)?;
    let pass = rep.pass;
    w.json("calderon.json", pass, rep)
}

/// Built-in Green test pairs adapted to the operator's domain and rank.
pub fn default_pairs(spec: &OperatorSpec, seed: u64) -> Vec<(String, Section, Section)> {
    match spec.domain {
        Domain::UnitDisc => greens::standard_pairs()
            .into_iter()
            .map(|(id, f, g)| {
                if spec.rank_e == 1 {
                    return (id, f, g);
                }
                let lift = |s: Section| match s {
                    Section::Disc(v) => Section::Disc(
                        (0..spec.rank_e)
                            .map(|k| {
                                let shift = DiscPoly::monomial(k as u32, 0, c(1.0 + k as f64, 0.0));
                                &shift * &v[0]
                            })
                            .collect(),
                    ),
                    other => other,
                };
                (id, lift(f), lift(g))
            })
            .collect(),
        Domain::Interval => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sec = |deg: usize| {
                Section::Interval(
                    (0..spec.rank_e)
                        .map(|_| LinePoly::new((0..=deg).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()))
                        .collect(),
                )
            };
            (0..6).map(|k| (format!("random-{k}"), sec(2 + k % 4), sec(1 + k % 3))).collect()
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PairFile {
    pair: Vec<PairEntry>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PairEntry {
    id: String,
    /// Terms `[a, b, re, im]` of `Σ c z^a z̄^b`, one list per fiber component.
    f: Vec<Vec<[f64; 4]>>,
    g: Vec<Vec<[f64; 4]>>,
}

fn parse_pairs(text: &str) -> Result<Vec<(String, Section, Section)>> {
    let file: PairFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
        Error::Parse { line, message: e.message().to_string() }
    })?;
    let section = |comps: &[Vec<[f64; 4]>]| -> Result<Section> {
        let mut out = Vec::new();
        for terms in comps {
            let mut p = DiscPoly::zero();
            for t in terms {
                if t[0] < 0.0 || t[1] < 0.0 || t[0].fract() != 0.0 || t[1].fract() != 0.0 {
                    return Err(Error::invalid("monomial exponents must be non-negative integers"));
                }
                p.add_term(t[0] as u32, t[1] as u32, c(t[2], t[3]));
            }
            out.push(p);
        }
        Ok(Section::Disc(out))
    };
    file.pair
        .iter()
        .map(|p| Ok((p.id.clone(), section(&p.f)?, section(&p.g)?)))
        .collect()
}

#[derive(Serialize)]
struct GreenRow {
    pair: String,
    residual: f64,
    quadrature_level: u32,
    tolerance: f64,
}

#[derive(Serialize)]
struct GreenReport {
    operator: String,
    max_residual: f64,
    checks: Vec<(String, GreenCheck)>,
}

fn cmd_greens(w: &mut Writer, spec: &OperatorSpec, pairs: Option<&Path>) -> Result<()> {
    let pairs = match pairs {
        Some(p) => parse_pairs(&read_input(p)?)?,
        None => default_pairs(spec, w.cfg.seed),
    };
    let tol = w.cfg.tolerances;
    let checks: Vec<(String, GreenCheck)> = pairs
        .par_iter()
        .map(|(id, f, g)| Ok((id.clone(), greens::verify_greens_formula(spec, f, g, &tol)?)))
        .collect::<Result<_>>()?;
    let rows: Vec<GreenRow> = checks
        .iter()
        .map(|(id, g)| GreenRow {
            pair: id.clone(),
            residual: g.residual,
            quadrature_level: g.quadrature_level,
            tolerance: g.tolerance,
        })
        .collect();
    for r in &rows {
        if r.residual > r.tolerance {
            w.outcome.fail(format!("greens-check: residual {:.3e} on pair {} exceeds {:.0e}", r.residual, r.pair, r.tolerance));
        }
    }
    w.csv("greens.csv", &rows)?;
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let pass = w.outcome.pass();
    w.json("greens.json", pass, GreenReport { operator: spec.label.clone(), max_residual, checks })
}

#[derive(Serialize)]
struct SymbolTerm {
    degree: [u32; 2],
    #[serde(serialize_with = "json::ser_cmat")]
    matrix: CMat,
}

fn symbol_terms(a: &MatPoly) -> Vec<SymbolTerm> {
    a.terms
        .iter()
        .map(|(&(p, q), m)| SymbolTerm { degree: [p, q], matrix: m.clone() })
        .collect()
}

#[derive(Serialize)]
struct IndexReport {
    operator: String,
    symbol: Vec<SymbolTerm>,
    mode: IndexMode,
    numerical: Option<IndexEstimate>,
    topological: Option<TopologicalIndexReport>,
    verdict: Option<&'static str>,
}

#[derive(Serialize)]
struct SigmaRow {
    size: usize,
    operator: &'static str,
    k: usize,
    sigma: f64,
}

fn calibration_store(w: &mut Writer) -> Result<CalibrationStore> {
    let cfg = w.cfg;
    let existed = cfg.calibration.exists();
    let store = topoindex::load_or_calibrate(&cfg.calibration, &cfg.schedule, &cfg.tolerances)?;
    if !existed {
        w.outcome.artifacts.push(cfg.calibration.clone());
    }
    Ok(store)
}

fn cmd_index(w: &mut Writer, spec: &OperatorSpec, alpha: &MatPoly, mode: IndexMode, fallback: bool) -> Result<()> {
    let cfg = w.cfg;
    let tol = cfg.tolerances;
    let mut report = IndexReport {
        operator: spec.label.clone(),
        symbol: symbol_terms(alpha),
        mode,
        numerical: None,
        topological: None,
        verdict: None,
    };
    if mode != IndexMode::Numerical {
        let store = calibration_store(w)?;
        if !store.reproduces_reference(&tol)? {
            return Err(Error::CalibrationFailure("calibration store does not reproduce its reference index".into()));
        }
        report.topological = Some(topoindex::topological_index(spec, alpha, Some(&store), cfg.grid, &tol)?);
    }
    if mode != IndexMode::Topological {
        let problem = ToeplitzProblem::with_options(spec, alpha.clone(), cfg.schedule.clone(), tol, fallback, DEFAULT_BAND_DEPTH)?;
        let est = match bergman::numerical_index(&problem) {
            Ok(e) => e,
            Err(Error::IndexUnstable(e)) => {
                w.outcome.fail(format!(
                    "index: numerical index not stabilized over schedule {:?}",
                    cfg.schedule
                ));
                *e
            }
            Err(e) => return Err(e),
        };
        let mut rows = Vec::new();
        for r in &est.table {
            for (name, s) in [("alpha", &r.singular_values_alpha), ("alpha_star", &r.singular_values_alpha_star)] {
                rows.extend(s.iter().enumerate().map(|(k, &sigma)| SigmaRow { size: r.size, operator: name, k, sigma }));
            }
        }
        w.csv("singular_values.csv", &rows)?;
        let series: Vec<Series> = est
            .table
            .iter()
            .map(|r| Series {
                label: format!("n = {}", r.size),
                points: r
                    .singular_values_alpha
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| (k as f64, s.max(1e-300).log10()))
                    .collect(),
            })
            .collect();
        w.plot("singular_values.svg", "singular values of the α section", "k", "log10 σ_k", &series)?;
        report.numerical = Some(est);
    }
    if let (Some(n), Some(t)) = (&report.numerical, &report.topological) {
        let equal = n.index == t.combined;
        report.verdict = Some(if equal { "equal" } else { "unequal" });
        if !equal {
            w.outcome.fail(format!("index: numerical {} differs from topological {}", n.index, t.combined));
        }
    }
    let pass = w.outcome.pass();
    w.json("index.json", pass, report)
}

fn cmd_calibrate(w: &mut Writer) -> Result<()> {
    let cfg = w.cfg;
    let store = topoindex::calibrate_orientation(&cfg.schedule, &cfg.tolerances)?;
    if let Ok(prev) = CalibrationStore::load(&cfg.calibration) {
        if prev != store {
            w.outcome.fail("calibrate: existing store differs from a fresh calibration");
            return Ok(());
        }
    }
    store.save(&cfg.calibration)?;
    w.outcome.artifacts.push(cfg.calibration.clone());
    Ok(())
}

/// One row of the cross-check matrix.
#[derive(Debug, Clone, Serialize)]
pub struct CrossCheckRow {
    pub operator: String,
    pub symbol: String,
    pub numerical: i64,
    pub topological: i64,
    pub stabilized: bool,
    pub confident: bool,
    pub gap_ratio: f64,
    pub equal: bool,
}

/// Symbols of the cross-check matrix: `z^k` for `k = 0..3` and three
/// seeded random loops.
pub fn suite_symbols(seed: u64) -> Vec<(String, DiscPoly)> {
    let mut out: Vec<(String, DiscPoly)> = (0..4u32)
        .map(|k| (format!("z^{k}"), DiscPoly::monomial(k, 0, c(1.0, 0.0))))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..3 {
        let wnd = rng.gen_range(-2..=2);
        out.push((format!("random-{i} (winding {wnd})"), topoindex::random_loop(&mut rng, wnd)));
    }
    out
}

pub fn suite_operators() -> Vec<OperatorSpec> {
    [Builtin::DbarPower(1), Builtin::DbarPower(2), Builtin::Laplacian, Builtin::Bilaplacian]
        .into_iter()
        .map(OperatorSpec::builtin)
        .collect()
}

pub fn cross_check_suite(store: &CalibrationStore, schedule: &[usize], seed: u64, tol: &Tolerances) -> Result<Vec<CrossCheckRow>> {
    if !store.reproduces_reference(tol)? {
        return Err(Error::CalibrationFailure("calibration store does not reproduce its reference index".into()));
    }
    let symbols = suite_symbols(seed);
    let cases: Vec<(OperatorSpec, String, DiscPoly)> = suite_operators()
        .into_iter()
        .flat_map(|op| symbols.iter().map(move |(n, p)| (op.clone(), n.clone(), p.clone())))
        .collect();
    cases
        .par_iter()
        .map(|(op, name, p)| {
            let alpha = MatPoly::scalar(p);
            let top = topoindex::topological_index(op, &alpha, Some(store), CosphereGrid::DEFAULT_POINTS, tol)?;
            let est = match bergman::numerical_index(&ToeplitzProblem::new(op, alpha, schedule.to_vec(), *tol)?) {
                Ok(e) => e,
                Err(Error::IndexUnstable(e)) => *e,
                Err(e) => return Err(e),
            };
            Ok(CrossCheckRow {
                operator: op.label.clone(),
                symbol: name.clone(),
                numerical: est.index,
                topological: top.combined,
                stabilized: est.stabilized,
                confident: est.confident,
                gap_ratio: est.gap_ratio,
                equal: est.stabilized && est.index == top.combined,
            })
        })
        .collect()
}

fn cmd_cross_check_suite(w: &mut Writer) -> Result<()> {
    let store = calibration_store(w)?;
    let cfg = w.cfg;
    let rows = cross_check_suite(&store, &cfg.schedule, cfg.seed, &cfg.tolerances)?;
    for r in rows.iter().filter(|r| !r.equal) {
        w.outcome.fail(format!(
            "cross-check: {} with {}: numerical {} (stabilized {}) vs topological {}",
            r.operator, r.symbol, r.numerical, r.stabilized, r.topological
        ));
    }
    w.csv("cross_check.csv", &rows)?;
    let pass = w.outcome.pass();
    w.json("cross_check.json", pass, &rows)
}

/// Bounded-transform, integral-formula, polar-limit and resolvent checks.
#[derive(Debug, Clone, Serialize)]
pub struct TransformLabSummary {
    pub transform_residual: f64,
    pub transform_equivariance: f64,
    pub transform_tolerance: f64,
    pub integral_errors_200: Vec<f64>,
    pub integral_max_error: f64,
    pub integral_tolerance: f64,
    /// Per matrix: errors at 25, 50, 100, 200 nodes.
    pub integral_convergence: Vec<[f64; 4]>,
    /// Error at least halves with every doubling (down to 1e-13).
    pub integral_halving: bool,
    pub polar: Vec<Vec<PolarRow>>,
    pub polar_within_bounds: bool,
    pub resolvent_max_residual: f64,
    pub resolvent_draws: usize,
    pub resolvent_tolerance: f64,
    pub decay: Vec<DecayTable>,
    pub pass: bool,
}

pub fn transform_lab_suite(seed: u64) -> Result<TransformLabSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transform_residual: f64 = 0.0;
    let mut transform_equivariance: f64 = 0.0;
    for k in 0..10 {
        let r = 1 + k % 4;
        let t = linalg::random_matrix(&mut rng, 8, r) * linalg::random_matrix(&mut rng, r, 6) * c(1.0 + k as f64, 0.0);
        let chk = transformlab::check_bounded_transform(&t);
        let mut res = chk.range_residual.max(chk.kernel_residual);
        if chk.rank_t != chk.rank_f || chk.norm >= 1.0 {
            res = f64::INFINITY;
        }
        transform_residual = transform_residual.max(res);
        let u = linalg::random_unitary(&mut rng, 8);
        let v = linalg::random_unitary(&mut rng, 6);
        let lhs = transformlab::bounded_transform(&(&u * &t * v.adjoint()));
        let rhs = &u * transformlab::bounded_transform(&t) * v.adjoint();
        transform_equivariance = transform_equivariance.max((lhs - rhs).norm());
    }

    let mats: Vec<CMat> = (0..20)
        .map(|_| {
            let t = linalg::random_matrix(&mut rng, 20, 20);
            let target = rng.gen_range(0.5..10.0);
            &t * c(target / linalg::op_norm(&t), 0.0)
        })
        .collect();
    let conv: Vec<[f64; 4]> = mats
        .par_iter()
        .map(|t| {
            let mut row = [0.0; 4];
            for (slot, n) in row.iter_mut().zip([25, 50, 100, 200]) {
                *slot = transformlab::baaj_julg_error(t, n)?;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let integral_errors_200: Vec<f64> = conv.iter().map(|r| r[3]).collect();
    let integral_max_error = integral_errors_200.iter().cloned().fold(0.0, f64::max);
    let integral_halving = conv.iter().all(|r| r.windows(2).all(|p| p[1] <= (0.5 * p[0]).max(1e-13)));

    let deltas = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut polar = Vec::new();
    for k in 0..6 {
        let t = if k % 2 == 0 {
            linalg::random_matrix(&mut rng, 6, 6)
        } else {
            linalg::random_matrix(&mut rng, 6, 3) * linalg::random_matrix(&mut rng, 3, 6)
        };
        polar.push(transformlab::polar_isometry_limit(&t, &deltas)?.rows);
    }
    let polar_within_bounds = polar.iter().flatten().all(|r| r.within_bound);

    let draws = 50;
    let resolvent_max_residual = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let (op, mu) = transformlab::random_resolvent_case(seed.wrapping_mul(1000).wrapping_add(i), 10)?;
            Ok(transformlab::verify_resolvent_identities(&op, mu)?.max_residual)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let bump = Cutoff::Bump { center: 0.5, width: 0.3 };
    let decay = [DecayModel::FirstOrder, DecayModel::SecondOrder]
        .par_iter()
        .map(|&m| transformlab::compactness_decay_probe(m, bump, &[64, 128, 256], 5))
        .collect::<Result<Vec<_>>>()?;

    let pass = transform_residual <= 1e-10
        && transform_equivariance <= 1e-12
        && integral_max_error <= 1e-6
        && polar_within_bounds
        && resolvent_max_residual <= 1e-10;
    Ok(TransformLabSummary {
        transform_residual,
        transform_equivariance,
        transform_tolerance: 1e-10,
        integral_errors_200,
        integral_max_error,
        integral_tolerance: 1e-6,
        integral_convergence: conv,
        integral_halving,
        polar,
        polar_within_bounds,
        resolvent_max_residual,
        resolvent_draws: draws,
        resolvent_tolerance: 1e-10,
        decay,
        pass,
    })
}

#[derive(Serialize)]
struct DecayCsvRow {
    model: DecayModel,
    order: usize,
    k: usize,
    size: usize,
    sigma_selfadjointness: f64,
    sigma_commutator: f64,
}

fn cmd_transform_lab(w: &mut Writer) -> Result<()> {
    let s = transform_lab_suite(w.cfg.seed)?;
    if s.transform_residual > s.transform_tolerance || s.transform_equivariance > 1e-12 {
        w.outcome.fail("transform-lab: bounded transform kernel/range/equivariance check failed");
    }
    if s.integral_max_error > s.integral_tolerance {
        w.outcome.fail(format!("transform-lab: integral formula error {:.3e} exceeds 1e-6", s.integral_max_error));
    }
    if !s.polar_within_bounds {
        w.outcome.fail("transform-lab: polar limit error above δ/(2C²)");
    }
    if s.resolvent_max_residual > s.resolvent_tolerance {
        w.outcome.fail(format!("transform-lab: resolvent identity residual {:.3e} exceeds 1e-10", s.resolvent_max_residual));
    }
    let rows: Vec<DecayCsvRow> = s
        .decay
        .iter()
        .flat_map(|t| {
            t.rows.iter().map(move |r| DecayCsvRow {
                model: t.model,
                order: t.order,
                k: t.k,
                size: r.size,
                sigma_selfadjointness: r.sigma_selfadjointness,
                sigma_commutator: r.sigma_commutator,
            })
        })
        .collect();
    w.csv("decay.csv", &rows)?;
    let series: Vec<Series> = s
        .decay
        .iter()
        .map(|t| Series {
            label: format!("{:?}", t.model),
            points: t.rows.iter().map(|r| (r.size as f64, r.sigma_selfadjointness)).collect(),
        })
        .collect();
    w.plot("decay.svg", "k-th singular value of j(F - F*)", "truncation size", "sigma_k", &series)?;
    let pass = s.pass;
    w.json("transform_lab.json", pass, s)
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cfg = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run(&cfg) {
        Ok(o) if o.pass() => {
            for a in &o.artifacts {
                println!("wrote {}", a.display());
            }
            0
        }
        Ok(o) => {
            for f in &o.failures {
                eprintln!("FAIL {f}");
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
