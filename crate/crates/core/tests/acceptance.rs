//! Acceptance checks. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use indexlab::bergman::{self, BasisSource, ToeplitzProblem, DEFAULT_SCHEDULE};
use indexlab::calderon;
use indexlab::cli::{self, Command, IndexMode, RunConfig, SpecArgs};
use indexlab::greens;
use indexlab::linalg::{c, from_rows};
use indexlab::poly::{DiscPoly, MatPoly};
use indexlab::symbolcore::{Builtin, CosphereGrid, OperatorSpec};
use indexlab::tolerances::Tolerances;
use indexlab::topoindex;
use indexlab::CMat;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn tol() -> Tolerances {
    Tolerances::default()
}

fn op(b: Builtin) -> OperatorSpec {
    OperatorSpec::builtin(b)
}

fn zk(k: u32) -> DiscPoly {
    DiscPoly::monomial(k, 0, c(1.0, 0.0))
}

fn index_of(spec: &OperatorSpec, alpha: MatPoly, schedule: &[usize]) -> Result<bergman::IndexEstimate, String> {
    let p = ToeplitzProblem::new(spec, alpha, schedule.to_vec(), tol()).map_err(|e| e.to_string())?;
    bergman::numerical_index(&p).map_err(|e| e.to_string())
}

fn self_adjoint_vanishing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut symbols: Vec<(String, MatPoly)> = (1..=3).map(|k| (format!("z^{k}"), MatPoly::scalar(&zk(k)))).collect();
    for i in 0..6 {
        let w = rng.gen_range(-3..=3);
        symbols.push((format!("loop{i}(w={w})"), MatPoly::scalar(&topoindex::random_loop(&mut rng, w))));
    }
    let mut d = DiscPoly::monomial(0, 0, c(2.0, 0.0));
    d.add_term(1, 0, c(1.0, 0.0));
    symbols.push(("diag(z, 2+z)".into(), topoindex::diagonal_symbol(&[zk(1), d])));
    for b in [Builtin::Laplacian, Builtin::Bilaplacian] {
        let spec = op(b);
        for (name, a) in &symbols {
            let est = index_of(&spec, a.clone(), &DEFAULT_SCHEDULE)?;
            if est.index != 0 || !est.stabilized {
                return Err(format!("{} with {name}: index {} stabilized {}", spec.label, est.index, est.stabilized));
            }
        }
    }
    Ok(format!("{} symbols x 2 operators, all index 0", symbols.len()))
}

fn boundary_cross_check() -> Check {
    let store = topoindex::calibrate_orientation(&DEFAULT_SCHEDULE, &tol()).map_err(|e| e.to_string())?;
    let rows = cli::cross_check_suite(&store, &DEFAULT_SCHEDULE, 0, &tol()).map_err(|e| e.to_string())?;
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.equal)
        .map(|r| format!("{}/{}: {} vs {}", r.operator, r.symbol, r.numerical, r.topological))
        .collect();
    if bad.is_empty() {
        Ok(format!("{} cases equal", rows.len()))
    } else {
        Err(bad.join("; "))
    }
}

fn bergman_benchmark() -> Check {
    let spec = op(Builtin::DbarPower(1));
    for k in 1..=5u32 {
        let est = index_of(&spec, MatPoly::scalar(&zk(k)), &[50, 60, 70])?;
        if est.index != -(k as i64) || !est.stabilized {
            return Err(format!("z^{k}: index {} stabilized {}", est.index, est.stabilized));
        }
    }
    Ok("index(z^k) = -k for k = 1..5".into())
}

fn calderon_two_route() -> Check {
    let expect = from_rows(&[vec![c(0.5, 0.0), c(0.0, -0.5)], vec![c(0.0, 0.5), c(0.5, 0.0)]]);
    let mut worst: f64 = 0.0;
    for b in [Builtin::DbarPower(1), Builtin::DbarPower(2), Builtin::Laplacian, Builtin::Bilaplacian] {
        let spec = op(b);
        let grid = CosphereGrid::disc(64);
        let rep = calderon::calderon_report(&spec, &grid, &tol()).map_err(|e| e.to_string())?;
        if rep.nodes.len() != 128 {
            return Err(format!("{}: grid has {} nodes", spec.label, rep.nodes.len()));
        }
        if rep.max_disagreement > 1e-8 {
            return Err(format!("{}: disagreement {:.3e}", spec.label, rep.max_disagreement));
        }
        worst = worst.max(rep.max_disagreement);
        if b == Builtin::Laplacian {
            for n in rep.nodes.iter().filter(|n| n.node.component() == 0) {
                let d = (&n.matrix - &expect).norm();
                if d > 1e-10 {
                    return Err(format!("laplacian at {}: off the hand value by {d:.3e}", n.node.describe()));
                }
            }
        }
    }
    Ok(format!("max disagreement {worst:.2e}"))
}

fn green_identity() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for b in [Builtin::DbarPower(1), Builtin::DbarPower(2), Builtin::Laplacian, Builtin::Bilaplacian] {
        let spec = op(b);
        let pairs = cli::default_pairs(&spec, 0);
        if pairs.len() != 6 {
            return Err(format!("{} pairs", pairs.len()));
        }
        for (id, f, g) in &pairs {
            let chk = greens::verify_greens_formula(&spec, f, g, &tol()).map_err(|e| e.to_string())?;
            if chk.residual > 1e-8 || chk.quadrature_level < 1 {
                return Err(format!("{}/{id}: residual {:.3e} level {}", spec.label, chk.residual, chk.quadrature_level));
            }
            worst = worst.max(chk.residual);
            count += 1;
        }
    }
    Ok(format!("{count} pairs, max residual {worst:.2e}"))
}

fn kaplansky_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.gen_range(2..=8);
        let r = rng.gen_range(0..=n);
        let e = calderon::random_idempotent(&mut rng, n, r, 1e3);
        let k = calderon::kaplansky_check(&e, &tol()).map_err(|e| e.to_string())?;
        if k.rank_e != k.rank_p || k.rank_p != r || k.max_defect() > 1e-10 {
            return Err(format!("draw {i}: {k:?}"));
        }
        worst = worst.max(k.max_defect());
    }
    Ok(format!("100 draws, worst defect {worst:.2e}"))
}

fn transform_lab() -> Check {
    let s = cli::transform_lab_suite(0).map_err(|e| e.to_string())?;
    let detail = format!(
        "integral {:.2e}, resolvent {:.2e}, polar within bounds {}",
        s.integral_max_error, s.resolvent_max_residual, s.polar_within_bounds
    );
    if s.integral_errors_200.len() != 20 || s.resolvent_draws != 50 || s.polar.iter().any(|p| p.len() != 4) {
        return Err("suite shape changed".into());
    }
    if s.integral_max_error <= 1e-6 && s.polar_within_bounds && s.resolvent_max_residual <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lower_order_invariance() -> Check {
    let spec = op(Builtin::DbarPower(1));
    let alpha = MatPoly::scalar(&zk(1));
    let store = topoindex::calibrate_orientation(&DEFAULT_SCHEDULE, &tol()).map_err(|e| e.to_string())?;
    let top = |s: &OperatorSpec| {
        topoindex::topological_index(s, &alpha, Some(&store), CosphereGrid::DEFAULT_POINTS, &tol())
            .map(|r| r.combined)
            .map_err(|e| e.to_string())
    };
    let base_top = top(&spec)?;
    for cst in [0.05, 0.1] {
        let pert = [((0, 0), CMat::from_element(1, 1, c(cst, 0.0)))];
        let rep = bergman::lower_order_invariance(&spec, &pert, &alpha, &DEFAULT_SCHEDULE, &tol()).map_err(|e| e.to_string())?;
        if rep.perturbed.basis_source != BasisSource::Numerical {
            return Err(format!("c = {cst}: perturbed kernel did not use the numerical basis"));
        }
        let pspec = spec.perturbed((0, 0), CMat::from_element(1, 1, c(cst, 0.0))).map_err(|e| e.to_string())?;
        let t = top(&pspec)?;
        if rep.base.index != -1 || rep.perturbed.index != -1 || !rep.perturbed.stabilized || t != base_top {
            return Err(format!(
                "c = {cst}: base {} perturbed {} topological {t} vs {base_top}",
                rep.base.index, rep.perturbed.index
            ));
        }
    }
    Ok("index -1 for c in {0, 0.05, 0.1}".into())
}

fn trace_shadow() -> Check {
    let spec = op(Builtin::DbarPower(1));
    let family: Vec<_> = (0..=200).map(|n| vec![zk(n)]).collect();
    let rows = greens::trace_norm_ratio(&spec, &family, &tol()).map_err(|e| e.to_string())?;
    let sup = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    if sup > 3.0 {
        return Err(format!("sup ratio {sup}"));
    }
    for w in rows.windows(2).filter(|w| w[0].index >= 10) {
        if w[1].ratio > w[0].ratio * (1.0 + 1e-12) {
            return Err(format!("ratio increases at n = {}: {} -> {}", w[1].index, w[0].ratio, w[1].ratio));
        }
    }
    Ok(format!("sup ratio {sup:.4}"))
}

fn scratch(tag: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("indexlab-acceptance-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&p);
    p
}

fn reports(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.file_name().unwrap() != "run_metadata.json")
        .filter(|p| matches!(p.extension().and_then(|x| x.to_str()), Some("json" | "csv")))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Check {
    let symbol = scratch("symbol.toml");
    std::fs::write(&symbol, "size = 1\n[[terms]]\ndegree = [3, 0]\nmatrix = [[[1.0, 0.0]]]\n").map_err(|e| e.to_string())?;
    let spec = |b: &str| SpecArgs { spec: None, builtin: Some(b.into()) };
    let commands = [
        Command::Ellipticity(spec("bilaplacian")),
        Command::CalderonSymbol(spec("laplacian")),
        Command::GreensCheck { spec: spec("dbar2"), pairs: None },
        Command::Index { spec: spec("cr"), symbol: symbol.clone(), mode: IndexMode::Numerical, fallback: false },
        Command::TransformLab,
    ];
    let mut files = 0;
    for cmd in commands {
        let name = cmd.name();
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = scratch(&format!("{name}-{rep}"));
            let cfg = RunConfig {
                command: cmd.clone(),
                out: out.clone(),
                tolerances: tol(),
                schedule: DEFAULT_SCHEDULE.to_vec(),
                grid: CosphereGrid::DEFAULT_POINTS,
                seed: 42,
                plots: false,
                workers: None,
                calibration: out.join("calibration.toml"),
            };
            cli::run(&cfg).map_err(|e| format!("{name}: {e}"))?;
            runs.push(reports(&out));
            let _ = std::fs::remove_dir_all(&out);
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            return Err(format!("{name}: reports differ between runs"));
        }
        files += runs[0].len();
    }
    let _ = std::fs::remove_file(&symbol);
    Ok(format!("{files} report files byte-identical"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 self-adjoint operators give index 0", Duration::from_secs(60), self_adjoint_vanishing),
        ("2 numerical = topological index matrix", Duration::from_secs(90), boundary_cross_check),
        ("3 Bergman shift benchmark", Duration::from_secs(10), bergman_benchmark),
        ("4 two-route symbol agreement", Duration::from_secs(5), calderon_two_route),
        ("5 Green's identity", Duration::from_secs(10), green_identity),
        ("6 Kaplansky projections", Duration::from_secs(2), kaplansky_suite),
        ("7 transform lab", Duration::from_secs(10), transform_lab),
        ("8 lower-order invariance", Duration::from_secs(60), lower_order_invariance),
        ("9 trace norm ratio", Duration::from_secs(5), trace_shadow),
        ("10 determinism", Duration::MAX, determinism),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let t0 = Instant::now();
        let res = run();
        let dt = t0.elapsed();
        let res = match res {
            Ok(d) if dt > budget => Err(format!("{d}; took {:.1} s, budget {} s", dt.as_secs_f64(), budget.as_secs())),
            r => r,
        };
        match res {
            Ok(d) => println!("PASS {name} ({:.2} s): {d}", dt.as_secs_f64()),
            Err(d) => {
                failed += 1;
                println!("FAIL {name} ({:.2} s): {d}", dt.as_secs_f64());
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
