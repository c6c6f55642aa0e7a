use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_indexlab"))
}

fn outdir(tag: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("indexlab-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&p);
    std::fs::create_dir_all(&p).unwrap();
    p
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).env_remove("INDEXLAB_CALIBRATION").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn report(out: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join(name)).unwrap()).unwrap()
}

fn write_symbol(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("symbol.toml");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
    assert_eq!(code(&bin().arg("no-such-command").output().unwrap()), 2);
    let out = outdir("usage");
    assert_eq!(code(&run(&out, &["--tol", "sv=-1", "calibrate"])), 2);
    assert_eq!(code(&run(&out, &["--tol", "bogus=1", "calibrate"])), 2);
    assert_eq!(code(&run(&out, &["--schedule", "40,0,80", "calibrate"])), 2);
    assert_eq!(code(&run(&out, &["ellipticity", "--builtin", "nabla"])), 2);
}

#[test]
fn hyperbolic_operator_fails_ellipticity() {
    let out = outdir("wave");
    let o = run(&out, &["ellipticity", "--builtin", "wave"]);
    assert_eq!(code(&o), 1);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("real root"), "{stderr}");
    assert_eq!(report(&out, "ellipticity.json")["pass"], false);
    assert!(out.join("run_metadata.json").exists());
}

#[test]
fn elliptic_builtins_pass() {
    let out = outdir("elliptic");
    for b in ["cr", "dbar2", "laplacian", "bilaplacian"] {
        assert_eq!(code(&run(&out, &["ellipticity", "--builtin", b])), 0, "{b}");
        assert_eq!(code(&run(&out, &["calderon-symbol", "--builtin", b, "--plots"])), 0, "{b}");
        assert_eq!(report(&out, "calderon.json")["report"]["operator"], b);
    }
    assert!(out.join("calderon_symbol.svg").exists());
}

#[test]
fn malformed_spec_reports_line() {
    let out = outdir("spec");
    let spec = out.join("op.toml");
    std::fs::write(&spec, "label = \"x\"\norder = \"two\"\n").unwrap();
    let o = run(&out, &["ellipticity", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = run(&out, &["ellipticity", "--spec", out.join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn index_both_modes_agree() {
    let out = outdir("index");
    let sym = write_symbol(&out, "size = 1\n[[terms]]\ndegree = [2, 0]\nmatrix = [[[1.0, 0.0]]]\n");
    let o = run(&out, &["index", "--builtin", "cr", "--symbol", sym.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out, "index.json");
    assert_eq!(r["report"]["numerical"]["index"], -2);
    assert_eq!(r["report"]["topological"]["combined"], -2);
    assert_eq!(r["report"]["verdict"], "equal");
    assert!(out.join("calibration.toml").exists());
    let csv = std::fs::read_to_string(out.join("singular_values.csv")).unwrap();
    assert!(csv.starts_with("size,operator,k,sigma"));
}

#[test]
fn symbol_vanishing_on_boundary_is_rejected() {
    let out = outdir("vanish");
    let sym = write_symbol(
        &out,
        "size = 1\n[[terms]]\ndegree = [1, 0]\nmatrix = [[[1.0, 0.0]]]\n[[terms]]\ndegree = [0, 0]\nmatrix = [[[-1.0, 0.0]]]\n",
    );
    let o = run(&out, &["index", "--builtin", "laplacian", "--symbol", sym.to_str().unwrap(), "--mode", "numerical"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not invertible"));
}

#[test]
fn tampered_calibration_is_refused() {
    let out = outdir("tamper");
    assert_eq!(code(&run(&out, &["calibrate"])), 0);
    let path = out.join("calibration.toml");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("sign_plus = -1", "sign_plus = 1")).unwrap();
    let sym = write_symbol(&out, "size = 1\n[[terms]]\ndegree = [1, 0]\nmatrix = [[[1.0, 0.0]]]\n");
    let o = run(&out, &["index", "--builtin", "cr", "--symbol", sym.to_str().unwrap(), "--mode", "topological"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("calibration"));
}

#[test]
fn greens_check_writes_csv() {
    let out = outdir("greens");
    let o = run(&out, &["greens-check", "--builtin", "laplacian"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(out.join("greens.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let pairs = out.join("pairs.toml");
    std::fs::write(&pairs, "[[pair]]\nid = \"zz\"\nf = [[[1, 0, 1.0, 0.0]]]\ng = [[[0, 1, 0.0, 2.0]]]\n").unwrap();
    let o = run(&out, &["greens-check", "--builtin", "cr", "--pairs", pairs.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&pairs, "[[pair]]\nid = 3\n").unwrap();
    assert_eq!(code(&run(&out, &["greens-check", "--builtin", "cr", "--pairs", pairs.to_str().unwrap()])), 2);
}
