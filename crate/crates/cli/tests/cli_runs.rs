use std::fs;
use std::path::Path;
use std::process::Command;

use fracmfg::field_io::read_field;
use serde_json::Value;

fn fracmfg(args: &[&str], root: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fracmfg"))
        .args(args)
        .env("FRACMFG_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const UNIFORM: &str = r#"
seed = 3
[problem]
s = 0.75
n = 32
regime = "report"
[problem.hamiltonian]
gamma = 2.0
[problem.coupling]
q = 2.0
[output]
directory = "run"
formats = ["field-binary", "csv"]
"#;

#[test]
fn uniform_solution_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "uniform.toml", UNIFORM);
    let (code, text) = fracmfg(&["mfg-solve", "-c", &cfg], tmp.path());
    assert_eq!(code, 0, "{text}");
    let dir = tmp.path().join("run");
    let d = json(&dir.join("diagnostics.json"));
    assert_eq!(d["lambda"].as_f64().unwrap(), 1.0);
    for key in ["hjb", "fp", "mass"] {
        assert!(d["residuals"][key].as_f64().unwrap() <= 1e-12);
    }
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["subcommand"], "mfg-solve");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["timings_ms"]["total"].as_f64().unwrap() >= 0.0);
    for name in ["u", "m", "w_1"] {
        let (header, field) = read_field(&dir.join(name)).unwrap();
        assert_eq!((header.dim, header.n), (1, 32));
        assert!(field.values().iter().all(|v| v.is_finite()));
        assert!(dir.join(format!("{name}.csv")).exists());
    }
}

#[test]
fn diagnostics_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = UNIFORM.replace("potential", "").replace("q = 2.0", "q = 2.0\npotential = \"0.05*cos(1)\"");
    let cfg = write(tmp.path(), "p.toml", &text);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let (code, out) = fracmfg(&["mfg-solve", "-c", &cfg, "-o", dir.to_str().unwrap()], tmp.path());
        assert_eq!(code, 0, "{out}");
    }
    assert_eq!(fs::read(a.join("diagnostics.json")).unwrap(), fs::read(b.join("diagnostics.json")).unwrap());
    assert_eq!(fs::read(a.join("m.f64")).unwrap(), fs::read(b.join("m.f64")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[problem]\ns = 0.4\n");
    let (code, text) = fracmfg(&["mfg-solve", "-c", &cfg], tmp.path());
    assert_eq!(code, 2);
    assert!(text.contains("s must lie in (1/2, 1)"), "{text}");
    let cfg = write(tmp.path(), "unknown.toml", "[problem]\nwhat = 1\n");
    assert_eq!(fracmfg(&["fp-solve", "-c", &cfg, "--strict"], tmp.path()).0, 2);
    assert_eq!(fracmfg(&["fp-solve", "-c", &cfg], tmp.path()).0, 0);
    // hjb-solve without data
    assert_eq!(fracmfg(&["hjb-solve", "-c", &cfg], tmp.path()).0, 2);
}

#[test]
fn non_convergence_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = UNIFORM.replace("q = 2.0", "q = 2.0\npotential = \"0.5*cos(1)\"") + "[solver]\nmax_outer = 2\n";
    let cfg = write(tmp.path(), "short.toml", &text);
    let (code, out) = fracmfg(&["mfg-solve", "-c", &cfg], tmp.path());
    assert_eq!(code, 3, "{out}");
    assert!(out.contains("[mfg]"), "{out}");
    let m = json(&tmp.path().join("run/manifest.json"));
    assert_eq!(m["exit_code"], 3);
}

#[test]
fn hjb_and_fp_subcommands_write_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[problem]
dim = 2
n = 16
f = "cos(1,0)*sin(0,1)"
drift = ["sin(0,1)", "cos(1,0)"]
[problem.hamiltonian]
gamma = 1.2
[output]
directory = "two"
"#;
    let cfg = write(tmp.path(), "two.toml", text);
    assert_eq!(fracmfg(&["hjb-solve", "-c", &cfg], tmp.path()).0, 0);
    let d = json(&tmp.path().join("two/diagnostics.json"));
    let lambda = d["lambda"].as_f64().unwrap();
    let bounds = d["lambda_bounds"].as_array().unwrap();
    assert!(bounds[0].as_f64().unwrap() - 1e-8 <= lambda && lambda <= bounds[1].as_f64().unwrap() + 1e-8);
    let (_, u) = read_field(&tmp.path().join("two/u")).unwrap();
    assert!(u.mean().abs() <= 1e-15);
    assert_eq!(fracmfg(&["fp-solve", "-c", &cfg], tmp.path()).0, 0);
    let (_, m) = read_field(&tmp.path().join("two/m")).unwrap();
    assert_eq!(m.coeffs()[0].re, 1.0);
    assert!(m.min() > 0.0);
}

#[test]
fn several_configs_run_concurrently() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.toml", UNIFORM);
    let b = write(tmp.path(), "b.toml", &UNIFORM.replace("s = 0.75", "s = 0.6"));
    let out = tmp.path().join("sweep");
    let (code, text) = fracmfg(&["mfg-solve", "-c", &a, "-c", &b, "-o", out.to_str().unwrap()], tmp.path());
    assert_eq!(code, 0, "{text}");
    for i in 0..2 {
        assert!(out.join(format!("run-{i}/diagnostics.json")).exists());
    }
}

#[test]
fn uniqueness_probe_reports_distances() {
    let tmp = tempfile::tempdir().unwrap();
    let text = UNIFORM.replace("q = 2.0", "q = 2.0\npotential = \"0.02*cos(1)\"")
        + "[uniqueness]\nseeds = [\"1\", \"2 + 0.5*sin(1)\"]\n";
    let cfg = write(tmp.path(), "probe.toml", &text);
    let (code, out) = fracmfg(&["mfg-probe-uniqueness", "-c", &cfg], tmp.path());
    assert_eq!(code, 0, "{out}");
    let d = json(&tmp.path().join("run/diagnostics.json"));
    assert!(d["report"]["max_m_distance"].as_f64().unwrap() <= 1e-6);
    assert!(d["report"]["max_lambda_distance"].as_f64().unwrap() <= 1e-8);
}
