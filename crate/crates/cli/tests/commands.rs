use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problems() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn blowup(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowup"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn varphi_on_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = problems().join("binary.toml");
    let o = blowup(dir.path(), &["--problem", p.to_str().unwrap(), "exponent", "varphi", "--tau-grid", "0:0.45:0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,tau,value,method");
    assert_eq!(lines.len(), 11);
    // ln 2 − H(0.75) at τ = 0.25.
    let row: Vec<&str> = lines[6].split(',').collect();
    assert_eq!(row[1], "0.25");
    let v: f64 = row[2].parse().unwrap();
    assert!((v - 0.130_812_035_941_136_98).abs() < 1e-9, "{v}");
    assert_eq!(std::fs::read_to_string(dir.path().join("varphi.csv")).unwrap(), text);
}

#[test]
fn manifest_records_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let p = problems().join("ternary.toml");
    let o = blowup(dir.path(), &["--problem", p.to_str().unwrap(), "--seed", "5", "ot"]);
    assert_eq!(o.status.code(), Some(0));
    let m: toml::Value = toml::from_str(&std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(m["run"]["seed"].as_integer(), Some(5));
    let input = &m["inputs"].as_array().unwrap()[0];
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(input["sha256"].as_str().unwrap(), blowup_cli::problem::sha256_hex(&bytes));
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["ot.csv", "ot_plan.csv"]);
    for f in files {
        let b = std::fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), blowup_cli::problem::sha256_hex(&b));
    }
}

#[test]
fn envelope_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = problems().join("binary.toml");
    let args = ["--problem", p.to_str().unwrap(), "exponent", "phi", "--closed", "--alpha-grid", "0:0.5:0.25", "--tau-grid", "0:0.3:0.1"];
    assert_eq!(blowup(dir.path(), &args).status.code(), Some(0));
    let curve = dir.path().join("phi_geq.csv");
    let o = blowup(dir.path(), &["envelope", "--input", curve.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let raw = blowup_cli::output::read_curve(&curve).unwrap();
    let env = blowup_cli::output::read_curve(&dir.path().join("envelope.csv")).unwrap();
    assert_eq!(raw.alpha_grid(), env.alpha_grid());
    for ((a, t, v, _), (_, _, e, _)) in raw.cells().zip(env.cells()) {
        assert!(e.to_float() <= v.to_float() + 1e-12, "({a}, {t}): {e:?} > {v:?}");
    }
    // The envelope of an envelope is itself.
    let again = dir.path().join("again");
    let o = blowup(&again, &["envelope", "--input", dir.path().join("envelope.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let twice = blowup_cli::output::read_curve(&again.join("envelope.csv")).unwrap();
    for (x, y) in env.values().iter().zip(twice.values()) {
        assert!((x.to_float() - y.to_float()).abs() < 1e-12, "{x:?} vs {y:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let binary = problems().join("binary.toml");
    let b = binary.to_str().unwrap();
    assert_eq!(blowup(dir.path(), &["--bogus", "ot"]).status.code(), Some(1));
    assert_eq!(blowup(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(blowup(dir.path(), &["ot"]).status.code(), Some(1), "missing --problem");
    assert_eq!(blowup(dir.path(), &["--problem", b, "exponent", "varphi", "--tau-grid", "0.3,0.1"]).status.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "p_x = [0.5, 0.4]\ncost = [[0.0, 1.0], [1.0, 0.0]]\n").unwrap();
    let o = blowup(dir.path(), &["--problem", bad.to_str().unwrap(), "ot"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_x"));
    let o = blowup(dir.path(), &["--problem", b, "bruteforce", "gamma", "--n", "40"]);
    assert_eq!(o.status.code(), Some(3));
    let asym = problems().join("asymmetric.toml");
    let o = blowup(dir.path(), &["--problem", asym.to_str().unwrap(), "dual", "abs-r"]);
    assert_eq!(o.status.code(), Some(2), "abs-r needs a metric");
}

#[test]
fn shipped_problems_pass_the_smoke_check() {
    let r = blowup_cli::verify::shipped_problems(&problems());
    assert!(r.pass, "{}", r.detail);
    assert!(r.detail.starts_with("4 files"));
}

#[test]
fn verify_subset_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = blowup(dir.path(), &["verify", "--only", "2,9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "criterion,name,pass,detail");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("C2,") && lines[2].starts_with("C9,"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let p = problems().join("ternary.toml");
    let args = |t: &'static str| vec!["--problem", "", "--threads", t, "exponent", "phi", "--alpha-grid", "0:0.4:0.2", "--tau-grid", "0:0.6:0.2"];
    let mut outs = Vec::new();
    for t in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args(t);
        a[1] = p.to_str().unwrap();
        let o = blowup(dir.path(), &a);
        assert_eq!(o.status.code(), Some(0));
        outs.push(std::fs::read(dir.path().join("phi.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}
