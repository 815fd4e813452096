use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rvl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvl")).args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", "id = \"variation-study\"\nseed = 11\n[params]\nlength = 10\ntrials = 4\n");
    let outs: Vec<String> = ["a", "b"].iter().map(|s| dir.path().join(s).to_string_lossy().into_owned()).collect();
    for o in &outs {
        let r = rvl(&["--out", o, "run", &cfg]);
        assert!(r.status.success(), "{}", text(&r));
    }
    let a = fs::read(Path::new(&outs[0]).join("variation.csv")).unwrap();
    let b = fs::read(Path::new(&outs[1]).join("variation.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "id = \"gauss-decay\"\nsede = 1\n");
    let r = rvl(&["run", &cfg]);
    assert_eq!(r.status.code(), Some(2));
    assert!(text(&r).contains("sede"), "{}", text(&r));
    let cfg = write(dir.path(), "bad2.toml", "id = \"gauss-decay\"\n[params]\nqmx = 3\n");
    let r = rvl(&["run", &cfg]);
    assert!(text(&r).contains("qmx"), "{}", text(&r));
}

#[test]
fn unknown_experiment_lists_known_ids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "x.toml", "id = \"gauss\"\n");
    let r = rvl(&["run", &cfg]);
    assert!(!r.status.success());
    assert!(text(&r).contains("gauss-decay"), "{}", text(&r));
}

#[test]
fn acceptance_filter_and_json_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("v.json");
    let r = rvl(&["acceptance", "vr-oracle", "--json", json.to_str().unwrap()]);
    assert!(r.status.success(), "{}", text(&r));
    let out = text(&r);
    assert!(out.contains("vr-oracle") && !out.contains("ramanujan"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    assert_eq!(v["checks"][0]["criterion"], 1);
}

#[test]
fn acceptance_zero_tolerance_fails_with_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = rvl(&["--out", out, "--tolerance", "0", "acceptance", "ramanujan"]);
    assert_eq!(r.status.code(), Some(1));
    let t = text(&r);
    assert!(t.contains("FAIL") && t.contains("e-1"), "{t}");
    assert!(dir.path().join("acceptance.json").exists());
}

#[test]
fn acceptance_list() {
    let r = rvl(&["acceptance", "--list"]);
    assert!(r.status.success());
    assert_eq!(String::from_utf8_lossy(&r.stdout).lines().count(), 15);
}

#[test]
fn operators_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let f = write(dir.path(), "f.csv", "x1,x2,re,im\n0,0,1,0\n3,-2,0.5,0.25\n");
    let r = rvl(&["--out", out, "apply-average", "--n", "16", "--input", &f]);
    assert!(r.status.success(), "{}", text(&r));
    let avg = fs::read_to_string(dir.path().join("average.csv")).unwrap();
    assert!(avg.starts_with("x1,x2,re,im"));
    let r = rvl(&["--out", out, "apply-singular", "--n", "16", "--poly", "1:1;1:2", "--input", &f]);
    assert!(r.status.success(), "{}", text(&r));
    let r = rvl(&["--out", out, "orbit", "--n", "32", "--format", "bin"]);
    assert!(r.status.success(), "{}", text(&r));
    assert!(dir.path().join("orbit.bin").exists());
}

#[test]
fn variation_modes() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.csv", "1\n3\n2\n5\n4\n");
    let dp = rvl(&["variation", &s, "--r", "2"]);
    let bf = rvl(&["variation", &s, "--r", "2", "--mode", "bruteforce"]);
    assert!(dp.status.success() && bf.status.success());
    let val = |o: &Output| serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()["vr"].as_f64().unwrap();
    assert!((val(&dp) - val(&bf)).abs() < 1e-12);
    assert!((val(&dp) - 17f64.sqrt()).abs() < 1e-12);
    let r = rvl(&["variation", &s, "--mode", "nope"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn xi_eval_reports_partition() {
    let r = rvl(&["xi-eval", "--xi", "0,0", "--n", "1"]);
    assert!(r.status.success(), "{}", text(&r));
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(v["eta_n"].as_f64().unwrap() > 0.0);
}

#[test]
fn sieve_uses_cache_dir() {
    let dir = tempfile::tempdir().unwrap();
    let r = Command::new(env!("CARGO_BIN_EXE_rvl"))
        .args(["sieve", "--limit", "1000"])
        .env("RVL_SIEVE_CACHE", dir.path())
        .output()
        .unwrap();
    assert!(r.status.success());
    assert!(text(&r).contains("π(1000) = 168"));
    assert!(dir.path().join("primes-1000.bin").exists());
}
