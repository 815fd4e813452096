use rvl_harness::config::ExperimentConfig;
use rvl_harness::experiments::{read_artifacts, run_experiment, EXPERIMENTS};

fn small(id: &str, dir: &std::path::Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(id);
    c.out = dir.join(id);
    match id {
        "gauss-decay" => {
            c.set("qmax", 40);
        }
        "theta-asymptotic" => {
            c.set("exponents", vec![8, 9, 10]);
        }
        "multiplier-sweep" => {
            c.set("n", 64).set("points", 16);
        }
        "variation-study" => {
            c.set("length", 12).set("trials", 10);
        }
        "convergence-study" => {
            c.set("nmax", 32);
        }
        "weyl-scan" => {
            c.set("exponents", vec![8, 9]).set("frequencies", 3);
        }
        "iw-build" => {
            c.set("levels", vec![1, 2]).set("s_max", 1).set("m_max", 3);
        }
        "major-arc" => {
            c.set("exponents", vec![6, 7]);
        }
        "comparison" => {
            c.set("exponents", vec![6, 7]);
        }
        _ => {
            c.set("pairs", vec![vec![2, 10], vec![10, 30]]);
        }
    }
    c
}

#[test]
fn every_experiment_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for id in EXPERIMENTS {
        let ra = run_experiment(&small(id, a.path())).unwrap();
        let rb = run_experiment(&small(id, b.path())).unwrap();
        assert!(!ra.artifacts.is_empty(), "{id} wrote nothing");
        assert_eq!(read_artifacts(&ra).unwrap(), read_artifacts(&rb).unwrap(), "{id}");
        assert!(a.path().join(id).join("report.json").exists());
    }
}

#[test]
fn seed_changes_random_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("variation-study", dir.path());
    let first = read_artifacts(&run_experiment(&c).unwrap()).unwrap();
    c.seed += 1;
    let second = read_artifacts(&run_experiment(&c).unwrap()).unwrap();
    assert_ne!(first, second);
}

#[test]
fn theta_asymptotic_final_error_below_three_over_log() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::new("theta-asymptotic");
    c.out = dir.path().to_path_buf();
    let r = run_experiment(&c).unwrap();
    assert!(r.passed(), "{:?}", r.checks);
    let text = std::fs::read_to_string(dir.path().join("theta.csv")).unwrap();
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn gauss_decay_reports_fit() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&small("gauss-decay", dir.path())).unwrap();
    assert!(r.fitted.contains_key("delta") && r.fitted.contains_key("C"));
    let text = std::fs::read_to_string(dir.path().join("gauss-decay/gauss.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,max_abs,argmax_a"));
    assert!(lines.next().unwrap().starts_with("1,1,"));
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn malformed_params_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("telescoping", dir.path());
    c.set("paris", vec![vec![1, 2]]);
    let e = format!("{:#}", run_experiment(&c).unwrap_err());
    assert!(e.contains("paris"), "{e}");
}

#[test]
fn sieve_coverage_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("theta-asymptotic", dir.path());
    c.sieve.limit = 100;
    let e = format!("{:#}", run_experiment(&c).unwrap_err());
    assert!(e.contains("100"), "{e}");
}

#[test]
fn tolerance_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("telescoping", dir.path());
    c.tolerance.insert("all".into(), 0.0);
    let r = run_experiment(&c).unwrap();
    assert!(!r.passed());
}
