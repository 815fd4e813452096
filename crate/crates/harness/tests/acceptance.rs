//! Runs every acceptance criterion at its pinned tolerance and prints one
//! line per criterion.

use std::io::Write;

use rvl_harness::acceptance::{Options, Suite, CHECKS};

/// Writes past the test harness's output capture so the lines always show.
fn report(line: String) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

/// Criteria that do not hold at the pinned settings (see the decision log).
/// Strict: a listed check that starts passing fails this test too.
const EXPECTED_FAILURES: [&str; 2] = ["gauss-decay", "iw-construction"];

#[test]
fn acceptance_criteria() {
    let suite = Suite::new(Options::default()).unwrap();
    let mut unexpected = Vec::new();
    for &(name, criterion, _) in CHECKS.iter() {
        let rec = suite.run(name).unwrap();
        let expected_fail = EXPECTED_FAILURES.contains(&name);
        report(format!("{}{}", rec.summary(), if expected_fail { "  (expected failure)" } else { "" }));
        for c in rec.conditions.iter().filter(|c| !c.passed) {
            report(format!("       {}: {}", c.name, c.detail));
        }
        if rec.passed == expected_fail {
            unexpected.push(format!("criterion {criterion} ({name}) passed = {}", rec.passed));
        }
    }
    assert!(unexpected.is_empty(), "unexpected outcomes: {unexpected:?}");
}

#[test]
fn zero_tolerance_is_a_negative_control() {
    let suite = Suite::new(Options {
        tolerance: Some(0.0),
        ..Options::default()
    })
    .unwrap();
    for name in ["vr-oracle", "ramanujan", "fourier-consistency"] {
        let rec = suite.run(name).unwrap();
        report(format!("negative control: {}", rec.summary()));
        assert!(!rec.passed, "{name} passed with tolerance 0");
        assert!(rec.summary().contains(&format!("{:.3e}", rec.value)));
    }
}

#[test]
fn unknown_check_is_rejected() {
    let suite = Suite::new(Options::default()).unwrap();
    let e = suite.run("vr_oracle").unwrap_err().to_string();
    assert!(e.contains("vr-oracle"), "{e}");
}

#[test]
fn one_check_per_criterion() {
    let mut crits: Vec<u8> = CHECKS.iter().map(|c| c.1).collect();
    crits.sort_unstable();
    assert_eq!(crits, (1..=15).collect::<Vec<u8>>());
    assert_eq!(Suite::names().count(), 15);
}
