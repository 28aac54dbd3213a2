//! The ten acceptance criteria, one pass/fail line each.

use std::io::Write;
use std::time::{Duration, Instant};

use hypersim::acceptance::{self, CriterionReport};

// Written past the test harness's capture so the lines show in a plain
// `cargo test` run.
fn report(line: String) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn check(limit: Duration, f: fn() -> CriterionReport) {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    report(format!("{} ({:.2?}, limit {:?})", r.line(), took, limit));
    assert!(r.passed, "{}", r.line());
    assert!(in_time, "criterion {} took {took:?}", r.id);
}

#[test]
fn c01_one_third_digits() {
    check(Duration::from_secs(1), acceptance::one_third_digits);
}

#[test]
fn c02_parity() {
    check(Duration::from_secs(1), acceptance::parity_fidelity);
}

#[test]
fn c03_dovetail_soundness() {
    check(Duration::from_secs(30), acceptance::dovetail_soundness);
}

#[test]
fn c04_omega_simulation() {
    check(Duration::from_secs(60), acceptance::omega_equivalence);
}

#[test]
fn c05_limit_rule() {
    check(Duration::from_secs(30), acceptance::limit_rule);
}

#[test]
fn c06_f_soundness() {
    check(Duration::from_secs(60), acceptance::f_soundness);
}

#[test]
fn c07_shift_function() {
    check(Duration::from_secs(300), acceptance::shift_exactness);
}

#[test]
fn c08_kraft_omega() {
    check(Duration::from_secs(120), acceptance::kraft_and_omega);
}

#[test]
fn c09_oracle_web() {
    check(Duration::from_secs(10), acceptance::oracle_web);
}

fn suite_in_pool(workers: usize) -> String {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .unwrap()
        .install(|| acceptance::suite().to_json())
}

#[test]
fn c10_determinism() {
    let start = Instant::now();
    let runs: Vec<String> = (0..3).map(|_| acceptance::suite().to_json()).collect();
    let one = suite_in_pool(1);
    let four = suite_in_pool(4);
    let same = runs.iter().all(|r| *r == runs[0]) && one == runs[0] && four == runs[0];
    report(format!(
        "{} 10 determinism: 3 runs and 1/4 workers give {} ({} bytes, {:.2?})",
        if same { "PASS" } else { "FAIL" },
        if same { "identical reports" } else { "different reports" },
        runs[0].len(),
        start.elapsed()
    ));
    assert!(same);
}
