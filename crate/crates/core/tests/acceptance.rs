//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

use regmdp::validation::run_suite;

#[test]
fn acceptance_criteria() {
    let reports = run_suite(None, |r| println!("{r}"));
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    assert!(failed.is_empty(), "failed checks: {}", failed.join(", "));
}
