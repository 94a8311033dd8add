//! Runs the acceptance suite and prints one line per criterion.

use fracmfg_cli::acceptance::run_suite;

#[test]
fn acceptance_suite() {
    let report = run_suite(20_261_016);
    for line in report.lines() {
        println!("{line}");
    }
    assert_eq!(report.criteria.len(), 10);
    let failed: Vec<u32> = report.failed().map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
