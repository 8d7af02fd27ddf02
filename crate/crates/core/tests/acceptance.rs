//! Runs every numbered acceptance check and prints one line per criterion.

use lks_core::verify::{run_criterion, NAMES};

#[test]
fn acceptance_suite() {
    let threads = std::env::var("LKS_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    let only: Option<Vec<u32>> = std::env::var("LKS_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for id in 1..=NAMES.len() as u32 {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let r = run_criterion(id, threads);
        println!("{}", r.line());
        if !r.detail.is_empty() {
            println!("         {}", r.detail);
        }
        if !r.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
