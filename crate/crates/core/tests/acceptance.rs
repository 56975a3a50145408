//! One line per acceptance criterion; exits nonzero if any fails.
//! Criterion ids given as arguments restrict the run.

use plap_core::experiments::acceptance::{run_criterion, CRITERIA};

fn main() {
    let ids: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids = if ids.is_empty() { (1..=CRITERIA).collect() } else { ids };
    let mut failed = 0;
    for id in ids {
        let o = run_criterion(id, 20_240_601).expect("criterion id in range");
        println!("{o}");
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
