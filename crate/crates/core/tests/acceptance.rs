//! Full-size acceptance checks. Prints one line per criterion and fails if
//! any of them fails.
//!
//! `cargo test --release --test acceptance`

use std::process::ExitCode;

use heston_barrier::acceptance::{
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_8, criterion_9, rate_criteria, Check,
};
use heston_barrier::config::Tier;

fn report(check: Check, failed: &mut Vec<u8>) {
    println!("{}", check.line());
    if !check.passed {
        failed.push(check.id);
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters: this target has a single unnamed check
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let tier = Tier::Full;
    let mut failed = Vec::new();
    println!("acceptance criteria (full tier)");
    for check in [criterion_1, criterion_2, criterion_3, criterion_4] {
        report(check(tier), &mut failed);
    }
    for check in rate_criteria(tier) {
        report(check, &mut failed);
    }
    report(criterion_8(tier), &mut failed);
    report(criterion_9(tier), &mut failed);
    if failed.is_empty() {
        println!("all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
