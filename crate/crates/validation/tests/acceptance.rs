//! Prints one PASS/FAIL line per acceptance criterion; exits nonzero when any
//! criterion fails or cannot run.

use std::process::ExitCode;
use std::time::Instant;

use embedleak_validation::{Outcome, CRITERIA};

fn main() -> ExitCode {
    let mut failed = 0;
    for (name, check) in CRITERIA {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
            Outcome::Blocked(d) => {
                failed += 1;
                println!("FAIL {name}: blocked: {d}");
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
