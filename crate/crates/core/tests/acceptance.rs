//! Runs every acceptance criterion at its stated tolerance and prints one
//! PASS/FAIL line per criterion, followed by the individual comparisons.

use std::process::ExitCode;
use std::time::Instant;

use h4bp::acceptance::{run, Criterion};

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut all_pass = true;
    for criterion in Criterion::ALL {
        if !filter.is_empty() && !filter.iter().any(|f| criterion.name().contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let report = run(criterion);
        println!("{report} [{:.1?}]", start.elapsed());
        for c in &report.checks {
            println!(
                "    {} {:<40} value {:>+.10e}  expected {:>+.10e}  tolerance {:.1e}",
                if c.pass { "ok  " } else { "FAIL" },
                c.label,
                c.value,
                c.expected,
                c.tolerance
            );
        }
        all_pass &= report.pass();
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
