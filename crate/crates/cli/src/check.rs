//! `gsopt check`: the verification suites.

use gsopt_core::verify::{run_all, run_suite, CheckOptions, SuiteReport};

use crate::failure::{CliResult, Failure};

pub fn format_report(r: &SuiteReport) -> String {
    format!(
        "{:<13} {}  max residual {:.3e}  tolerance {:.1e}  cases {}",
        r.name,
        if r.passed { "PASS" } else { "FAIL" },
        r.max_residual,
        r.tolerance,
        r.cases
    )
}

/// Runs one suite or all of them, printing a line per suite.
pub fn cmd_check(suite: Option<&str>, opts: &CheckOptions) -> CliResult<Vec<SuiteReport>> {
    let reports = match suite {
        Some(name) => vec![run_suite(name, opts)?],
        None => run_all(opts)?,
    };
    for r in &reports {
        println!("{}", format_report(r));
    }
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(Failure::Check(failed.join(", ")))
    }
}
