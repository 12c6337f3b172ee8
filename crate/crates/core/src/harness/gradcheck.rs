use std::fmt::Write as _;

use crate::nn::{layer_suite, CheckResult, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
use crate::nrx::end_to_end_gradcheck;
use crate::Result;

/// Every layer check followed by the end-to-end tiny-model check. With
/// `corrupt` set, backward passes are deliberately wrong and every check
/// must fail.
pub fn run_gradcheck(seed: u64, corrupt: bool) -> Result<Vec<CheckResult>> {
    let mut results = layer_suite(seed, corrupt)?;
    results.push(end_to_end_gradcheck(seed, corrupt)?);
    Ok(results)
}

pub fn gradcheck_report(results: &[CheckResult]) -> String {
    let mut s = format!("# central differences, h = {GRADCHECK_STEP:e}, tolerance {GRADCHECK_TOLERANCE:e}\n");
    for r in results {
        let _ = writeln!(
            s,
            "{:<24} {:.3e} {}",
            r.name,
            r.max_rel_error,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    let _ = writeln!(s, "{} of {} checks passed", results.len() - failed, results.len());
    s
}
