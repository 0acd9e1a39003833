//! The fifteen acceptance criteria, run at their stated tolerances through the
//! verification suite. Prints one PASS/FAIL line per criterion.
//!
//! Two parts are known to fail and are listed in `KNOWN_FAILURES`; the target
//! exits non-zero if the set of failing parts differs from that list in
//! either direction, or if any check is skipped.

use std::process::ExitCode;

use qnormal::verify::{run, Status, VerifyOptions};

const CRITERIA: [(u8, &str, &[&str]); 15] = [
    (1, "orthogonality of q-Hermite polynomials", &["orthogonality"]),
    (2, "projection onto f_CN", &["projection"]),
    (3, "Al-Salam-Chihara norms", &["al-salam-chihara"]),
    (4, "Chapman-Kolmogorov", &["chapman-kolmogorov"]),
    (5, "generating-function normalizations", &["generating-functions"]),
    (6, "Poisson-Mehler on a 21x21 grid", &["poisson-mehler"]),
    (7, "MN moments", &["mn-moments"]),
    (8, "MCN moments", &["mcn-moments"]),
    (9, "G-recursions", &["g-recursions"]),
    (10, "two-sided expansion and g_n routes", &["aw-expansion", "gn-dual-route"]),
    (11, "A-coefficients", &["a-coefficients"]),
    (12, "two-sided conditional variance", &["conditional-variance"]),
    (13, "Gebelein inequality", &["gebelein"]),
    (14, "sampling", &["sampling"]),
    (15, "q -> 1 continuity", &["q-limit"]),
];

/// (check id, part-name prefix) of the parts expected to fail.
const KNOWN_FAILURES: [(&str, &str); 2] = [
    // The printed fourth central moment is not a moment of the (t,q)-MN law.
    ("mn-moments", "fourth central, printed form"),
    // Twelve terms of the expansion leave ~1e-2 truncation error near the edges.
    ("aw-expansion", "12 terms"),
];

fn main() -> ExitCode {
    let report = match run(&VerifyOptions { seed: 20_240_601, ..Default::default() }) {
        Ok(r) => r,
        Err(e) => {
            println!("verification suite could not start: {e}");
            return ExitCode::FAILURE;
        }
    };

    let mut failing = Vec::new();
    let mut problems = Vec::new();
    for c in &report.checks {
        if c.status == Status::Skipped {
            problems.push(format!("{} skipped: {}", c.id, c.reason.as_deref().unwrap_or("")));
        }
        if c.status == Status::Fail && c.parts.iter().all(|p| p.passed()) {
            problems.push(format!("{} failed: {}", c.id, c.reason.as_deref().unwrap_or("")));
        }
        for p in c.parts.iter().filter(|p| !p.passed()) {
            failing.push((c.id.clone(), p.name.clone()));
        }
    }

    for (num, title, ids) in CRITERIA {
        let checks: Vec<_> = ids.iter().map(|id| report.check(id).expect("criterion check exists")).collect();
        let ok = checks.iter().all(|c| c.status == Status::Pass);
        let bad: Vec<String> = checks
            .iter()
            .flat_map(|c| c.parts.iter().filter(|p| !p.passed()))
            .map(|p| format!("{}: {:.3e} > {:.1e}", p.name, p.error, p.tolerance))
            .collect();
        let secs: f64 = checks.iter().map(|c| c.seconds).sum();
        let verdict = if ok { "PASS" } else { "FAIL" };
        if bad.is_empty() {
            println!("criterion {num:>2} {verdict}  {title}  ({secs:.2}s)");
        } else {
            println!("criterion {num:>2} {verdict}  {title}  ({secs:.2}s)  [{}]", bad.join("; "));
        }
    }
    for c in report.checks.iter().filter(|c| !CRITERIA.iter().any(|(_, _, ids)| ids.contains(&c.id.as_str()))) {
        let verdict = if c.status == Status::Pass { "PASS" } else { "FAIL" };
        println!("extra        {verdict}  {}", c.id);
    }

    for (id, prefix) in KNOWN_FAILURES {
        if !failing.iter().any(|(i, n)| i == id && n.starts_with(prefix)) {
            problems.push(format!("expected failure of {id} / {prefix} did not occur"));
        }
    }
    for (id, name) in &failing {
        if !KNOWN_FAILURES.iter().any(|(i, p)| i == id && name.starts_with(p)) {
            problems.push(format!("unexpected failure: {id} / {name}"));
        }
    }

    if problems.is_empty() {
        println!("acceptance: failures match the documented set ({} parts)", failing.len());
        ExitCode::SUCCESS
    } else {
        for p in &problems {
            println!("acceptance problem: {p}");
        }
        ExitCode::FAILURE
    }
}
