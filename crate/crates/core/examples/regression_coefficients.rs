//! Coefficients of E(H_n(X_i) | X_{i-1}, X_{i+1}) by two routes, the
//! two-sided conditional variance, and the conjecture probe.
//!
//!     cargo run --release --example regression_coefficients

use qnormal::expansions::{cond_var_two_sided, conjecture_probe, solve_a, ARoute};
use qnormal::QParam;

fn main() -> qnormal::Result<()> {
    let (rl, rr, q) = (0.5, 0.4, QParam::new(0.5)?);
    for n in 1..=4 {
        let sys = solve_a(n, rl, rr, q, ARoute::LinearSystem)?;
        let fit = solve_a(n, rl, rr, q, ARoute::InterpolationOracle)?;
        println!("n = {n}: {} coefficients, routes differ by {:.1e}", sys.entries.len(), sys.max_difference(&fit));
        for ((r, s), a) in &sys.entries {
            println!("  A[{r},{s:>2}] = {a:>12.8}");
        }
    }

    let cv = cond_var_two_sided(0.3, -0.1, rl, rr, q)?;
    println!("conditional variance at (0.3, -0.1): oracle {:.10}, derived {:.10}", cv.oracle, cv.derived);
    println!("forms within 1e-9 of the oracle: {:?}", cv.matching(1e-9));

    let probe = conjecture_probe(5, rl, rr, q)?;
    for e in probe.entries.iter().filter(|e| e.r == 1) {
        println!("n = 5, r = 1, s = {:>2}, {} reading: spread {:.2e}", e.s, e.reading, e.spread);
    }
    Ok(())
}
