//! The conditional density as a q-Hermite series against its product form.
//!
//!     cargo run --release --example poisson_mehler

use qnormal::densities::{f_cn, f_cn_poisson_mehler, CondParams};
use qnormal::{QParam, TruncationPolicy};

fn main() -> qnormal::Result<()> {
    let policy = TruncationPolicy::default();
    for (rho, q) in [(0.5, 0.5), (-0.5, 0.5), (0.3, -0.6), (0.9, 0.2)] {
        let q = QParam::new(q)?;
        let l = q.support_half_width();
        let cond = CondParams::new(0.4 * l, rho, q)?;
        let mut worst = 0.0f64;
        let mut terms = 0;
        for k in 0..=20 {
            let x = -l + 2.0 * l * k as f64 / 20.0;
            let (series, n) = f_cn_poisson_mehler(x, &cond, 1e-12, 5000)?;
            worst = worst.max((series - f_cn(x, &cond, &policy)?).abs());
            terms = terms.max(n);
        }
        println!("rho = {rho:>4}, q = {:>4}: max difference {worst:.2e} using up to {terms} terms", q.value());
    }
    Ok(())
}
