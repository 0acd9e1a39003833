//! Marginal, conditional and modified q-Normal densities on a grid.
//!
//!     cargo run --example densities

use qnormal::densities::{f_cn, f_mn, f_n, CondParams, Support};
use qnormal::quadrature::{integrate, QuadratureSpec};
use qnormal::{QParam, TruncationPolicy};

fn main() -> qnormal::Result<()> {
    let policy = TruncationPolicy::default();
    for q in [-0.7, 0.0, 0.5, 0.9, 1.0] {
        let q = QParam::new(q)?;
        let support = Support::new(q);
        let total = integrate(|x| f_n(x, q, &policy).unwrap_or(f64::NAN), &QuadratureSpec::new(q))?;
        let half = if support.is_bounded() { format!("{:.4}", q.support_half_width()) } else { "inf".into() };
        println!(
            "q = {:>4}: support half-width {half:>6}, f_N(0) = {:.6}, integral = {:.12}",
            q.value(),
            f_n(0.0, q, &policy)?,
            total.value
        );
    }

    let q = QParam::new(0.5)?;
    let cond = CondParams::new(1.0, 0.6, q)?;
    let mean = integrate(|x| x * f_cn(x, &cond, &policy).unwrap_or(f64::NAN), &QuadratureSpec::new(q))?;
    println!("E(X | Y = 1) at rho = 0.6, q = 0.5: {:.12} (rho y = 0.6)", mean.value);

    let l = q.support_half_width();
    println!("\n     x     f_N    f_CN   f_MN(t=0.4)");
    for k in 0..=8 {
        let x = -l + 2.0 * l * k as f64 / 8.0;
        println!(
            "{x:>6.3}  {:.4}  {:.4}  {:.4}",
            f_n(x, q, &policy)?,
            f_cn(x, &cond, &policy)?,
            f_mn(x, 0.4, q, &policy)?
        );
    }
    Ok(())
}
