//! The two-sided conditional density and its q-Hermite expansion.
//!
//!     cargo run --release --example askey_wilson_expansion

use qnormal::densities::AwConditional;
use qnormal::expansions::{expansion_partial_sum, g_n_quadrature_all, g_n_table};
use qnormal::{QParam, TruncationPolicy};

fn main() -> qnormal::Result<()> {
    let policy = TruncationPolicy::default();
    let (rho1, rho2, q) = (0.5, 0.4, QParam::new(0.5)?);
    let (y, z) = (0.3, -0.8);
    let aw = AwConditional::new(y, z, rho1, rho2, q)?;

    let g = g_n_table(30, &aw)?;
    let oracle = g_n_quadrature_all(6, y, z, rho1, rho2, q)?;
    println!(" n   g_n (G-functions)   g_n (quadrature)");
    for n in 0..=6 {
        println!("{n:>2}   {:>17.12}   {:>16.12}", g[n], oracle[n]);
    }

    let x = 0.1;
    let exact = aw.density(x, &policy)?;
    for big_n in [6, 12, 20, 30] {
        let s = expansion_partial_sum(x, &g[..=big_n], q)?;
        println!("N = {big_n:>2}: partial sum {s:.12}, error {:.1e}", (s - exact).abs());
    }
    Ok(())
}
