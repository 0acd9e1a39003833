//! Rejection sampling of q-Normal draws and of whole chains.
//!
//!     cargo run --release --example sampling

use qnormal::multivariate::MVQNormalSpec;
use qnormal::sampling::{envelope_constant, sample_chain, sample_qnormal, SamplerConfig};
use qnormal::QParam;

fn main() -> qnormal::Result<()> {
    let config = SamplerConfig::with_seed(42);
    let q = QParam::new(0.5)?;
    let xs = sample_qnormal(q, 20_000, &config)?;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / xs.len() as f64;
    println!("q = 0.5: E X^2 = {m2:.4} (1), E X^4 = {m4:.4} (2 + q = 2.5)");

    for (rho, q) in [(0.6, 0.5), (-0.6, 0.5), (0.7, -0.6)] {
        println!("envelope constant at rho = {rho}, q = {q}: {:.3}", envelope_constant(rho, QParam::new(q)?)?);
    }

    let spec = MVQNormalSpec::standard(vec![0.6, 0.5], q)?;
    let batch = sample_chain(&spec, 20_000, &config)?;
    println!("chain correlations: {:.4} {:.4} {:.4} (0.6, 0.5, 0.3)", batch.correlation(0, 1), batch.correlation(1, 2), batch.correlation(0, 2));
    println!("acceptance rates per stage: {:?}", batch.acceptance_rates);
    for d in &batch.diagnostics {
        println!("note: {d}");
    }
    Ok(())
}
