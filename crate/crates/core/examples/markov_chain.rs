//! A multivariate q-Normal chain: joint density, marginals, covariance and
//! the two-sided conditional.
//!
//!     cargo run --example markov_chain

use qnormal::multivariate::{
    cond_expect_qhermite, covariance, joint_density, marginal, two_sided_conditional, IndexSet, MVQNormalSpec,
};
use qnormal::{QParam, TruncationPolicy};

fn main() -> qnormal::Result<()> {
    let policy = TruncationPolicy::default();
    let spec = MVQNormalSpec::new(vec![1.0, -2.0, 0.5, 0.0], vec![4.0, 0.25, 1.0, 2.0], vec![0.6, -0.5, 0.8], QParam::new(0.3)?)?;
    println!("spec: {}", serde_json::to_string(&spec).unwrap());
    println!("covariance:\n{}", covariance(&spec)?);

    let x = [1.5, -1.9, 0.2, 0.4];
    println!("joint density at {x:?}: {:.6e}", joint_density(&x, &spec, &policy)?);

    let ends = marginal(&spec, &IndexSet::new(vec![0, 3])?)?;
    println!("marginal of X_0, X_3: rho = {:?}", ends.rho);

    let reg = cond_expect_qhermite(&spec, 3, &IndexSet::new(vec![0, 1])?, 2)?;
    println!("E(H_2(X_3) | X_0, X_1) = {:.4} H_2(X_{})", reg.scale, reg.anchor);

    let cond = two_sided_conditional(&spec, 0, 1, 2, 1.8, 0.9)?;
    println!("X_1 | X_0 = 1.8, X_2 = 0.9: standardized mean {:.6}", cond.aw.mean());
    for v in [-2.4, -2.0, -1.6] {
        println!("  density at {v:>4}: {:.6}", cond.density(v, &policy)?);
    }
    Ok(())
}
