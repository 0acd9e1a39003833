//! q-numbers, Gaussian binomials and infinite q-Pochhammer symbols.
//!
//!     cargo run --example qseries

use qnormal::qseries::{hermite_sup_constants, q_binomial, q_factorial, q_number, q_pochhammer_inf, w_bound};
use qnormal::QParam;

fn main() -> qnormal::Result<()> {
    for q in [-0.5, 0.0, 0.5, 1.0] {
        let q = QParam::new(q)?;
        let row: Vec<String> = (0..=6).map(|k| format!("{:.4}", q_binomial(6, k, q))).collect();
        println!("q = {:>4}: [5]_q = {:.4}  [5]_q! = {:.4}  [6 over k]_q = {}", q.value(), q_number(5, q), q_factorial(5, q), row.join(" "));
    }

    let q = QParam::new(0.7)?;
    for a in [0.3, -0.3, 0.9] {
        println!("(a; q)_inf at a = {a:>4}, q = 0.7: {:.12}", q_pochhammer_inf(a, q)?);
    }

    // W_n(q) uses signed binomials; the absolute sums bound H_n for every q
    let q = QParam::new(-0.6)?;
    let sup = hermite_sup_constants(8, q);
    for n in [2, 4, 8] {
        println!("n = {n}: W_n(-0.6) = {:.4}, sum |[n over i]| = {:.4}", w_bound(n as u64, q), sup[n]);
    }

    // q = 0.9995 needs more factors than the default policy allows
    match q_pochhammer_inf(0.5, QParam::new(0.9995)?) {
        Ok(v) => println!("(0.5; 0.9995)_inf = {v:e}"),
        Err(e) => println!("q = 0.9995: {e}"),
    }
    Ok(())
}
