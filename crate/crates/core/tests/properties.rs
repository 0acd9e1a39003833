use proptest::prelude::*;

use qnormal::densities::{f_cn, f_n, CondParams};
use qnormal::expansions::{solve_a, ACoeffTable, ARoute};
use qnormal::multivariate::{contraction_apply, MVQNormalSpec};
use qnormal::orthopoly::{eval_hermite_series, hermite_expand, hermite_to_monomial, linearize, q_hermite};
use qnormal::qseries::{q_binomial, q_factorial, q_number};
use qnormal::{QParam, TruncationPolicy};

/// Gaussian binomial coefficients as integer polynomials in q, built with the
/// q-Pascal rule `[n,k] = [n-1,k-1] + q^k [n-1,k]`.
fn pascal_polys(n_max: usize) -> Vec<Vec<Vec<i128>>> {
    let mut t: Vec<Vec<Vec<i128>>> = vec![vec![vec![1]]];
    for n in 1..=n_max {
        let mut row = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let deg = k * (n - k);
            let mut p = vec![0i128; deg + 1];
            if k >= 1 {
                for (i, c) in t[n - 1][k - 1].iter().enumerate() {
                    p[i] += c;
                }
            }
            if k < n {
                for (i, c) in t[n - 1][k].iter().enumerate() {
                    p[i + k] += c;
                }
            }
            row.push(p);
        }
        t.push(row);
    }
    t
}

fn horner(p: &[i128], q: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * q + c as f64)
}

fn qp(q: f64) -> QParam {
    QParam::new(q).unwrap()
}

fn policy() -> TruncationPolicy {
    TruncationPolicy::default()
}

#[test]
fn gaussian_binomials_match_pascal_polynomials() {
    let table = pascal_polys(24);
    for &q in &[-0.9, -0.5, -0.1, 0.0, 0.3, 0.5, 0.8, 0.95, 1.0] {
        for n in 0..=24 {
            for k in 0..=n {
                let exact = horner(&table[n][k], q);
                let got = q_binomial(n as i64, k as i64, qp(q));
                assert!(
                    (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                    "q={q} n={n} k={k}: {got} vs {exact}"
                );
            }
        }
    }
    // at q = 1 the polynomial coefficients sum to the ordinary binomial
    assert_eq!(table[10][4].iter().sum::<i128>(), 210);
    assert_eq!(q_binomial(3, 5, qp(0.5)), 0.0);
    assert_eq!(q_binomial(3, -1, qp(0.5)), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_factorial_is_product_of_q_numbers(q in -0.99f64..1.0, n in 0u64..30) {
        let q = qp(q);
        let prod: f64 = (1..=n).map(|k| q_number(k, q)).product();
        let f = q_factorial(n, q);
        prop_assert!((f - prod).abs() <= 1e-12 * prod.abs().max(1.0));
    }

    #[test]
    fn binomial_symmetry(q in -0.99f64..1.0, n in 0i64..40, k in 0i64..40) {
        prop_assume!(k <= n);
        let q = qp(q);
        let a = q_binomial(n, k, q);
        let b = q_binomial(n, n - k, q);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn hermite_basis_round_trip(q in -0.95f64..1.0, coeffs in prop::collection::vec(-3.0f64..3.0, 1..12)) {
        let q = qp(q);
        let h = hermite_expand(&coeffs, q).unwrap();
        let back = hermite_to_monomial(&h, q).unwrap();
        for (a, b) in coeffs.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let x = 0.37;
        let mono: f64 = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        prop_assert!((eval_hermite_series(&h, x, q) - mono).abs() < 1e-9 * mono.abs().max(1.0));
    }

    #[test]
    fn linearization_matches_products(q in -0.95f64..1.0, n in 0usize..7, m in 0usize..7, u in -1.0f64..1.0) {
        let q = qp(q);
        let x = if q.is_classical() { 3.0 * u } else { u * q.support_half_width() };
        let table = linearize(n, m, q);
        let lhs = q_hermite(n, x, q) * q_hermite(m, x, q);
        let rhs = table.eval(x, q);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn q_normal_density_is_symmetric_and_nonnegative(q in -0.99f64..0.99, u in -1.0f64..1.0) {
        let q = qp(q);
        let x = u * q.support_half_width();
        let a = f_n(x, q, &policy()).unwrap();
        let b = f_n(-x, q, &policy()).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-13 * a.max(1e-300));
    }

    #[test]
    fn conditional_density_reflection(q in -0.9f64..0.9, rho in -0.95f64..0.95, u in -1.0f64..1.0, v in -1.0f64..1.0) {
        let q = qp(q);
        let l = q.support_half_width();
        let (x, y) = (u * l, v * l);
        let a = f_cn(x, &CondParams::new(y, rho, q).unwrap(), &policy()).unwrap();
        let b = f_cn(-x, &CondParams::new(-y, rho, q).unwrap(), &policy()).unwrap();
        let c = f_cn(-x, &CondParams::new(y, -rho, q).unwrap(), &policy()).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-11 * a.max(1.0));
        prop_assert!((a - c).abs() <= 1e-11 * a.max(1.0));
    }

    #[test]
    fn contraction_preserves_degree_and_composes(coeffs in prop::collection::vec(-2.0f64..2.0, 1..10), r1 in -1.0f64..1.0, r2 in -1.0f64..1.0) {
        let once = contraction_apply(&coeffs, r1 * r2).unwrap();
        let twice = contraction_apply(&contraction_apply(&coeffs, r1).unwrap(), r2).unwrap();
        prop_assert_eq!(once.len(), coeffs.len());
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-14);
        }
        prop_assert_eq!(once[0], coeffs[0]);
    }

    #[test]
    fn spec_serde_round_trip(q in -0.99f64..1.0, rho in prop::collection::vec(-0.99f64..0.99, 1..5), t in prop::option::of(-0.7f64..0.7)) {
        let mut spec = MVQNormalSpec::standard(rho, qp(q)).unwrap();
        spec.t = t;
        let json = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(&MVQNormalSpec::from_json(&json).unwrap(), &spec);
        let qj = serde_json::to_string(&spec.q).unwrap();
        prop_assert_eq!(serde_json::from_str::<QParam>(&qj).unwrap(), spec.q);
    }
}

#[test]
fn qparam_rejects_out_of_range_on_deserialize() {
    assert!(serde_json::from_str::<QParam>("1.5").is_err());
    assert!(serde_json::from_str::<QParam>("-1.0").is_err());
    assert!(QParam::new(f64::NAN).is_err());
}

#[test]
fn coefficient_table_serde_round_trip() {
    let table = solve_a(3, 0.5, -0.4, qp(0.3), ARoute::LinearSystem).unwrap();
    let json = serde_json::to_string(&table).unwrap();
    let back: ACoeffTable = serde_json::from_str(&json).unwrap();
    assert_eq!(back, table);
}

#[test]
fn contraction_rejects_rho_beyond_one() {
    assert!(contraction_apply(&[1.0, 2.0], 1.01).is_err());
}
