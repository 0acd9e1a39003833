use qnormal::densities::{f_cn, CondParams};
use qnormal::multivariate::{covariance, joint_density, marginal, two_sided_conditional, IndexSet, MVQNormalSpec};
use qnormal::quadrature::{double_integrate, integrate, CdfTable, QuadratureSpec};
use qnormal::sampling::{ks_critical_1pct, ks_statistic, sample_chain, sample_fcn, SamplerConfig};
use qnormal::{QParam, TruncationPolicy};

fn qp(q: f64) -> QParam {
    QParam::new(q).unwrap()
}

fn pol() -> TruncationPolicy {
    TruncationPolicy::default()
}

fn shifted_spec() -> MVQNormalSpec {
    MVQNormalSpec::new(vec![1.0, -2.0, 0.5], vec![4.0, 0.25, 1.0], vec![0.6, -0.5], qp(0.3)).unwrap()
}

#[test]
fn chain_draws_have_the_specified_moments() {
    let spec = shifted_spec();
    let n = 40_000;
    let batch = sample_chain(&spec, n, &SamplerConfig::with_seed(2024)).unwrap();
    assert_eq!(batch.d, 3);
    assert_eq!(batch.draws.len(), 3 * n);
    let se = 1.0 / (n as f64).sqrt();
    let q = spec.q.value();
    for i in 0..3 {
        let s2 = spec.sigma2[i];
        assert!((batch.mean(i) - spec.m[i]).abs() < 4.0 * s2.sqrt() * se, "mean {i}: {}", batch.mean(i));
        // sd of X^2 for a standardized q-Normal is sqrt(E X^4 - 1) = sqrt(1 + q)
        assert!((batch.variance(i) - s2).abs() < 4.0 * s2 * (1.0 + q).sqrt() * se, "variance {i}: {}", batch.variance(i));
    }
    let cov = covariance(&spec).unwrap();
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let r = cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
        assert!((batch.correlation(i, j) - r).abs() < 4.0 * se, "corr {i}{j}: {} vs {r}", batch.correlation(i, j));
    }
    assert!(batch.acceptance_rates.iter().all(|r| *r > 0.0 && *r <= 1.0));
}

#[test]
fn marginals_compose() {
    let spec = MVQNormalSpec::modified(vec![0.7, -0.4, 0.5, 0.9], qp(-0.2), 0.3).unwrap();
    let outer = IndexSet::new(vec![1, 2, 4]).unwrap();
    let inner = IndexSet::new(vec![0, 2]).unwrap();
    let two_step = marginal(&marginal(&spec, &outer).unwrap(), &inner).unwrap();
    let direct = marginal(&spec, &outer.compose(&inner).unwrap()).unwrap();
    assert_eq!(two_step.d, direct.d);
    assert_eq!(two_step.m, direct.m);
    assert_eq!(two_step.sigma2, direct.sigma2);
    for (a, b) in two_step.rho.iter().zip(&direct.rho) {
        assert!((a - b).abs() <= 1e-14 * b.abs());
    }
    assert!((two_step.t.unwrap() - direct.t.unwrap()).abs() <= 1e-14);
    assert!(marginal(&spec, &IndexSet::new(vec![0, 5]).unwrap()).is_err());
}

#[test]
fn bivariate_density_integrates_to_one() {
    for (rho, q) in [(0.5, 0.8), (-0.6, -0.7), (0.3, 0.0)] {
        let spec = MVQNormalSpec::standard(vec![rho], qp(q)).unwrap();
        let total = double_integrate(
            |x, y| joint_density(&[x, y], &spec, &pol()).unwrap(),
            &QuadratureSpec::new(qp(q)).with_tol(1e-10, 1e-10),
        )
        .unwrap();
        assert!((total.value - 1.0).abs() < 1e-8, "rho={rho} q={q}: {}", total.value);
    }
}

#[test]
fn two_sided_conditional_is_a_ratio_of_joint_densities() {
    let spec = shifted_spec();
    let (y, z) = (1.8, 0.9);
    let cond = two_sided_conditional(&spec, 0, 1, 2, y, z).unwrap();
    let ends = marginal(&spec, &IndexSet::new(vec![0, 2]).unwrap()).unwrap();
    let denom = joint_density(&[y, z], &ends, &pol()).unwrap();
    let sigma = spec.sigma(1);
    let l = spec.q.support_half_width();
    for u in [-0.9, -0.4, 0.0, 0.35, 0.8] {
        let x = spec.m[1] + sigma * u * l;
        let ratio = joint_density(&[y, x, z], &spec, &pol()).unwrap() / denom;
        let got = cond.density(x, &pol()).unwrap();
        assert!((got - ratio).abs() < 1e-9 * ratio.max(1.0), "x={x}: {got} vs {ratio}");
    }
    // the conditional integrates to one in standardized units
    let std_total = integrate(|s| cond.aw.density(s, &pol()).unwrap(), &QuadratureSpec::new(spec.q)).unwrap();
    assert!((std_total.value - 1.0).abs() < 1e-9);
    assert!(two_sided_conditional(&spec, 1, 0, 2, y, z).is_err());
}

#[test]
fn conditional_draws_pass_ks() {
    let n = 5000;
    for (y, rho, q) in [(1.0, 0.6, 0.5), (-0.5, -0.4, -0.3)] {
        let q = qp(q);
        let draws = sample_fcn(y, rho, q, n, &SamplerConfig::with_seed(99)).unwrap();
        let cond = CondParams::new(y, rho, q).unwrap();
        let table = CdfTable::new(|x| f_cn(x, &cond, &pol()).unwrap_or(f64::NAN), &QuadratureSpec::new(q), 64).unwrap();
        assert!((table.total() - 1.0).abs() < 1e-10);
        let d = ks_statistic(&draws, |x| table.cdf(x));
        assert!(d < ks_critical_1pct(n), "y={y} rho={rho}: D = {d}");
    }
}
