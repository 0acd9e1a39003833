//! Multidimensional q-Normal laws `N_d(m, sigma^2, rho | q)` and the modified
//! family `MMN_d(rho | q, t)`.
//!
//! The coordinates form a Markov chain: `X_1` is q-Normal (or `(t,q)`-MN) and
//! `X_{i+1} | X_i = y` has density `f_CN(. | y, rho_i, q)`. Indices in this
//! module are 0-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::densities::{check_rho, f_cn, f_n, phi_gen, AwConditional, CondParams, Support};
use crate::error::{QError, Result};
use crate::qseries::{q_factorial, QParam, TruncationPolicy};

/// Parameters of `N_d`, or of `MMN_d` when `t` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MVQNormalSpec {
    pub d: usize,
    pub m: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub rho: Vec<f64>,
    pub q: QParam,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl MVQNormalSpec {
    pub fn new(m: Vec<f64>, sigma2: Vec<f64>, rho: Vec<f64>, q: QParam) -> Result<Self> {
        let spec = MVQNormalSpec { d: m.len(), m, sigma2, rho, q, t: None };
        spec.validate()?;
        Ok(spec)
    }

    /// Standardized `N_d(0, 1, rho | q)` with `d = rho.len() + 1`.
    pub fn standard(rho: Vec<f64>, q: QParam) -> Result<Self> {
        let d = rho.len() + 1;
        Self::new(vec![0.0; d], vec![1.0; d], rho, q)
    }

    /// `MMN_d(rho | q, t)`; always standardized.
    pub fn modified(rho: Vec<f64>, q: QParam, t: f64) -> Result<Self> {
        let mut spec = Self::standard(rho, q)?;
        spec.t = Some(t);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(QError::ParamOutOfRange("d must be positive".into()));
        }
        if self.m.len() != d || self.sigma2.len() != d || self.rho.len() + 1 != d {
            return Err(QError::ParamOutOfRange(format!(
                "expected {d} means, {d} variances and {} correlations, got {}, {} and {}",
                d - 1,
                self.m.len(),
                self.sigma2.len(),
                self.rho.len()
            )));
        }
        if let Some(s) = self.sigma2.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(QError::ParamOutOfRange(format!("variance {s} must be positive")));
        }
        if self.m.iter().any(|v| !v.is_finite()) {
            return Err(QError::ParamOutOfRange("means must be finite".into()));
        }
        for &r in &self.rho {
            check_rho(r)?;
        }
        if let Some(t) = self.t {
            if (1.0 - self.q.value()) * t * t >= 1.0 {
                return Err(QError::ParamOutOfRange(format!("(1-q) t^2 must be < 1, got t = {t}")));
            }
            if !self.is_standardized() {
                return Err(QError::ParamOutOfRange("MMN_d specs must have m = 0 and sigma2 = 1".into()));
            }
        }
        Ok(())
    }

    pub fn is_standardized(&self) -> bool {
        self.m.iter().all(|v| *v == 0.0) && self.sigma2.iter().all(|v| *v == 1.0)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s).map_err(|e| QError::ParamOutOfRange(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| QError::ParamOutOfRange(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigma2[i].sqrt()
    }

    /// `prod_{k=a}^{b-1} rho_k`, the correlation between standardized `X_a` and `X_b`.
    pub fn rho_between(&self, a: usize, b: usize) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.rho[a..b].iter().product()
    }
}

/// Strictly increasing, nonempty list of 0-based coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(QError::BadIndexSet("index set is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QError::BadIndexSet(format!("indices {indices:?} are not strictly increasing")));
        }
        Ok(IndexSet(indices))
    }

    pub fn all(d: usize) -> Self {
        IndexSet((0..d).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> usize {
        self.0[0]
    }

    pub fn last(&self) -> usize {
        self.0[self.0.len() - 1]
    }

    fn check_within(&self, d: usize) -> Result<()> {
        if self.last() >= d {
            return Err(QError::BadIndexSet(format!("index {} out of range for d = {d}", self.last())));
        }
        Ok(())
    }

    /// Composition: positions `inner` taken from `self`.
    pub fn compose(&self, inner: &IndexSet) -> Result<IndexSet> {
        inner.check_within(self.len())?;
        IndexSet::new(inner.0.iter().map(|&j| self.0[j]).collect())
    }
}

fn standardize(x: &[f64], spec: &MVQNormalSpec) -> Vec<f64> {
    x.iter().enumerate().map(|(i, v)| (v - spec.m[i]) / spec.sigma(i)).collect()
}

/// Joint density of `N_d` (or `MMN_d`); zero outside the box `m + sigma S(q)`.
pub fn joint_density(x: &[f64], spec: &MVQNormalSpec, policy: &TruncationPolicy) -> Result<f64> {
    if x.len() != spec.d {
        return Err(QError::ParamOutOfRange(format!("point has {} coordinates, spec has d = {}", x.len(), spec.d)));
    }
    let z = standardize(x, spec);
    let support = Support::new(spec.q);
    if !z.iter().all(|v| support.contains(*v)) {
        return Ok(0.0);
    }
    let q = spec.q;
    let mut dens = f_n(z[0], q, policy)?;
    if let Some(t) = spec.t {
        dens *= phi_gen(z[0], t, q, policy)?;
    }
    for i in 0..spec.d - 1 {
        if dens == 0.0 {
            return Ok(0.0);
        }
        dens *= f_cn(z[i + 1], &CondParams { y: z[i], rho: spec.rho[i], q }, policy)?;
    }
    let scale: f64 = (0..spec.d).map(|i| spec.sigma(i)).product();
    Ok(dens / scale)
}

/// Law of the coordinates in `keep`.
pub fn marginal(spec: &MVQNormalSpec, keep: &IndexSet) -> Result<MVQNormalSpec> {
    keep.check_within(spec.d)?;
    let idx = keep.indices();
    let rho = idx.windows(2).map(|w| spec.rho_between(w[0], w[1])).collect();
    let t = spec.t.map(|t| t * spec.rho_between(0, idx[0]));
    Ok(MVQNormalSpec {
        d: idx.len(),
        m: idx.iter().map(|&i| spec.m[i]).collect(),
        sigma2: idx.iter().map(|&i| spec.sigma2[i]).collect(),
        rho,
        q: spec.q,
        t,
    })
}

/// `sigma_ij = sigma_i sigma_j prod_{k=i}^{j-1} rho_k`.
pub fn covariance(spec: &MVQNormalSpec) -> Result<DMatrix<f64>> {
    if spec.t.is_some() {
        return Err(QError::ParamOutOfRange("covariance is only defined here for specs without t".into()));
    }
    Ok(DMatrix::from_fn(spec.d, spec.d, |i, j| spec.sigma(i) * spec.sigma(j) * spec.rho_between(i, j)))
}

/// `E(H_n(X_i) | X_past) = r^n H_n(X_anchor)` in standardized coordinates,
/// where `anchor` is the last index of the past.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionScale {
    pub anchor: usize,
    pub r: f64,
    pub n: usize,
    pub scale: f64,
}

impl RegressionScale {
    /// Variance of standardized `X_i` given the past: `1 - r^2`.
    pub fn conditional_variance(&self) -> f64 {
        1.0 - self.r * self.r
    }
}

pub fn cond_expect_qhermite(spec: &MVQNormalSpec, i: usize, past: &IndexSet, n: usize) -> Result<RegressionScale> {
    if i >= spec.d {
        return Err(QError::BadIndexSet(format!("index {i} out of range for d = {}", spec.d)));
    }
    if past.last() >= i {
        return Err(QError::BadIndexSet(format!("past {:?} must precede index {i}", past.indices())));
    }
    let anchor = past.last();
    let r = spec.rho_between(anchor, i);
    Ok(RegressionScale { anchor, r, n, scale: r.powi(n as i32) })
}

/// Maps `sum a_i H_i` to `sum a_i rho^i H_i`, the conditional expectation
/// operator of one Markov step.
pub fn contraction_apply(coeffs: &[f64], rho: f64) -> Result<Vec<f64>> {
    if rho.abs() > 1.0 {
        return Err(QError::ParamOutOfRange(format!("|rho| = {} must be <= 1", rho.abs())));
    }
    let mut p = 1.0;
    Ok(coeffs
        .iter()
        .map(|a| {
            let v = a * p;
            p *= rho;
            v
        })
        .collect())
}

/// Density of `X_i` given `X_left = y` and `X_right = z`, `left < i < right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSidedConditional {
    pub aw: AwConditional,
    pub m: f64,
    pub sigma: f64,
}

impl TwoSidedConditional {
    pub fn density(&self, x: f64, policy: &TruncationPolicy) -> Result<f64> {
        Ok(self.aw.density((x - self.m) / self.sigma, policy)? / self.sigma)
    }
}

pub fn two_sided_conditional(
    spec: &MVQNormalSpec,
    left: usize,
    i: usize,
    right: usize,
    y: f64,
    z: f64,
) -> Result<TwoSidedConditional> {
    if !(left < i && i < right && right < spec.d) {
        return Err(QError::BadIndexSet(format!(
            "need left < i < right < d, got {left}, {i}, {right} with d = {}",
            spec.d
        )));
    }
    let ys = (y - spec.m[left]) / spec.sigma(left);
    let zs = (z - spec.m[right]) / spec.sigma(right);
    let aw = AwConditional::new(ys, zs, spec.rho_between(left, i), spec.rho_between(i, right), spec.q)?;
    Ok(TwoSidedConditional { aw, m: spec.m[i], sigma: spec.sigma(i) })
}

/// Both sides of the generalized Gebelein inequality for a centered
/// `g = sum a_j H_j`: `(sum a_j^2 r^{2j} [j]_q!, r^2 sum a_j^2 [j]_q!)`.
pub fn gebelein_check(spec: &MVQNormalSpec, i: usize, past: &IndexSet, g_coeffs: &[f64]) -> Result<(f64, f64)> {
    let a0 = g_coeffs.first().copied().unwrap_or(0.0);
    let scale = g_coeffs.iter().fold(1.0f64, |m, a| m.max(a.abs()));
    if a0.abs() > 1e-12 * scale {
        return Err(QError::NonCenteredFunction { a0 });
    }
    let r = cond_expect_qhermite(spec, i, past, 1)?.r;
    let r2 = r * r;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let mut r2j = 1.0;
    for (j, a) in g_coeffs.iter().enumerate() {
        let w = a * a * q_factorial(j as u64, spec.q);
        lhs += w * r2j;
        rhs += w;
        r2j *= r2;
    }
    Ok((lhs, r2 * rhs))
}

/// Joint densities from the end of the MMN construction whose marginals are
/// not identified. Evaluation only.
#[cfg(feature = "experimental")]
pub mod experimental {
    use super::*;
    use crate::densities::tau_gen;

    fn chain(x: &[f64], rho: &[f64], q: QParam, t: f64, lead_phi: bool, policy: &TruncationPolicy) -> Result<f64> {
        if x.len() != rho.len() + 1 || x.len() < 2 {
            return Err(QError::ParamOutOfRange("need d >= 2 and d - 1 correlations".into()));
        }
        let s = Support::new(q);
        if !x.iter().all(|v| s.contains(*v)) {
            return Ok(0.0);
        }
        let mut dens = f_n(x[0], q, policy)?;
        if lead_phi {
            dens *= phi_gen(x[0], t, q, policy)?;
        }
        dens *= tau_gen(x[1], t, &CondParams::new(x[0], rho[0], q)?, policy)?;
        for i in 0..rho.len() {
            dens *= f_cn(x[i + 1], &CondParams::new(x[i], rho[i], q)?, policy)?;
        }
        Ok(dens)
    }

    /// `phi(x1,t) f_N(x1) tau(x2,t|x1,rho1) prod f_CN(x_{i+1}|x_i,rho_i)`.
    pub fn phi_tau_chain(x: &[f64], rho: &[f64], q: QParam, t: f64, policy: &TruncationPolicy) -> Result<f64> {
        chain(x, rho, q, t, true, policy)
    }

    /// `f_N(x1) tau(x2,t|x1,rho1) prod f_CN(x_{i+1}|x_i,rho_i)`.
    pub fn tau_chain(x: &[f64], rho: &[f64], q: QParam, t: f64, policy: &TruncationPolicy) -> Result<f64> {
        chain(x, rho, q, t, false, policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::hermite_expand;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn joint_density_reductions() {
        let pol = TruncationPolicy::default();
        let qp = q(0.5);
        let one = MVQNormalSpec::new(vec![0.3], vec![2.0], vec![], qp).unwrap();
        let s = 2f64.sqrt();
        let want = f_n((1.0 - 0.3) / s, qp, &pol).unwrap() / s;
        assert!((joint_density(&[1.0], &one, &pol).unwrap() - want).abs() < 1e-15);

        let two = MVQNormalSpec::standard(vec![0.6], qp).unwrap();
        let (x, y) = (0.4, -0.7);
        let want = f_cn(y, &CondParams::new(x, 0.6, qp).unwrap(), &pol).unwrap() * f_n(x, qp, &pol).unwrap();
        assert!((joint_density(&[x, y], &two, &pol).unwrap() - want).abs() < 1e-15);

        let indep = MVQNormalSpec::standard(vec![0.0, 0.0], qp).unwrap();
        let p = [0.1, 1.2, -2.0];
        let want: f64 = p.iter().map(|v| f_n(*v, qp, &pol).unwrap()).product();
        assert!((joint_density(&p, &indep, &pol).unwrap() - want).abs() < 1e-15);
        assert_eq!(joint_density(&[0.0, 9.0, 0.0], &indep, &pol).unwrap(), 0.0);
    }

    #[test]
    fn marginals() {
        let qp = q(0.3);
        let spec = MVQNormalSpec::new(vec![1.0, 2.0, 3.0], vec![1.0, 4.0, 9.0], vec![0.5, -0.4], qp).unwrap();
        assert_eq!(marginal(&spec, &IndexSet::all(3)).unwrap(), spec);
        let m13 = marginal(&spec, &IndexSet::new(vec![0, 2]).unwrap()).unwrap();
        assert_eq!(m13.rho, vec![0.5 * -0.4]);
        let m2 = marginal(&spec, &IndexSet::new(vec![1]).unwrap()).unwrap();
        assert_eq!((m2.d, m2.m[0], m2.sigma2[0]), (1, 2.0, 4.0));
        assert!(marginal(&spec, &IndexSet::new(vec![3]).unwrap()).is_err());
        assert!(IndexSet::new(vec![2, 1]).is_err());

        let mmn = MVQNormalSpec::modified(vec![0.5, 0.6], qp, 0.4).unwrap();
        let last = marginal(&mmn, &IndexSet::new(vec![2]).unwrap()).unwrap();
        assert!((last.t.unwrap() - 0.4 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn covariance_product_rule() {
        let spec = MVQNormalSpec::standard(vec![0.5, -0.4], q(0.5)).unwrap();
        let c = covariance(&spec).unwrap();
        assert!((c[(0, 2)] + 0.2).abs() < 1e-15);
        assert_eq!(c[(0, 2)], c[(2, 0)]);
        assert_eq!(c[(1, 1)], 1.0);
    }

    #[test]
    fn regression_scale() {
        let spec = MVQNormalSpec::standard(vec![0.5, 0.6], q(0.5)).unwrap();
        let r = cond_expect_qhermite(&spec, 2, &IndexSet::new(vec![0]).unwrap(), 2).unwrap();
        assert!((r.scale - 0.09).abs() < 1e-15);
        assert!((r.conditional_variance() - 0.91).abs() < 1e-15);
        assert_eq!(cond_expect_qhermite(&spec, 1, &IndexSet::new(vec![0]).unwrap(), 0).unwrap().scale, 1.0);
        assert!(cond_expect_qhermite(&spec, 1, &IndexSet::new(vec![1]).unwrap(), 1).is_err());
    }

    #[test]
    fn contraction() {
        let h = hermite_expand(&[0.0, 0.0, 0.0, 1.0], q(0.5)).unwrap();
        assert_eq!(h, vec![0.0, 2.5, 0.0, 1.0]);
        assert_eq!(contraction_apply(&h, 0.5).unwrap(), vec![0.0, 1.25, 0.0, 0.125]);
        assert_eq!(contraction_apply(&h, 1.0).unwrap(), h);
        assert_eq!(contraction_apply(&h, 0.0).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn gebelein_examples() {
        let spec = MVQNormalSpec::standard(vec![0.5], q(0.5)).unwrap();
        let past = IndexSet::new(vec![0]).unwrap();
        let (l, r) = gebelein_check(&spec, 1, &past, &[0.0, 1.0]).unwrap();
        assert!((l - r).abs() < 1e-15);
        let (l, r) = gebelein_check(&spec, 1, &past, &[0.0, 0.0, 1.0]).unwrap();
        assert!((l - 0.09375).abs() < 1e-15 && (r - 0.375).abs() < 1e-15);
        assert!(matches!(gebelein_check(&spec, 1, &past, &[0.5, 1.0]), Err(QError::NonCenteredFunction { .. })));
    }

    #[test]
    fn two_sided_delegates() {
        let spec = MVQNormalSpec::standard(vec![0.5, -0.3], q(0.4)).unwrap();
        let c = two_sided_conditional(&spec, 0, 1, 2, 0.2, 0.4).unwrap();
        assert_eq!(c.aw, AwConditional::new(0.2, 0.4, 0.5, -0.3, q(0.4)).unwrap());
        assert!(two_sided_conditional(&spec, 1, 1, 2, 0.2, 0.4).is_err());
    }

    #[test]
    fn spec_documents() {
        let s = MVQNormalSpec::from_toml("d = 2\nm = [0.0, 0.0]\nsigma2 = [1.0, 1.0]\nrho = [0.6]\nq = 0.5\n").unwrap();
        assert_eq!(s, MVQNormalSpec::standard(vec![0.6], q(0.5)).unwrap());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(MVQNormalSpec::from_json(&json).unwrap(), s);
        assert!(MVQNormalSpec::from_toml("d = 2\nm = [0.0, 0.0]\nsigma2 = [1.0, 1.0]\nrho = [1.2]\nq = 0.5\n").is_err());
    }
}
