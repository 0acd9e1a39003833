//! q-combinatorial primitives: q-numbers, q-factorials, Gaussian binomials,
//! q-Pochhammer symbols and the `W_n(q)` bound constants.
//!
//! Infinite products are truncated under a [`TruncationPolicy`]. A product
//! `prod_k (1 + c_k q^k)` whose factors approach one geometrically is cut at the
//! first index `K >= min_terms` with `|c| |q|^K < tail_tol (1 - |q|)`, which bounds
//! the relative error of the discarded tail by roughly `tail_tol`.

use serde::{Deserialize, Serialize};

use crate::error::{QError, Result};

/// Largest `|q|` accepted by any infinite product.
pub const MAX_INFINITE_Q: f64 = 0.9995;

/// Deformation parameter `q` in `(-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct QParam(f64);

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > -1.0 && q <= 1.0) {
            return Err(QError::ParamOutOfRange(format!("q = {q} must lie in (-1, 1]")));
        }
        Ok(QParam(q))
    }

    /// The classical (Gaussian) case `q = 1`.
    pub fn classical() -> Self {
        QParam(1.0)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }

    /// Half-width `2 / sqrt(1 - q)` of the support; infinite at `q = 1`.
    pub fn support_half_width(self) -> f64 {
        if self.is_classical() {
            f64::INFINITY
        } else {
            2.0 / (1.0 - self.0).sqrt()
        }
    }
}

impl<'de> Deserialize<'de> for QParam {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = f64::deserialize(d)?;
        QParam::new(q).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<f64> for QParam {
    type Error = QError;
    fn try_from(q: f64) -> Result<Self> {
        QParam::new(q)
    }
}

/// Controls for truncating infinite products and series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub tail_tol: f64,
    pub max_terms: usize,
    pub min_terms: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { tail_tol: 1e-15, max_terms: 20_000, min_terms: 8 }
    }
}

impl TruncationPolicy {
    pub fn new(tail_tol: f64, max_terms: usize, min_terms: usize) -> Result<Self> {
        let p = TruncationPolicy { tail_tol, max_terms, min_terms };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(QError::ParamOutOfRange(format!("tail_tol = {} must lie in (0, 1)", self.tail_tol)));
        }
        if self.min_terms == 0 || self.min_terms > self.max_terms {
            return Err(QError::ParamOutOfRange(format!(
                "need 0 < min_terms <= max_terms, got {} and {}",
                self.min_terms, self.max_terms
            )));
        }
        Ok(())
    }

    /// Number of factors `K` to keep in a product whose `k`-th factor deviates from
    /// one by at most `coeff * |q|^k`.
    pub fn terms_for(&self, q: QParam, coeff: f64) -> Result<usize> {
        let aq = q.value().abs();
        if q.is_classical() {
            return Err(QError::SlowConvergence("infinite product requested at q = 1".into()));
        }
        if aq > MAX_INFINITE_Q {
            return Err(QError::SlowConvergence(format!(
                "|q| = {aq} exceeds the cap {MAX_INFINITE_Q} for infinite products"
            )));
        }
        let coeff = coeff.abs();
        if aq == 0.0 || coeff == 0.0 {
            return Ok(self.min_terms);
        }
        let target = self.tail_tol * (1.0 - aq);
        let needed = if coeff <= target { 0.0 } else { ((target / coeff).ln() / aq.ln()).ceil() };
        let k = (needed as usize).max(self.min_terms);
        if k > self.max_terms {
            return Err(QError::SlowConvergence(format!(
                "product at q = {} needs {k} terms, more than max_terms = {}",
                q.value(),
                self.max_terms
            )));
        }
        Ok(k)
    }
}

/// Extent of a q-Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extent {
    Finite(u64),
    Infinite,
}

/// Running product that falls back to a logarithmic scale when the partial
/// product leaves `[1e-280, 1e280]`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledProduct {
    mantissa: f64,
    log_scale: f64,
}

impl Default for ScaledProduct {
    fn default() -> Self {
        ScaledProduct { mantissa: 1.0, log_scale: 0.0 }
    }
}

impl ScaledProduct {
    const LO: f64 = 1e-280;
    const HI: f64 = 1e280;

    pub fn new(init: f64) -> Self {
        let mut p = ScaledProduct::default();
        p.mul(init);
        p
    }

    #[inline]
    pub fn mul(&mut self, factor: f64) {
        self.mantissa *= factor;
        let a = self.mantissa.abs();
        if a != 0.0 && !(Self::LO..=Self::HI).contains(&a) {
            self.log_scale += a.ln();
            self.mantissa = self.mantissa.signum();
        }
    }

    #[inline]
    pub fn div(&mut self, factor: f64) {
        self.mul(1.0 / factor);
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }

    pub fn value(&self) -> f64 {
        if self.log_scale == 0.0 {
            self.mantissa
        } else {
            self.mantissa * self.log_scale.exp()
        }
    }
}

/// `[n]_q = 1 + q + ... + q^{n-1}`.
pub fn q_number(n: u64, q: QParam) -> f64 {
    let qv = q.value();
    if q.is_classical() {
        return n as f64;
    }
    // Direct summation keeps full relative accuracy for q near 1.
    let mut sum = 0.0;
    let mut p = 1.0;
    for _ in 0..n {
        sum += p;
        p *= qv;
    }
    sum
}

/// `[n]_q! = [1]_q [2]_q ... [n]_q`.
pub fn q_factorial(n: u64, q: QParam) -> f64 {
    (1..=n).map(|i| q_number(i, q)).product()
}

/// Gaussian binomial coefficient; zero unless `n >= k >= 0`.
pub fn q_binomial(n: i64, k: i64, q: QParam) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = 1.0;
    for i in 1..=k {
        acc *= q_number(n - k + i, q) / q_number(i, q);
    }
    acc
}

/// `(a|q)_n = prod_{i<n} (1 - a q^i)`, finite or infinite.
pub fn q_pochhammer(a: f64, q: QParam, n: Extent, policy: &TruncationPolicy) -> Result<f64> {
    let qv = q.value();
    match n {
        Extent::Finite(n) => {
            let mut acc = ScaledProduct::default();
            let mut p = 1.0;
            for _ in 0..n {
                acc.mul(1.0 - a * p);
                p *= qv;
            }
            Ok(acc.value())
        }
        Extent::Infinite => {
            if q.is_classical() {
                return if a == 0.0 { Ok(1.0) } else { Err(QError::InfiniteProductAtQ1 { a }) };
            }
            let terms = policy.terms_for(q, a)?;
            let mut acc = ScaledProduct::default();
            let mut p = 1.0;
            for _ in 0..terms {
                acc.mul(1.0 - a * p);
                p *= qv;
            }
            Ok(acc.value())
        }
    }
}

/// `(a|q)_inf` with the default truncation policy.
pub fn q_pochhammer_inf(a: f64, q: QParam) -> Result<f64> {
    q_pochhammer(a, q, Extent::Infinite, &TruncationPolicy::default())
}

/// `W_n(q) = sum_i [n over i]_q`, the sup-norm constant of `H_n(.|q)`.
pub fn w_bound(n: u64, q: QParam) -> f64 {
    (0..=n as i64).map(|i| q_binomial(n as i64, i, q)).sum()
}

/// `sum_i |[n over i]_q|` for `n = 0..=n_max`, built from q-Pascal rows.
/// Equals `W_n(q)` for `q >= 0` and bounds `|H_n(x|q)| (1-q)^{n/2}` for every `q`.
pub fn hermite_sup_constants(n_max: usize, q: QParam) -> Vec<f64> {
    let qv = q.value();
    let mut row = vec![1.0];
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    for n in 1..=n_max {
        let mut next = vec![1.0; n + 1];
        let mut qk = qv;
        for k in 1..n {
            next[k] = row[k - 1] + qk * row[k];
            qk *= qv;
        }
        out.push(next.iter().map(|v| v.abs()).sum());
        row = next;
    }
    out
}

/// `sum_i |[n over i]_q|`, one q-Pascal row at a time.
pub(crate) struct SupConstants {
    q: f64,
    row: Vec<f64>,
    vals: Vec<f64>,
}

impl SupConstants {
    pub(crate) fn new(q: QParam) -> Self {
        SupConstants { q: q.value(), row: vec![1.0], vals: vec![1.0] }
    }

    pub(crate) fn get(&mut self, n: usize) -> f64 {
        while self.vals.len() <= n {
            let len = self.row.len();
            let mut next = vec![1.0; len + 1];
            let mut qk = self.q;
            for k in 1..len {
                next[k] = self.row[k - 1] + qk * self.row[k];
                qk *= self.q;
            }
            self.vals.push(next.iter().map(|v| v.abs()).sum());
            self.row = next;
        }
        self.vals[n]
    }
}

/// `binom(n, 2)` as used in exponents `q^{binom(n,2)}`.
#[inline]
pub fn binom2(n: u64) -> i32 {
    (n * n.saturating_sub(1) / 2) as i32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn qparam_range() {
        assert!(QParam::new(1.0).unwrap().is_classical());
        assert!(!QParam::new(0.999).unwrap().is_classical());
        assert!(QParam::new(-1.0).is_err());
        assert!(QParam::new(1.5).is_err());
        assert!(QParam::new(f64::NAN).is_err());
    }

    #[test]
    fn q_number_examples() {
        assert_eq!(q_number(0, q(0.3)), 0.0);
        assert_eq!(q_number(3, q(1.0)), 3.0);
        assert_eq!(q_number(3, q(0.5)), 1.75);
    }

    #[test]
    fn q_factorial_examples() {
        assert_eq!(q_factorial(0, q(-0.4)), 1.0);
        assert_eq!(q_factorial(3, q(1.0)), 6.0);
        assert!((q_factorial(3, q(0.5)) - 2.625).abs() < 1e-15);
    }

    #[test]
    fn q_binomial_examples() {
        assert_eq!(q_binomial(4, 5, q(0.5)), 0.0);
        assert_eq!(q_binomial(4, -1, q(0.5)), 0.0);
        assert_eq!(q_binomial(4, 2, q(1.0)), 6.0);
        assert!((q_binomial(4, 2, q(0.5)) - 2.1875).abs() < 1e-15);
    }

    #[test]
    fn pochhammer_examples() {
        let pol = TruncationPolicy::default();
        assert_eq!(q_pochhammer(0.7, q(0.5), Extent::Finite(0), &pol).unwrap(), 1.0);
        assert_eq!(q_pochhammer(0.5, q(0.0), Extent::Infinite, &pol).unwrap(), 0.5);
        let euler = q_pochhammer(0.5, q(0.5), Extent::Infinite, &pol).unwrap();
        assert!((euler - 0.288_788_095_086_602_4).abs() < 1e-10, "{euler}");
    }

    #[test]
    fn pochhammer_errors() {
        let pol = TruncationPolicy::default();
        assert_eq!(
            q_pochhammer(0.3, q(1.0), Extent::Infinite, &pol),
            Err(QError::InfiniteProductAtQ1 { a: 0.3 })
        );
        assert_eq!(q_pochhammer(0.0, q(1.0), Extent::Infinite, &pol), Ok(1.0));
        assert!(matches!(
            q_pochhammer(0.3, q(0.9996), Extent::Infinite, &pol),
            Err(QError::SlowConvergence(_))
        ));
        // 0.999 needs ~42k factors, more than the default cap of 20k.
        assert!(matches!(
            q_pochhammer(0.3, q(0.999), Extent::Infinite, &pol),
            Err(QError::SlowConvergence(_))
        ));
        let wide = TruncationPolicy::new(1e-15, 100_000, 8).unwrap();
        assert!(q_pochhammer(0.3, q(0.999), Extent::Infinite, &wide).is_ok());
    }

    #[test]
    fn w_bound_examples() {
        assert_eq!(w_bound(0, q(0.2)), 1.0);
        assert!((w_bound(2, q(0.5)) - 3.5).abs() < 1e-15);
        assert_eq!(w_bound(1, q(1.0)), 2.0);
    }

    #[test]
    fn sup_constants_match_w_bound_for_nonnegative_q() {
        for qq in [0.0, 0.3, 0.8] {
            let c = hermite_sup_constants(12, q(qq));
            for (n, v) in c.iter().enumerate() {
                assert!((v - w_bound(n as u64, q(qq))).abs() < 1e-12 * v);
            }
        }
    }

    #[test]
    fn scaled_product_survives_underflow() {
        let mut p = ScaledProduct::default();
        for _ in 0..1000 {
            p.mul(1e-3);
        }
        for _ in 0..1000 {
            p.mul(1e3);
        }
        assert!((p.value() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0.0, 10, 1).is_err());
        assert!(TruncationPolicy::new(1e-10, 10, 20).is_err());
        assert!(TruncationPolicy::new(1e-10, 10, 2).is_ok());
    }
}
