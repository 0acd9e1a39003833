//! Polynomial families: q-Hermite `H_n(x|q)`, continuous q-Hermite `h_n`,
//! Al-Salam-Chihara `P_n(x|y,rho,q)`, Chebyshev `U_n` and probabilists' Hermite.
//!
//! Everything is evaluated by forward three-term recurrence. Coefficient-space
//! operations (linearization, change of basis between monomials and `H_n(.|q)`)
//! live here too.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{QError, Result};
use crate::qseries::{q_binomial, q_factorial, q_number, w_bound, QParam};

/// Highest degree supported by the coefficient-space routines.
pub const MAX_DEGREE: usize = 64;

/// `H_n(x|q)` from `H_{n+1} = x H_n - [n]_q H_{n-1}`, `H_{-1} = 0`, `H_0 = 1`.
pub fn q_hermite(n: usize, x: f64, q: QParam) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - q_number(k as u64, q) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_0(x|q), ..., H_n(x|q)` in one pass.
pub fn q_hermite_all(n: usize, x: f64, q: QParam) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut prev, mut cur) = (0.0, 1.0);
    out.push(cur);
    for k in 0..n {
        let next = x * cur - q_number(k as u64, q) * prev;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// `H_0(x|q), H_1(x|q), ...` extended on demand by the three-term recurrence.
pub(crate) struct HermiteSeq {
    x: f64,
    q: QParam,
    vals: Vec<f64>,
}

impl HermiteSeq {
    pub(crate) fn new(x: f64, q: QParam) -> Self {
        HermiteSeq { x, q, vals: vec![1.0, x] }
    }

    pub(crate) fn get(&mut self, n: usize) -> f64 {
        while self.vals.len() <= n {
            let k = self.vals.len() - 1;
            let next = self.x * self.vals[k] - q_number(k as u64, self.q) * self.vals[k - 1];
            self.vals.push(next);
        }
        self.vals[n]
    }
}

/// Continuous q-Hermite `h_n(x|q) = (1-q)^{n/2} H_n(2x/sqrt(1-q) | q)`.
pub fn continuous_q_hermite(n: usize, x: f64, q: QParam) -> Result<f64> {
    if q.is_classical() {
        return Err(QError::Q1Unsupported);
    }
    let s = (1.0 - q.value()).sqrt();
    Ok(s.powi(n as i32) * q_hermite(n, 2.0 * x / s, q))
}

/// Al-Salam-Chihara `P_n(x|y,rho,q)`:
/// `P_{n+1} = (x - rho y q^n) P_n - (1 - rho^2 q^{n-1}) [n]_q P_{n-1}`.
pub fn al_salam_chihara(n: usize, x: f64, y: f64, rho: f64, q: QParam) -> f64 {
    let qv = q.value();
    let (mut prev, mut cur) = (0.0, 1.0);
    // q^{k-1}; only read for k >= 1.
    let mut q_km1 = 1.0;
    let mut q_k = 1.0;
    for k in 0..n {
        let back = if k == 0 { 0.0 } else { (1.0 - rho * rho * q_km1) * q_number(k as u64, q) * prev };
        let next = (x - rho * y * q_k) * cur - back;
        prev = cur;
        cur = next;
        q_km1 = q_k;
        q_k *= qv;
    }
    cur
}

/// Chebyshev polynomial of the second kind, `2x U_n = U_{n+1} + U_{n-1}`.
pub fn chebyshev_u(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for _ in 0..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Probabilists' Hermite `He_n`, `x He_n = He_{n+1} + n He_{n-1}`.
pub fn hermite_prob(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficients of `H_n H_m` in the `H(.|q)` basis, keyed by result degree.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationTable {
    pub n: usize,
    pub m: usize,
    pub coeffs: BTreeMap<usize, f64>,
}

impl LinearizationTable {
    pub fn coeff(&self, degree: usize) -> f64 {
        self.coeffs.get(&degree).copied().unwrap_or(0.0)
    }

    /// Evaluates the right-hand side `sum_j c_j H_{n+m-2j}(x|q)`.
    pub fn eval(&self, x: f64, q: QParam) -> f64 {
        let hs = q_hermite_all(self.n + self.m, x, q);
        self.coeffs.iter().map(|(&deg, &c)| c * hs[deg]).sum()
    }
}

/// `H_n H_m = sum_{j <= min(n,m)} [m over j]_q [n over j]_q [j]_q! H_{n+m-2j}`.
pub fn linearize(n: usize, m: usize, q: QParam) -> LinearizationTable {
    let coeffs = (0..=n.min(m))
        .map(|j| {
            let c = q_binomial(m as i64, j as i64, q)
                * q_binomial(n as i64, j as i64, q)
                * q_factorial(j as u64, q);
            (n + m - 2 * j, c)
        })
        .collect();
    LinearizationTable { n, m, coeffs }
}

/// Triangular change-of-basis matrices between monomials and `H_k(.|q)`,
/// up to [`MAX_DEGREE`].
#[derive(Debug)]
struct BasisMatrices {
    /// `to_mono[k][i]`: coefficient of `x^i` in `H_k`.
    to_mono: Vec<Vec<f64>>,
    /// `to_herm[k][j]`: coefficient of `H_j` in `x^k`.
    to_herm: Vec<Vec<f64>>,
}

impl BasisMatrices {
    fn build(q: QParam) -> Self {
        let d = MAX_DEGREE;
        let mut to_mono = vec![vec![0.0; d + 1]; d + 1];
        to_mono[0][0] = 1.0;
        for k in 0..d {
            let qk = q_number(k as u64, q);
            for i in 0..=k {
                to_mono[k + 1][i + 1] += to_mono[k][i];
            }
            if k >= 1 {
                for i in 0..k {
                    to_mono[k + 1][i] -= qk * to_mono[k - 1][i];
                }
            }
        }
        // x H_j = H_{j+1} + [j]_q H_{j-1}
        let mut to_herm = vec![vec![0.0; d + 1]; d + 1];
        to_herm[0][0] = 1.0;
        for k in 0..d {
            for j in 0..=k {
                let c = to_herm[k][j];
                if c == 0.0 {
                    continue;
                }
                to_herm[k + 1][j + 1] += c;
                if j >= 1 {
                    to_herm[k + 1][j - 1] += c * q_number(j as u64, q);
                }
            }
        }
        BasisMatrices { to_mono, to_herm }
    }
}

fn basis(q: QParam) -> Arc<BasisMatrices> {
    static CACHE: OnceLock<RwLock<HashMap<u64, Arc<BasisMatrices>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    let key = q.value().to_bits();
    if let Some(b) = cache.read().expect("basis cache poisoned").get(&key) {
        return Arc::clone(b);
    }
    let built = Arc::new(BasisMatrices::build(q));
    let mut w = cache.write().expect("basis cache poisoned");
    Arc::clone(w.entry(key).or_insert(built))
}

fn check_degree(len: usize) -> Result<()> {
    if len > MAX_DEGREE + 1 {
        return Err(QError::ParamOutOfRange(format!(
            "polynomial degree {} exceeds the cap {MAX_DEGREE}",
            len - 1
        )));
    }
    Ok(())
}

/// Rewrites `sum_i c_i x^i` as `sum_j a_j H_j(x|q)`.
pub fn hermite_expand(monomial: &[f64], q: QParam) -> Result<Vec<f64>> {
    check_degree(monomial.len())?;
    let b = basis(q);
    let mut out = vec![0.0; monomial.len()];
    for (k, &c) in monomial.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate().take(k + 1) {
            *o += c * b.to_herm[k][j];
        }
    }
    Ok(out)
}

/// Inverse of [`hermite_expand`].
pub fn hermite_to_monomial(hermite: &[f64], q: QParam) -> Result<Vec<f64>> {
    check_degree(hermite.len())?;
    let b = basis(q);
    let mut out = vec![0.0; hermite.len()];
    for (k, &a) in hermite.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate().take(k + 1) {
            *o += a * b.to_mono[k][i];
        }
    }
    Ok(out)
}

/// Evaluates `sum_j a_j H_j(x|q)`.
pub fn eval_hermite_series(coeffs: &[f64], x: f64, q: QParam) -> f64 {
    if coeffs.is_empty() {
        return 0.0;
    }
    let hs = q_hermite_all(coeffs.len() - 1, x, q);
    coeffs.iter().zip(hs).map(|(a, h)| a * h).sum()
}

/// Checks `|H_n(x|q)| <= W_n(q) (1-q)^{-n/2}` at a point of the support.
pub fn q_hermite_bound_check(n: usize, x: f64, q: QParam) -> Result<bool> {
    if q.is_classical() {
        return Err(QError::Q1Unsupported);
    }
    let hi = q.support_half_width();
    if x.abs() > hi {
        return Err(QError::OutOfSupport { x, lo: -hi, hi });
    }
    let bound = w_bound(n as u64, q) * (1.0 - q.value()).powf(-(n as f64) / 2.0);
    // relative slack for the equality cases at the support edge
    Ok(q_hermite(n, x, q).abs() <= bound * (1.0 + 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(q_hermite(2, 2.0, q(0.5)), 3.0);
        assert!((q_hermite(3, 1.0, q(0.5)) + 1.5).abs() < 1e-15);
        for n in 0..10 {
            let x = 1.3;
            assert!((q_hermite(n, x, q(0.0)) - chebyshev_u(n, x / 2.0)).abs() < 1e-12);
        }
        assert_eq!(q_hermite_all(3, 1.0, q(0.5)), vec![1.0, 1.0, 0.0, -1.5]);
    }

    #[test]
    fn continuous_examples() {
        assert_eq!(continuous_q_hermite(0, 0.7, q(0.3)).unwrap(), 1.0);
        assert!((continuous_q_hermite(1, 0.3, q(0.3)).unwrap() - 0.6).abs() < 1e-15);
        assert!((continuous_q_hermite(2, 0.5, q(0.5)).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(continuous_q_hermite(2, 0.5, q(1.0)), Err(QError::Q1Unsupported));
    }

    #[test]
    fn al_salam_chihara_examples() {
        let (x, y, r) = (0.7, -0.4, 0.6);
        for n in 0..8 {
            assert_eq!(al_salam_chihara(n, x, y, 0.0, q(0.4)), q_hermite(n, x, q(0.4)));
        }
        assert!((al_salam_chihara(1, x, y, r, q(0.3)) - (x - r * y)).abs() < 1e-15);
        let qq = 0.3;
        let p2 = x * x - 1.0 + r * r + qq * r * r * y * y - x * r * y * (1.0 + qq);
        assert!((al_salam_chihara(2, x, y, r, q(qq)) - p2).abs() < 1e-14);
    }

    #[test]
    fn chebyshev_and_hermite() {
        assert_eq!(chebyshev_u(1, 0.5), 1.0);
        assert_eq!(hermite_prob(2, 1.7), 1.7 * 1.7 - 1.0);
        let th = std::f64::consts::PI / 5.0;
        assert!((chebyshev_u(3, th.cos()) * th.sin() - (4.0 * th).sin()).abs() < 1e-12);
    }

    #[test]
    fn linearize_examples() {
        let t = linearize(3, 0, q(0.4));
        assert_eq!(t.coeffs.len(), 1);
        assert_eq!(t.coeff(3), 1.0);
        let t = linearize(1, 1, q(0.4));
        assert_eq!((t.coeff(2), t.coeff(0)), (1.0, 1.0));
        let t = linearize(2, 2, q(0.5));
        assert_eq!(t.coeff(4), 1.0);
        assert!((t.coeff(2) - 2.25).abs() < 1e-15);
        assert!((t.coeff(0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn expand_examples() {
        let qq = 0.37;
        let h = hermite_expand(&[0.0, 0.0, 0.0, 1.0], q(qq)).unwrap();
        let want = [0.0, 2.0 + qq, 0.0, 1.0];
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let h = hermite_expand(&[0.0, 0.0, 0.0, 0.0, 1.0], q(qq)).unwrap();
        let want = [2.0 + qq, 0.0, 3.0 + 2.0 * qq + qq * qq, 0.0, 1.0];
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(hermite_expand(&[1.0], q(qq)).unwrap(), vec![1.0]);
        assert!(hermite_expand(&vec![1.0; 66], q(qq)).is_err());
    }

    #[test]
    fn bound_examples() {
        assert!(q_hermite_bound_check(0, 1.0, q(0.5)).unwrap());
        assert!(q_hermite_bound_check(5, 0.0, q(0.5)).unwrap());
        let edge = 2.0 / (1.0f64 - 0.3).sqrt();
        assert!(q_hermite_bound_check(8, edge, q(0.3)).unwrap());
        assert!(matches!(q_hermite_bound_check(2, 5.0, q(0.0)), Err(QError::OutOfSupport { .. })));
    }
}
