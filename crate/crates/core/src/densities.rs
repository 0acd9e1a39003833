//! One-dimensional densities and generating functions.
//!
//! All product formulas pull the `k = 0` factor `4 - (1-q) x^2` out of the infinite
//! product and combine it with the `1 / sqrt(4 - (1-q) x^2)` prefactor, so the
//! densities are evaluated as `sqrt(1-q) sqrt(4 - (1-q) x^2) / (2 pi) * prod_{k>=1}`.
//! That form is finite everywhere and exactly zero at the support endpoints.

use std::f64::consts::PI;

use crate::error::{QError, Result};
use crate::orthopoly::HermiteSeq;
use crate::qseries::{QParam, ScaledProduct, SupConstants, TruncationPolicy};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Support `S(q)` of the q-Normal law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub q: QParam,
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn new(q: QParam) -> Self {
        let hi = q.support_half_width();
        Support { q, lo: -hi, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(QError::OutOfSupport { x, lo: self.lo, hi: self.hi })
        }
    }
}

/// Conditioning data `(y, rho, q)` of the conditional q-Normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondParams {
    pub y: f64,
    pub rho: f64,
    pub q: QParam,
}

impl CondParams {
    pub fn new(y: f64, rho: f64, q: QParam) -> Result<Self> {
        check_rho(rho)?;
        Support::new(q).check(y)?;
        Ok(CondParams { y, rho, q })
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(QError::ParamOutOfRange(format!("|rho| = {} must be < 1", rho.abs())))
    }
}

/// Arguments of the quadratic factor `w_k(s, t, rho, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WFactorArgs {
    pub s: f64,
    pub t: f64,
    pub rho: f64,
    pub k: u32,
}

/// `w_k(s,t,rho,q) = (1 - rho^2 q^{2k})^2 - (1-q) rho q^k (1 + rho^2 q^{2k}) s t
///  + (1-q) rho^2 (s^2 + t^2) q^{2k}`.
pub fn w_factor(args: WFactorArgs, q: QParam) -> f64 {
    let qk = q.value().powi(args.k as i32);
    w_raw(args.s, args.t, args.rho, qk, 1.0 - q.value())
}

#[inline]
fn w_raw(s: f64, t: f64, rho: f64, qk: f64, omq: f64) -> f64 {
    let rq = rho * qk;
    let rq2 = rq * rq;
    (1.0 - rq2) * (1.0 - rq2) - omq * rq * (1.0 + rq2) * s * t + omq * rq2 * (s * s + t * t)
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * var)).exp() * INV_SQRT_2PI / var.sqrt()
}

/// `sqrt(1-q) sqrt(4-(1-q)x^2) / (2 pi)`, or `None` outside/at the edge of `S(q)`.
fn edge_prefactor(x: f64, q: QParam) -> Option<f64> {
    let omq = 1.0 - q.value();
    let rad = 4.0 - omq * x * x;
    if rad <= 0.0 || x.abs() >= q.support_half_width() {
        return None;
    }
    Some(omq.sqrt() * rad.sqrt() / (2.0 * PI))
}

/// q-Normal density `f_N(x|q)`.
pub fn f_n(x: f64, q: QParam, policy: &TruncationPolicy) -> Result<f64> {
    if q.is_classical() {
        return Ok(normal_pdf(x, 0.0, 1.0));
    }
    let terms = policy.terms_for(q, 8.0)?;
    let Some(pre) = edge_prefactor(x, q) else { return Ok(0.0) };
    let qv = q.value();
    let omq = 1.0 - qv;
    let x2 = x * x;
    let mut acc = ScaledProduct::new(pre);
    let mut qk = 1.0;
    for k in 0..terms {
        let qk1 = qk * qv;
        if k == 0 {
            acc.mul(1.0 - qk1);
        } else {
            let a = 1.0 + qk;
            acc.mul((1.0 - qk1) * (a * a - omq * x2 * qk));
        }
        qk = qk1;
    }
    Ok(acc.value())
}

/// Conditional q-Normal density `f_CN(x|y,rho,q)`.
pub fn f_cn(x: f64, cond: &CondParams, policy: &TruncationPolicy) -> Result<f64> {
    let CondParams { y, rho, q } = *cond;
    if q.is_classical() {
        return Ok(normal_pdf(x, rho * y, 1.0 - rho * rho));
    }
    let terms = policy.terms_for(q, 32.0)?;
    let Some(pre) = edge_prefactor(x, q) else { return Ok(0.0) };
    let qv = q.value();
    let omq = 1.0 - qv;
    let (x2, r2) = (x * x, rho * rho);
    let mut acc = ScaledProduct::new(pre);
    let mut qk = 1.0;
    for k in 0..terms {
        let qk1 = qk * qv;
        let mut num = (1.0 - r2 * qk) * (1.0 - qk1);
        if k > 0 {
            let a = 1.0 + qk;
            num *= a * a - omq * x2 * qk;
        }
        acc.mul(num / w_raw(x, y, rho, qk, omq));
        qk = qk1;
    }
    Ok(acc.value())
}

/// `f_CN(x|y,rho,q) / f_N(x|q) = (rho^2)_inf / prod_k w_k(x, y, rho, q)` for `x` in `S(q)`.
pub fn cn_ratio(x: f64, cond: &CondParams, policy: &TruncationPolicy) -> Result<f64> {
    let CondParams { y, rho, q } = *cond;
    if q.is_classical() {
        let r2 = rho * rho;
        return Ok(normal_pdf(x, rho * y, 1.0 - r2) / normal_pdf(x, 0.0, 1.0));
    }
    let terms = policy.terms_for(q, 32.0)?;
    let qv = q.value();
    let omq = 1.0 - qv;
    let mut acc = ScaledProduct::default();
    let mut qk = 1.0;
    for _ in 0..terms {
        acc.mul((1.0 - rho * rho * qk) / w_raw(x, y, rho, qk, omq));
        qk *= qv;
    }
    Ok(acc.value())
}

fn check_t(t: f64, q: QParam) -> Result<()> {
    if (1.0 - q.value()) * t * t < 1.0 {
        Ok(())
    } else {
        Err(QError::ParamOutOfRange(format!("(1-q) t^2 must be < 1, got t = {t}, q = {}", q.value())))
    }
}

/// Generating function `phi(x,t|q) = sum_i t^i / [i]_q! H_i(x|q)`, in product form.
pub fn phi_gen(x: f64, t: f64, q: QParam, policy: &TruncationPolicy) -> Result<f64> {
    check_t(t, q)?;
    if q.is_classical() {
        return Ok((x * t - t * t / 2.0).exp());
    }
    Support::new(q).check(x)?;
    let terms = policy.terms_for(q, 4.0)?;
    let qv = q.value();
    let omq = 1.0 - qv;
    let mut acc = ScaledProduct::default();
    let mut qk = 1.0;
    for _ in 0..terms {
        acc.div(1.0 - omq * x * t * qk + omq * t * t * qk * qk);
        qk *= qv;
    }
    Ok(acc.value())
}

/// Generating function `tau(x,t|y,rho,q) = sum_i t^i / [i]_q! P_i(x|y,rho,q)`.
pub fn tau_gen(x: f64, t: f64, cond: &CondParams, policy: &TruncationPolicy) -> Result<f64> {
    let CondParams { y, rho, q } = *cond;
    check_t(t, q)?;
    if q.is_classical() {
        return Ok((t * (x - rho * y) - t * t * (1.0 - rho * rho) / 2.0).exp());
    }
    Support::new(q).check(x)?;
    let terms = policy.terms_for(q, 8.0)?;
    let qv = q.value();
    let omq = 1.0 - qv;
    let mut acc = ScaledProduct::default();
    let mut qk = 1.0;
    for _ in 0..terms {
        let q2k = qk * qk;
        let num = 1.0 - omq * rho * y * t * qk + omq * rho * rho * t * t * q2k;
        let den = 1.0 - omq * x * t * qk + omq * t * t * q2k;
        acc.mul(num / den);
        qk *= qv;
    }
    Ok(acc.value())
}

/// Modified `(t,q)`-Normal density `phi(x,t|q) f_N(x|q)`.
pub fn f_mn(x: f64, t: f64, q: QParam, policy: &TruncationPolicy) -> Result<f64> {
    check_t(t, q)?;
    if !Support::new(q).contains(x) {
        return Ok(0.0);
    }
    Ok(phi_gen(x, t, q, policy)? * f_n(x, q, policy)?)
}

/// Modified `(y,rho,t,q)`-Conditional Normal density `tau f_CN`.
pub fn f_mcn(x: f64, t: f64, cond: &CondParams, policy: &TruncationPolicy) -> Result<f64> {
    check_t(t, cond.q)?;
    if !Support::new(cond.q).contains(x) {
        return Ok(0.0);
    }
    Ok(tau_gen(x, t, cond, policy)? * f_cn(x, cond, policy)?)
}

/// Two-sided conditional density `phi(x|y,z,rho1,rho2,q)` of the middle
/// coordinate of a three-step q-Normal Markov chain; a rescaled, normalized
/// Askey-Wilson weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwConditional {
    pub y: f64,
    pub z: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub q: QParam,
}

impl AwConditional {
    pub fn new(y: f64, z: f64, rho1: f64, rho2: f64, q: QParam) -> Result<Self> {
        check_rho(rho1)?;
        check_rho(rho2)?;
        let s = Support::new(q);
        s.check(y)?;
        s.check(z)?;
        Ok(AwConditional { y, z, rho1, rho2, q })
    }

    /// Conditional mean `(rho1 (1-rho2^2) y + rho2 (1-rho1^2) z) / (1 - rho1^2 rho2^2)`.
    pub fn mean(&self) -> f64 {
        let (a, b) = (self.rho1, self.rho2);
        (a * (1.0 - b * b) * self.y + b * (1.0 - a * a) * self.z) / (1.0 - a * a * b * b)
    }

    pub fn density(&self, x: f64, policy: &TruncationPolicy) -> Result<f64> {
        let AwConditional { y, z, rho1, rho2, q } = *self;
        if q.is_classical() {
            let (a2, b2) = (rho1 * rho1, rho2 * rho2);
            let var = (1.0 - a2) * (1.0 - b2) / (1.0 - a2 * b2);
            return Ok(normal_pdf(x, self.mean(), var));
        }
        let terms = policy.terms_for(q, 64.0)?;
        let Some(pre) = edge_prefactor(x, q) else { return Ok(0.0) };
        let qv = q.value();
        let omq = 1.0 - qv;
        let (x2, a2, b2) = (x * x, rho1 * rho1, rho2 * rho2);
        let r12 = rho1 * rho2;
        let mut acc = ScaledProduct::new(pre);
        let mut qk = 1.0;
        for k in 0..terms {
            let qk1 = qk * qv;
            let mut num = (1.0 - qk1) * (1.0 - a2 * qk) * (1.0 - b2 * qk) * w_raw(y, z, r12, qk, omq);
            if k > 0 {
                let a = 1.0 + qk;
                num *= a * a - omq * x2 * qk;
            }
            let den = (1.0 - a2 * b2 * qk) * w_raw(x, y, rho1, qk, omq) * w_raw(x, z, rho2, qk, omq);
            acc.mul(num / den);
            qk = qk1;
        }
        Ok(acc.value())
    }
}

/// Free-function form of [`AwConditional::density`].
#[allow(clippy::too_many_arguments)]
pub fn aw_conditional(
    x: f64,
    y: f64,
    z: f64,
    rho1: f64,
    rho2: f64,
    q: QParam,
    policy: &TruncationPolicy,
) -> Result<f64> {
    AwConditional::new(y, z, rho1, rho2, q)?.density(x, policy)
}

/// `f_CN` through the truncated expansion `f_N(x) sum_n rho^n / [n]_q! H_n(x) H_n(y)`.
///
/// Terms are added until the bound `|rho|^n W_n(q)^2 / (q)_n` on the remaining
/// ones, summed geometrically, drops below `tol`. Returns the value and the
/// number of terms used.
pub fn f_cn_poisson_mehler(x: f64, cond: &CondParams, tol: f64, max_terms: usize) -> Result<(f64, usize)> {
    let CondParams { y, rho, q } = *cond;
    if q.is_classical() {
        return Err(QError::Q1Unsupported);
    }
    let s = Support::new(q);
    if !s.contains(x) {
        return Ok((0.0, 0));
    }
    let mut hx = HermiteSeq::new(x, q);
    let mut hy = HermiteSeq::new(y, q);
    let mut sup = SupConstants::new(q);
    let qv = q.value();
    let mut sum = 0.0;
    let mut rho_n = 1.0;
    let mut fact = 1.0;
    // (q)_{n+1}
    let mut qn = 1.0 - qv;
    let mut qk = qv;
    let mut prev_bound = f64::INFINITY;
    for n in 0..=max_terms {
        if n > 0 {
            fact *= crate::qseries::q_number(n as u64, q);
            qk *= qv;
            qn *= 1.0 - qk;
        }
        sum += rho_n / fact * hx.get(n) * hy.get(n);
        let w = sup.get(n + 1);
        let bound = rho.abs().powi(n as i32 + 1) * w * w / qn;
        let ratio = bound / prev_bound;
        if n >= 4 && ratio < 1.0 && bound / (1.0 - ratio) < tol {
            return Ok((f_n(x, q, &TruncationPolicy::default())? * sum, n + 1));
        }
        prev_bound = bound;
        rho_n *= rho;
    }
    Err(QError::SlowConvergence(format!("Poisson-Mehler sum did not reach {tol:e} in {max_terms} terms")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthopoly::q_hermite_all;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }
    const POL: TruncationPolicy = TruncationPolicy { tail_tol: 1e-15, max_terms: 20_000, min_terms: 8 };

    #[test]
    fn f_n_examples() {
        assert!((f_n(0.0, q(0.0), &POL).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!((f_n(0.0, q(1.0), &POL).unwrap() - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(f_n(5.0, q(0.0), &POL).unwrap(), 0.0);
        for qq in [-0.7, -0.2, 0.0, 0.4, 0.9] {
            let hi = q(qq).support_half_width();
            assert_eq!(f_n(hi, q(qq), &POL).unwrap(), 0.0);
            assert_eq!(f_n(-hi, q(qq), &POL).unwrap(), 0.0);
        }
    }

    #[test]
    fn semicircle_closed_form() {
        for x in [-1.9, -1.0, 0.3, 1.5] {
            let want = (4.0f64 - x * x).sqrt() / (2.0 * PI);
            assert!((f_n(x, q(0.0), &POL).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn f_cn_reductions() {
        for x in [-1.2, 0.0, 0.8] {
            let c0 = CondParams::new(0.4, 0.0, q(0.3)).unwrap();
            let a = f_cn(x, &c0, &POL).unwrap();
            let b = f_n(x, q(0.3), &POL).unwrap();
            assert!((a - b).abs() < 1e-15 * b.max(1.0));
            let (y, r) = (0.7, 0.45);
            let c = CondParams::new(y, r, q(0.0)).unwrap();
            let r2 = r * r;
            let want = (1.0 - r2) * (4.0 - x * x).sqrt()
                / (2.0 * PI * ((1.0 - r2).powi(2) - r * (1.0 + r2) * x * y + r2 * (x * x + y * y)));
            assert!((f_cn(x, &c, &POL).unwrap() - want).abs() < 1e-14);
        }
        let c1 = CondParams::new(0.5, 0.6, q(1.0)).unwrap();
        let want = normal_pdf(0.2, 0.3, 0.64);
        assert!((f_cn(0.2, &c1, &POL).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn w_factor_examples() {
        assert_eq!(w_factor(WFactorArgs { s: 0.3, t: -1.1, rho: 0.0, k: 2 }, q(0.4)), 1.0);
        assert_eq!(w_factor(WFactorArgs { s: 0.3, t: -1.1, rho: 0.7, k: 1 }, q(0.0)), 1.0);
        let (r, qq, k) = (0.6, 0.5, 2);
        let want = (1.0 - r * r * 0.5f64.powi(4)).powi(2);
        assert!((w_factor(WFactorArgs { s: 0.0, t: 0.0, rho: r, k }, q(qq)) - want).abs() < 1e-15);
    }

    #[test]
    fn generating_function_reductions() {
        assert_eq!(phi_gen(0.4, 0.0, q(0.5), &POL).unwrap(), 1.0);
        let (x, t) = (0.3, 0.8);
        assert!((phi_gen(x, t, q(1.0), &POL).unwrap() - (x * t - t * t / 2.0).exp()).abs() < 1e-15);
        let c = CondParams::new(0.2, 0.5, q(0.4)).unwrap();
        assert_eq!(tau_gen(x, 0.0, &c, &POL).unwrap(), 1.0);
        let c0 = CondParams::new(0.2, 0.0, q(0.4)).unwrap();
        assert!((tau_gen(x, t, &c0, &POL).unwrap() - phi_gen(x, t, q(0.4), &POL).unwrap()).abs() < 1e-14);
        assert!(matches!(phi_gen(0.1, 2.0, q(0.5), &POL), Err(QError::ParamOutOfRange(_))));
        assert!(matches!(phi_gen(3.0, 0.1, q(0.5), &POL), Err(QError::OutOfSupport { .. })));
    }

    #[test]
    fn generating_function_matches_series() {
        let (x, t, qq) = (0.9, 0.35f64, 0.45);
        let qp = q(qq);
        let hs = q_hermite_all(80, x, qp);
        let mut fact = 1.0;
        let mut s = 0.0;
        for (i, h) in hs.iter().enumerate() {
            if i > 0 {
                fact *= crate::qseries::q_number(i as u64, qp);
            }
            s += t.powi(i as i32) / fact * h;
        }
        assert!((s - phi_gen(x, t, qp, &POL).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn modified_densities_reduce_at_t0() {
        let qp = q(0.5);
        let c = CondParams::new(0.5, 0.6, qp).unwrap();
        for x in [-1.0, 0.2, 2.0] {
            assert_eq!(f_mn(x, 0.0, qp, &POL).unwrap(), f_n(x, qp, &POL).unwrap());
            assert_eq!(f_mcn(x, 0.0, &c, &POL).unwrap(), f_cn(x, &c, &POL).unwrap());
        }
        assert_eq!(f_mn(10.0, 0.3, qp, &POL).unwrap(), 0.0);
    }

    #[test]
    fn aw_reduces_and_is_symmetric() {
        let qp = q(0.45);
        let (y, z, r1, r2) = (0.4, -0.9, 0.5, 0.6);
        for x in [-1.3, 0.1, 1.7] {
            let one = aw_conditional(x, y, z, r1, 0.0, qp, &POL).unwrap();
            let cn = f_cn(x, &CondParams::new(y, r1, qp).unwrap(), &POL).unwrap();
            assert!((one - cn).abs() < 1e-14 * cn.max(1.0));
            let a = aw_conditional(x, y, z, r1, r2, qp, &POL).unwrap();
            let b = aw_conditional(x, z, y, r2, r1, qp, &POL).unwrap();
            assert!((a - b).abs() < 1e-14 * a.max(1.0));
        }
        assert!(AwConditional::new(0.0, 0.0, 1.0, 0.2, qp).is_err());
    }

    #[test]
    fn poisson_mehler_matches_product() {
        let qp = q(0.5);
        let c = CondParams::new(0.3, 0.5, qp).unwrap();
        for x in [-2.5, -0.4, 1.1, 2.7] {
            let (pm, _) = f_cn_poisson_mehler(x, &c, 1e-12, 400).unwrap();
            let direct = f_cn(x, &c, &POL).unwrap();
            assert!((pm - direct).abs() < 1e-10, "{x}: {pm} vs {direct}");
        }
    }

    #[test]
    fn q_near_one_is_close_to_normal() {
        let wide = TruncationPolicy::new(1e-15, 100_000, 8).unwrap();
        for x in [-1.0, 0.0, 1.0] {
            let v = f_n(x, q(0.999), &wide).unwrap();
            assert!((v - normal_pdf(x, 0.0, 1.0)).abs() < 0.02);
        }
    }
}
