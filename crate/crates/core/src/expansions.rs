//! The functions `G_{k,l}(y,z,t|q) = sum_m t^m / [m]_q! H_{m+k}(y|q) H_{m+l}(z|q)`,
//! the expansion of the two-sided conditional density in q-Hermite
//! polynomials, and the regression coefficients `A^{(n)}_{r,s}` of
//! `E(H_n(X_i) | X_{i-1}, X_{i+1})`.
//!
//! Coefficient convention: `A_{r,s}` with `s = -floor(n/2) + r + l` multiplies
//! `H_{n-2r-l}(x_left) H_l(x_right)`, so `l` is the degree in the right neighbour.
//! All routines here need `|q| < 1`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{check_rho, f_n, AwConditional, Support};
use crate::error::{QError, Result};
use crate::orthopoly::{q_hermite_all, HermiteSeq};
use crate::qseries::{
    binom2, q_binomial, q_factorial, q_number, q_pochhammer, Extent, QParam, SupConstants,
    TruncationPolicy,
};
use crate::quadrature::{integrate, integrate_vec, QuadratureSpec};

/// Hard cap on the number of series terms, independent of the policy.
const MAX_SERIES_TERMS: usize = 4000;

/// Condition estimate above which interpolation systems are rejected.
pub const MAX_CONDITION: f64 = 1e10;

/// A point `(y, z, t, q)` and the indices `(k, l)` of `G_{k,l}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GEvalRequest {
    pub k: usize,
    pub l: usize,
    pub y: f64,
    pub z: f64,
    pub t: f64,
    pub q: QParam,
    pub policy: TruncationPolicy,
}

impl GEvalRequest {
    pub fn new(k: usize, l: usize, y: f64, z: f64, t: f64, q: QParam) -> Result<Self> {
        let req = GEvalRequest { k, l, y, z, t, q, policy: TruncationPolicy::default() };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.is_classical() {
            return Err(QError::Q1Unsupported);
        }
        if !(self.t.abs() < 1.0 && (1.0 - self.q.value()) * self.t * self.t < 1.0) {
            return Err(QError::ParamOutOfRange(format!("t = {} needs |t| < 1 and (1-q) t^2 < 1", self.t)));
        }
        let s = Support::new(self.q);
        s.check(self.y)?;
        s.check(self.z)?;
        self.policy.validate()
    }

    pub fn with_kl(&self, k: usize, l: usize) -> Self {
        GEvalRequest { k, l, ..*self }
    }

    pub fn swapped(&self) -> Self {
        GEvalRequest { k: self.l, l: self.k, y: self.z, z: self.y, ..*self }
    }
}

/// Value of a truncated series with the bound on what was discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// `G_{a,b}(y,z,t|q)` for all `a <= max_a`, `b <= max_b`, from one pass over `m`.
///
/// Each term is bounded by `|t|^m S_{m+a} S_{m+b} / (q)_m (1-q)^{-(a+b)/2}` with
/// `S_n = sum_i |[n over i]_q|`; summation stops once the geometric tail of the
/// largest such bound falls below `tail_tol` times the largest magnitude.
pub fn g_table(
    y: f64,
    z: f64,
    t: f64,
    q: QParam,
    max_a: usize,
    max_b: usize,
    policy: &TruncationPolicy,
) -> Result<(Vec<Vec<f64>>, SeriesValue)> {
    GEvalRequest { k: max_a, l: max_b, y, z, t, q, policy: *policy }.validate()?;
    let limit = policy.max_terms.min(MAX_SERIES_TERMS);
    let qv = q.value();
    let omq = 1.0 - qv;
    let mut hy = HermiteSeq::new(y, q);
    let mut hz = HermiteSeq::new(z, q);
    let mut sup = SupConstants::new(q);
    let scale = omq.powf(-((max_a + max_b) as f64) / 2.0).max(1.0);
    let mut g = vec![vec![0.0; max_b + 1]; max_a + 1];
    let mut coef = 1.0; // t^m / [m]_q!
    let mut tm = 1.0; // |t|^m
    let mut poch = 1.0; // (q)_m
    let mut prev_bound = f64::INFINITY;
    for m in 0..limit {
        for (a, row) in g.iter_mut().enumerate() {
            let ha = coef * hy.get(m + a);
            for (b, v) in row.iter_mut().enumerate() {
                *v += ha * hz.get(m + b);
            }
        }
        tm *= t.abs();
        poch *= 1.0 - qv.powi(m as i32 + 1);
        coef *= t / q_number(m as u64 + 1, q);
        let bound = tm * sup.get(m + 1 + max_a) * sup.get(m + 1 + max_b) / poch * scale;
        if bound == 0.0 {
            let v = g[max_a][max_b];
            return Ok((g, SeriesValue { value: v, tail_bound: 0.0, terms: m + 1 }));
        }
        let ratio = bound / prev_bound;
        prev_bound = bound;
        if m >= policy.min_terms && ratio < 1.0 {
            let tail = bound / (1.0 - ratio);
            let mag = g.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs()));
            if tail < policy.tail_tol * mag {
                let v = g[max_a][max_b];
                return Ok((g, SeriesValue { value: v, tail_bound: tail, terms: m + 1 }));
            }
        }
    }
    Err(QError::SlowConvergence(format!("G-series did not converge within {limit} terms at t = {t}")))
}

/// Direct summation of `G_{k,l}(y,z,t|q)`.
pub fn g_series(req: &GEvalRequest) -> Result<SeriesValue> {
    let (g, mut sv) = g_table(req.y, req.z, req.t, req.q, req.k, req.l, &req.policy)?;
    sv.value = g[req.k][req.l];
    Ok(sv)
}

fn sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Right-hand side of the reduction
/// `G_{k,l} = sum_{i<j} (-1)^i [k over i] q^{binom(i,2)} t^i H_{k-i}(y) G_{0,i+l}
///   + (-1)^j q^{binom(j,2)} sum_{i=j}^{k} [k over i] [i-1 over j-1] t^i G_{k-i,i+l}`,
/// for `1 <= j <= k`, with every `G` summed directly.
pub fn g_reduce_kl(req: &GEvalRequest, j: usize) -> Result<f64> {
    let (k, l) = (req.k, req.l);
    if !(1 <= j && j <= k) {
        return Err(QError::ParamOutOfRange(format!("need 1 <= j <= k, got j = {j}, k = {k}")));
    }
    let (g, _) = g_table(req.y, req.z, req.t, req.q, k, k + l, &req.policy)?;
    let q = req.q;
    let qv = q.value();
    let hy = q_hermite_all(k, req.y, q);
    let mut s = 0.0;
    for i in 0..j {
        s += sign(i) * q_binomial(k as i64, i as i64, q) * qv.powi(binom2(i as u64)) * req.t.powi(i as i32)
            * hy[k - i]
            * g[0][i + l];
    }
    let mut tail = 0.0;
    for i in j..=k {
        tail += q_binomial(k as i64, i as i64, q)
            * q_binomial(i as i64 - 1, j as i64 - 1, q)
            * req.t.powi(i as i32)
            * g[k - i][i + l];
    }
    Ok(s + sign(j) * qv.powi(binom2(j as u64)) * tail)
}

/// `G_{k,0} = sum_{i<=k} (-1)^i [k over i] q^{binom(i,2)} t^i H_{k-i}(y) G_{0,i}`.
pub fn g_expansion(req: &GEvalRequest) -> Result<f64> {
    if req.k == 0 {
        return Ok(g_series(&req.with_kl(0, 0))?.value);
    }
    g_reduce_kl(&req.with_kl(req.k, 0), req.k)
}

/// `G_{k,0}` from the closed recursion in which only `G_{0,0}` is summed:
/// `G_{k,0} (1 - q^{k(k-1)} t^{2k}) = sum_{i<k} (-1)^i q^{binom(i,2)} [k over i] t^i
///   (H_{k-i}(y) G_{0,i} + (-1)^k q^{binom(k,2)} t^k H_{k-i}(z) G_{i,0})`,
/// using `G_{0,i}(y,z) = G_{i,0}(z,y)`.
pub fn g_closed_k0(req: &GEvalRequest) -> Result<f64> {
    req.validate()?;
    let k = req.k;
    let base = g_series(&req.with_kl(0, 0))?.value;
    let (q, t) = (req.q, req.t);
    let qv = q.value();
    let hy = q_hermite_all(k, req.y, q);
    let hz = q_hermite_all(k, req.z, q);
    // a[i] = G_{i,0}(y,z), b[i] = G_{i,0}(z,y)
    let mut a = vec![base];
    let mut b = vec![base];
    for kk in 1..=k {
        let den = 1.0 - qv.powi((kk * (kk - 1)) as i32) * t.powi(2 * kk as i32);
        if den.abs() < 1e-12 {
            return Err(QError::DegenerateDenominator { value: den });
        }
        let c = sign(kk) * qv.powi(binom2(kk as u64)) * t.powi(kk as i32);
        let (mut sa, mut sb) = (0.0, 0.0);
        for i in 0..kk {
            let w = sign(i) * qv.powi(binom2(i as u64)) * q_binomial(kk as i64, i as i64, q) * t.powi(i as i32);
            sa += w * (hy[kk - i] * b[i] + c * hz[kk - i] * a[i]);
            sb += w * (hz[kk - i] * a[i] + c * hy[kk - i] * b[i]);
        }
        a.push(sa / den);
        b.push(sb / den);
    }
    Ok(a[k])
}

/// `Theta_{k,l}(y,z,t|q) = G_{k,l} / G_{0,0}` as a polynomial in the
/// `H_i(y|q) H_j(z|q)` basis. Its total degree is `k + l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaPoly {
    pub k: usize,
    pub l: usize,
    pub t: f64,
    pub q: QParam,
    /// `coeffs[i][j]` multiplies `H_i(y) H_j(z)`; zero for `i + j > k + l`.
    pub coeffs: Vec<Vec<f64>>,
    /// Highest power of `y` (resp. `z`) with a coefficient above `1e-8`.
    pub y_degree: usize,
    pub z_degree: usize,
    pub condition: f64,
    /// Largest deviation from `G_{k,l}/G_{0,0}` on 50 off-grid points.
    pub residual: f64,
}

impl ThetaPoly {
    pub fn eval(&self, y: f64, z: f64) -> f64 {
        let d = self.k + self.l;
        let hy = q_hermite_all(d, y, self.q);
        let hz = q_hermite_all(d, z, self.q);
        let mut s = 0.0;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                s += c * hy[i] * hz[j];
            }
        }
        s
    }
}

/// First-kind Chebyshev nodes mapped to the interior of `S(q)`.
pub fn chebyshev_nodes(count: usize, q: QParam) -> Vec<f64> {
    let l = q.support_half_width();
    (0..count)
        .map(|j| l * (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * count) as f64).cos())
        .collect()
}

/// Deterministic scattered points in `0.95 S(q)`, away from any tensor grid.
fn probe_points(count: usize, q: QParam) -> Vec<(f64, f64)> {
    let l = 0.95 * q.support_half_width();
    let (g1, g2) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_2);
    (1..=count)
        .map(|i| {
            let u = (0.5 + g1 * i as f64).fract();
            let v = (0.5 + g2 * i as f64).fract();
            (l * (2.0 * u - 1.0), l * (2.0 * v - 1.0))
        })
        .collect()
}

/// Least-squares fit of `values` at `points` in a product q-Hermite basis.
/// Columns are scaled by the basis norms `sqrt([i]_q! [j]_q!)` before solving.
fn fit_hermite_basis(
    points: &[(f64, f64)],
    values: &[f64],
    basis: &[(usize, usize)],
    q: QParam,
) -> Result<(Vec<f64>, f64)> {
    let top = basis.iter().map(|(i, j)| (*i).max(*j)).max().unwrap_or(0);
    let norms: Vec<f64> = basis
        .iter()
        .map(|(i, j)| (q_factorial(*i as u64, q) * q_factorial(*j as u64, q)).sqrt())
        .collect();
    let mut mat = DMatrix::zeros(points.len(), basis.len());
    for (r, (y, z)) in points.iter().enumerate() {
        let hy = q_hermite_all(top, *y, q);
        let hz = q_hermite_all(top, *z, q);
        for (c, (i, j)) in basis.iter().enumerate() {
            mat[(r, c)] = hy[*i] * hz[*j] / norms[c];
        }
    }
    let svd = mat.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        return Err(QError::IllConditioned { cond });
    }
    let rhs = DVector::from_column_slice(values);
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|_| QError::IllConditioned { cond })?;
    Ok((sol.iter().zip(&norms).map(|(v, n)| v / n).collect(), cond))
}

/// Interpolates `Theta_{k,l}` on a `(k+l+1)^2` tensor grid of Chebyshev nodes.
pub fn theta_poly(k: usize, l: usize, t: f64, q: QParam) -> Result<ThetaPoly> {
    let d = k + l;
    let policy = TruncationPolicy::default();
    let ratio = |y: f64, z: f64| -> Result<f64> {
        let (g, _) = g_table(y, z, t, q, k, l, &policy)?;
        let (g00, _) = g_table(y, z, t, q, 0, 0, &policy)?;
        Ok(g[k][l] / g00[0][0])
    };
    GEvalRequest { k, l, y: 0.0, z: 0.0, t, q, policy }.validate()?;
    let nodes = chebyshev_nodes(d + 1, q);
    let points: Vec<(f64, f64)> = nodes.iter().flat_map(|y| nodes.iter().map(move |z| (*y, *z))).collect();
    let values = points.par_iter().map(|(y, z)| ratio(*y, *z)).collect::<Result<Vec<f64>>>()?;
    let basis: Vec<(usize, usize)> = (0..=d).flat_map(|i| (0..=d - i).map(move |j| (i, j))).collect();
    let (sol, condition) = fit_hermite_basis(&points, &values, &basis, q)?;
    let mut coeffs = vec![vec![0.0; d + 1]; d + 1];
    for ((i, j), c) in basis.iter().zip(&sol) {
        coeffs[*i][*j] = *c;
    }
    let (mut y_degree, mut z_degree) = (0, 0);
    for (i, row) in coeffs.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if c.abs() > 1e-8 {
                y_degree = y_degree.max(i);
                z_degree = z_degree.max(j);
            }
        }
    }
    let mut poly = ThetaPoly { k, l, t, q, coeffs, y_degree, z_degree, condition, residual: 0.0 };
    let probes = probe_points(50, q);
    let errs = probes
        .par_iter()
        .map(|(y, z)| Ok((ratio(*y, *z)? - poly.eval(*y, *z)).abs()))
        .collect::<Result<Vec<f64>>>()?;
    poly.residual = errs.into_iter().fold(0.0, f64::max);
    Ok(poly)
}

/// Parameters `(y, z, rho1, rho2, q)` of the two-sided conditional.
fn aw(y: f64, z: f64, rho1: f64, rho2: f64, q: QParam) -> Result<AwConditional> {
    if q.is_classical() {
        return Err(QError::Q1Unsupported);
    }
    AwConditional::new(y, z, rho1, rho2, q)
}

fn quad_spec(q: QParam) -> QuadratureSpec {
    QuadratureSpec::new(q).with_tol(1e-13, 1e-13)
}

/// `int H_n(x|q) phi(x|y,z,rho1,rho2,q) dx` for `n = 0..=n_max`.
pub fn g_n_quadrature_all(n_max: usize, y: f64, z: f64, rho1: f64, rho2: f64, q: QParam) -> Result<Vec<f64>> {
    let a = aw(y, z, rho1, rho2, q)?;
    let policy = TruncationPolicy::default();
    let mut failure = None;
    let (v, _) = integrate_vec(
        |x, out| match a.density(x, &policy) {
            Ok(d) => {
                for (o, h) in out.iter_mut().zip(q_hermite_all(n_max, x, q)) {
                    *o = h * d;
                }
            }
            Err(e) => failure = Some(e),
        },
        n_max + 1,
        &quad_spec(q),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `g_n` from the G-functions: `sum_i [n over i]_q rho1^i rho2^{n-i} G_{i,n-i}(y,z,rho1 rho2) / G_{0,0}`.
pub fn g_n_direct(n: usize, y: f64, z: f64, rho1: f64, rho2: f64, q: QParam) -> Result<f64> {
    let (g, _) = g_table(y, z, rho1 * rho2, q, n, n, &TruncationPolicy::default())?;
    Ok((0..=n)
        .map(|i| {
            q_binomial(n as i64, i as i64, q) * rho1.powi(i as i32) * rho2.powi((n - i) as i32) * g[i][n - i]
        })
        .sum::<f64>()
        / g[0][0])
}

/// The structural route to `g_n`: `Theta_{i,n-i}` interpolated once per
/// `(n, rho1, rho2, q)` and reused across `(y, z)`.
#[derive(Debug, Clone)]
pub struct GnStructure {
    pub n: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub q: QParam,
    thetas: Vec<(f64, ThetaPoly)>,
}

impl GnStructure {
    pub fn new(n: usize, rho1: f64, rho2: f64, q: QParam) -> Result<Self> {
        check_rho(rho1)?;
        check_rho(rho2)?;
        let t = rho1 * rho2;
        let thetas = (0..=n)
            .map(|i| {
                let w = q_binomial(n as i64, i as i64, q) * rho1.powi(i as i32) * rho2.powi((n - i) as i32);
                Ok((w, theta_poly(i, n - i, t, q)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GnStructure { n, rho1, rho2, q, thetas })
    }

    pub fn eval(&self, y: f64, z: f64) -> f64 {
        self.thetas.iter().map(|(w, th)| w * th.eval(y, z)).sum()
    }

    pub fn max_residual(&self) -> f64 {
        self.thetas.iter().map(|(_, th)| th.residual).fold(0.0, f64::max)
    }
}

/// `g_n` by quadrature and by the structural sum, with their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnValue {
    pub n: usize,
    pub quadrature: f64,
    pub structural: f64,
    pub difference: f64,
}

pub fn g_n_coeff(n: usize, y: f64, z: f64, rho1: f64, rho2: f64, q: QParam) -> Result<GnValue> {
    let quadrature = g_n_quadrature_all(n, y, z, rho1, rho2, q)?[n];
    let structural = GnStructure::new(n, rho1, rho2, q)?.eval(y, z);
    Ok(GnValue { n, quadrature, structural, difference: (quadrature - structural).abs() })
}

/// Partial sum `f_N(x) sum_{n<=N} H_n(x) g_n / [n]_q!` of the expansion of the
/// two-sided conditional density, with `g_n` from the G-functions.
pub fn poisson_mehler_expand(x: f64, y: f64, z: f64, rho1: f64, rho2: f64, q: QParam, big_n: usize) -> Result<f64> {
    let a = aw(y, z, rho1, rho2, q)?;
    let g = g_n_table(big_n, &a)?;
    expansion_partial_sum(x, &g, q)
}

/// `g_0..=g_N` at `(y, z)` from a single G-table.
pub fn g_n_table(big_n: usize, a: &AwConditional) -> Result<Vec<f64>> {
    let (rho1, rho2, q) = (a.rho1, a.rho2, a.q);
    let (g, _) = g_table(a.y, a.z, rho1 * rho2, q, big_n, big_n, &TruncationPolicy::default())?;
    Ok((0..=big_n)
        .map(|n| {
            (0..=n)
                .map(|i| {
                    q_binomial(n as i64, i as i64, q) * rho1.powi(i as i32) * rho2.powi((n - i) as i32) * g[i][n - i]
                })
                .sum::<f64>()
                / g[0][0]
        })
        .collect())
}

/// `f_N(x) sum_n H_n(x) g_n / [n]_q!` for given coefficients `g_n`.
pub fn expansion_partial_sum(x: f64, g: &[f64], q: QParam) -> Result<f64> {
    let s = Support::new(q);
    if !s.contains(x) || g.is_empty() {
        return Ok(0.0);
    }
    let h = q_hermite_all(g.len() - 1, x, q);
    let mut fact = 1.0;
    let mut sum = 0.0;
    for (n, gn) in g.iter().enumerate() {
        if n > 0 {
            fact *= q_number(n as u64, q);
        }
        sum += h[n] * gn / fact;
    }
    Ok(f_n(x, q, &TruncationPolicy::default())? * sum)
}

/// How an [`ACoeffTable`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ARoute {
    /// The printed linear systems for `n <= 3`; closed form plus ratio relations for `n = 4`.
    LinearSystem,
    /// Least-squares fit of quadrature values of `g_n` on a Chebyshev grid.
    InterpolationOracle,
}

/// Coefficients `A^{(n)}_{r,s}` of `E(H_n(X_i) | X_{i-1} = x_left, X_{i+1} = x_right)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ACoeffTable {
    pub n: usize,
    pub rho_left: f64,
    pub rho_right: f64,
    pub q: QParam,
    pub provenance: ARoute,
    #[serde(with = "rs_keys")]
    pub entries: BTreeMap<(usize, i64), f64>,
    /// Condition estimate of the system solved, when one was solved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
}

mod rs_keys {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<(usize, i64), f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|((r, c), v)| (format!("{r},{c}"), *v))
            .collect::<BTreeMap<String, f64>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, i64), f64>, D::Error> {
        BTreeMap::<String, f64>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                let (r, s) = k.split_once(',').ok_or_else(|| D::Error::custom(format!("bad key {k:?}")))?;
                let r = r.trim().parse().map_err(D::Error::custom)?;
                let s = s.trim().parse().map_err(D::Error::custom)?;
                Ok(((r, s), v))
            })
            .collect()
    }
}

/// Index pairs `(r, s)` of `A^{(n)}` in row order, with the right-neighbour degree `l`.
pub fn a_index_set(n: usize) -> Vec<(usize, i64, usize)> {
    let h = (n / 2) as i64;
    (0..=n / 2)
        .flat_map(|r| (0..=n - 2 * r).map(move |l| (r, -h + r as i64 + l as i64, l)))
        .collect()
}

impl ACoeffTable {
    pub fn get(&self, r: usize, s: i64) -> Option<f64> {
        self.entries.get(&(r, s)).copied()
    }

    /// `sum A_{r,s} H_{n-2r-l}(x_left) H_l(x_right)`.
    pub fn eval(&self, x_left: f64, x_right: f64) -> f64 {
        let hl = q_hermite_all(self.n, x_left, self.q);
        let hr = q_hermite_all(self.n, x_right, self.q);
        a_index_set(self.n)
            .into_iter()
            .map(|(r, s, l)| self.entries[&(r, s)] * hl[self.n - 2 * r - l] * hr[l])
            .sum()
    }

    pub fn max_difference(&self, other: &ACoeffTable) -> f64 {
        self.entries
            .iter()
            .map(|(k, v)| (v - other.entries.get(k).copied().unwrap_or(f64::NAN)).abs())
            .fold(0.0, f64::max)
    }
}

/// `A^{(n)}_{0, -floor(n/2) + l} = [n over l] rho_L^{n-l} (rho_R^2)_{n-l} rho_R^l (rho_L^2)_l / (rho_L^2 rho_R^2)_n`.
pub fn a_closed_form(n: usize, l: usize, rho_left: f64, rho_right: f64, q: QParam) -> Result<f64> {
    let pol = TruncationPolicy::default();
    let (a2, b2) = (rho_left * rho_left, rho_right * rho_right);
    let poch = |a: f64, m: usize| q_pochhammer(a, q, Extent::Finite(m as u64), &pol);
    Ok(q_binomial(n as i64, l as i64, q)
        * rho_left.powi((n - l) as i32)
        * poch(b2, n - l)?
        * rho_right.powi(l as i32)
        * poch(a2, l)?
        / poch(a2 * b2, n)?)
}

/// Ratio `A_{r,s} / A_{0,s}` stated for `n <= 4`.
pub fn a_relation_ratio(n: usize, r: usize, s: i64, rho_left: f64, rho_right: f64, q: QParam) -> Option<f64> {
    let p = rho_left * rho_right;
    match (n, r) {
        (_, 0) => Some(1.0),
        (1..=3, 1) => Some(-q_number(n as u64 - 1, q) * p),
        (4, 1) if s == 0 => Some(-q_number(2, q).powi(2) * p),
        (4, 1) => Some(-q_number(3, q) * p),
        (4, 2) => Some(q.value() * (1.0 + q.value()) * p * p),
        _ => None,
    }
}

fn check_a_params(n: usize, rho_left: f64, rho_right: f64, q: QParam) -> Result<()> {
    check_rho(rho_left)?;
    check_rho(rho_right)?;
    if rho_left == 0.0 || rho_right == 0.0 {
        return Err(QError::ParamOutOfRange("rho_left and rho_right must be nonzero".into()));
    }
    if (rho_left * rho_right).abs() > 0.95 {
        return Err(QError::ParamOutOfRange("|rho_left rho_right| must be <= 0.95".into()));
    }
    let p2 = (rho_left * rho_right).powi(2);
    let den = q_pochhammer(p2, q, Extent::Finite(n as u64), &TruncationPolicy::default())?;
    if den.abs() < 1e-8 {
        return Err(QError::DegenerateDenominator { value: den });
    }
    Ok(())
}

/// Solves for `A^{(n)}` by the chosen route.
pub fn solve_a(n: usize, rho_left: f64, rho_right: f64, q: QParam, route: ARoute) -> Result<ACoeffTable> {
    if q.is_classical() {
        return Err(QError::Q1Unsupported);
    }
    check_a_params(n, rho_left, rho_right, q)?;
    match route {
        ARoute::LinearSystem => solve_a_linear(n, rho_left, rho_right, q),
        ARoute::InterpolationOracle => solve_a_oracle(n, rho_left, rho_right, q),
    }
}

fn table(n: usize, rl: f64, rr: f64, q: QParam, route: ARoute, vals: &[f64], cond: Option<f64>) -> ACoeffTable {
    let entries = a_index_set(n).into_iter().zip(vals).map(|((r, s, _), v)| ((r, s), *v)).collect();
    ACoeffTable { n, rho_left: rl, rho_right: rr, q, provenance: route, entries, condition: cond }
}

fn solve_a_linear(n: usize, rl: f64, rr: f64, q: QParam) -> Result<ACoeffTable> {
    let p = rl * rr;
    let (q2, q3) = (q_number(2, q), q_number(3, q));
    let (mat, rhs): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![1.0, p, p, 1.0], vec![rl, rr]),
        2 => (
            vec![
                1.0, p, p * p, 0.0, //
                p * p, p, 1.0, 0.0, //
                0.0, p, 0.0, 1.0, //
                q2 * p, 1.0 + q2 * p * p, q2 * p, p,
            ],
            vec![rl * rl, rr * rr, 0.0, q2 * p],
        ),
        3 => {
            let (p2, p3) = (p * p, p * p * p);
            (
                vec![
                    1.0, p, p2, p3, 0.0, 0.0, //
                    p3, p2, p, 1.0, 0.0, 0.0, //
                    0.0, q2 * p, q2 * p2, 0.0, 1.0, p, //
                    0.0, q2 * p2, q2 * p, 0.0, p, 1.0, //
                    q3 * p, 1.0 + q2 * q2 * p2, q2 * p + q3 * p3, q3 * p2, p, p2, //
                    q3 * p2, q2 * p + q3 * p3, 1.0 + q2 * q2 * p2, q3 * p, p2, p,
                ],
                vec![rl.powi(3), rr.powi(3), 0.0, 0.0, q3 * rl * rl * rr, q3 * rl * rr * rr],
            )
        }
        4 => {
            let vals = a_index_set(4)
                .into_iter()
                .map(|(r, s, _)| {
                    let l0 = (s + 2) as usize;
                    let ratio = a_relation_ratio(4, r, s, rl, rr, q).expect("relation exists for n = 4");
                    Ok(ratio * a_closed_form(4, l0, rl, rr, q)?)
                })
                .collect::<Result<Vec<f64>>>()?;
            return Ok(table(4, rl, rr, q, ARoute::LinearSystem, &vals, None));
        }
        _ => return Err(QError::ParamOutOfRange(format!("linear-system route covers n = 1..=4, got {n}"))),
    };
    let dim = rhs.len();
    let m = DMatrix::from_row_slice(dim, dim, &mat);
    let sv = m.clone().singular_values();
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if cond > 1e14 {
        return Err(QError::SingularSystem { cond });
    }
    let sol = m.lu().solve(&DVector::from_vec(rhs)).ok_or(QError::SingularSystem { cond })?;
    Ok(table(n, rl, rr, q, ARoute::LinearSystem, sol.as_slice(), Some(cond)))
}

fn solve_a_oracle(n: usize, rl: f64, rr: f64, q: QParam) -> Result<ACoeffTable> {
    let nodes = chebyshev_nodes(n + 3, q);
    let points: Vec<(f64, f64)> = nodes.iter().flat_map(|y| nodes.iter().map(move |z| (*y, *z))).collect();
    let values = points
        .par_iter()
        .map(|(y, z)| Ok(g_n_quadrature_all(n, *y, *z, rl, rr, q)?[n]))
        .collect::<Result<Vec<f64>>>()?;
    let idx = a_index_set(n);
    let basis: Vec<(usize, usize)> = idx.iter().map(|(r, _, l)| (n - 2 * r - l, *l)).collect();
    let (sol, cond) = fit_hermite_basis(&points, &values, &basis, q)?;
    Ok(table(n, rl, rr, q, ARoute::InterpolationOracle, &sol, Some(cond)))
}

/// Conditional variance of `X_i` given both neighbours, in several forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CondVarReport {
    pub x_left: f64,
    pub x_right: f64,
    pub rho_left: f64,
    pub rho_right: f64,
    pub q: f64,
    /// The printed expression with the ambiguous variable read as `x_right`.
    pub as_printed_x_right: f64,
    /// The printed expression with the ambiguous variable read as `x_left`.
    pub as_printed_x_left: f64,
    /// `C (1 - (1-q) p (x_L - p x_R)(x_R - p x_L) / (1-p^2)^2)`, `p = rho_L rho_R`,
    /// `C = (1-rho_L^2)(1-rho_R^2)/(1-q p^2)`, obtained from the `n <= 2` coefficients.
    pub derived: f64,
    /// `int x^2 phi - (int x phi)^2` by quadrature.
    pub oracle: f64,
}

impl CondVarReport {
    /// Names of the closed forms within `tol` of the quadrature value.
    pub fn matching(&self, tol: f64) -> Vec<&'static str> {
        [
            ("as_printed_x_right", self.as_printed_x_right),
            ("as_printed_x_left", self.as_printed_x_left),
            ("derived", self.derived),
        ]
        .into_iter()
        .filter(|(_, v)| (v - self.oracle).abs() <= tol)
        .map(|(n, _)| n)
        .collect()
    }
}

pub fn cond_var_two_sided(x_left: f64, x_right: f64, rho_left: f64, rho_right: f64, q: QParam) -> Result<CondVarReport> {
    let a = AwConditional::new(x_left, x_right, rho_left, rho_right, q)?;
    let qv = q.value();
    let p = rho_left * rho_right;
    let c = (1.0 - rho_left * rho_left) * (1.0 - rho_right * rho_right) / (1.0 - qv * p * p);
    let d2 = (1.0 - p * p).powi(2);
    let printed = |xi: f64| c * (1.0 - (1.0 - qv) * (x_left - p * x_right) * (xi - x_left * p) / d2);
    let derived = c * (1.0 - (1.0 - qv) * p * (x_left - p * x_right) * (x_right - p * x_left) / d2);
    let policy = TruncationPolicy::default();
    let spec = if q.is_classical() { QuadratureSpec::new(q).with_tol(1e-14, 1e-14) } else { quad_spec(q) };
    let mut failure = None;
    let (m, _) = integrate_vec(
        |x, out| match a.density(x, &policy) {
            Ok(d) => {
                out[0] = x * d;
                out[1] = x * x * d;
            }
            Err(e) => failure = Some(e),
        },
        2,
        &spec,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(CondVarReport {
        x_left,
        x_right,
        rho_left,
        rho_right,
        q: qv,
        as_printed_x_right: printed(x_right),
        as_printed_x_left: printed(x_left),
        derived,
        oracle: m[1] - m[0] * m[0],
    })
}

/// One ratio examined by [`conjecture_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureEntry {
    pub r: usize,
    pub s: i64,
    /// `"same_s"` compares `A_{r,s}` with `A_{0,s}`; `"shifted"` compares
    /// `A_{r,s+r}` with `A_{0,s}`, the indexing used in the statement.
    pub reading: &'static str,
    /// `A_{r,.} / A_{0,.} / (rho_L rho_R)^r` at each probe point.
    pub normalized: Vec<f64>,
    /// Largest minus smallest normalized value over the probe points.
    pub spread: f64,
    /// The ratio stated for `n <= 4`, divided by `(rho_L rho_R)^r`, if any.
    pub stated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub n: usize,
    pub q: f64,
    pub rho_points: Vec<(f64, f64)>,
    pub entries: Vec<ConjectureEntry>,
}

/// Fits `A^{(n)}` by the interpolation oracle at several `(rho_L, rho_R)` and
/// reports whether `A_{r,.}/A_{0,.}` factors as `(rho_L rho_R)^r` times a
/// function of `q` alone. Asserts nothing.
pub fn conjecture_probe(n: usize, rho_left: f64, rho_right: f64, q: QParam) -> Result<ConjectureReport> {
    if !(1..=6).contains(&n) {
        return Err(QError::ParamOutOfRange(format!("conjecture probe covers n = 1..=6, got {n}")));
    }
    let rho_points = vec![(rho_left, rho_right), (0.3, 0.6), (0.6, -0.3), (-0.45, -0.5)];
    let tables = rho_points
        .iter()
        .map(|(a, b)| solve_a(n, *a, *b, q, ARoute::InterpolationOracle))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    for (r, s, _) in a_index_set(n) {
        if r == 0 {
            continue;
        }
        for (reading, base) in [("same_s", s), ("shifted", s - r as i64)] {
            if tables[0].get(0, base).is_none() {
                continue;
            }
            let normalized: Vec<f64> = tables
                .iter()
                .zip(&rho_points)
                .map(|(t, (a, b))| t.entries[&(r, s)] / t.entries[&(0, base)] / (a * b).powi(r as i32))
                .collect();
            let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = rho_left * rho_right;
            let stated = a_relation_ratio(n, r, s, rho_left, rho_right, q).map(|v| v / p.powi(r as i32));
            entries.push(ConjectureEntry { r, s, reading, normalized, spread: hi - lo, stated });
        }
    }
    Ok(ConjectureReport { n, q: q.value(), rho_points, entries })
}

/// `int H_n(x) phi(x|y,z,rho1,rho2,q) dx` by plain quadrature; used by tests
/// and the verification suite as an independent reference.
pub fn g_n_reference(n: usize, y: f64, z: f64, rho1: f64, rho2: f64, q: QParam) -> Result<f64> {
    let a = aw(y, z, rho1, rho2, q)?;
    let pol = TruncationPolicy::default();
    let mut failure = None;
    let r = integrate(
        |x| match a.density(x, &pol) {
            Ok(d) => crate::orthopoly::q_hermite(n, x, q) * d,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        &quad_spec(q),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{f_cn, CondParams};

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn g_series_basics() {
        let qp = q(0.5);
        let r = GEvalRequest::new(2, 3, 0.4, -0.7, 0.0, qp).unwrap();
        let want = q_hermite_all(2, 0.4, qp)[2] * q_hermite_all(3, -0.7, qp)[3];
        assert!((g_series(&r).unwrap().value - want).abs() < 1e-15);

        let (y, z, rho) = (0.3, -0.2, 0.5);
        let r = GEvalRequest::new(0, 0, y, z, rho, qp).unwrap();
        let pol = TruncationPolicy::default();
        let want = f_cn(y, &CondParams::new(z, rho, qp).unwrap(), &pol).unwrap() / f_n(y, qp, &pol).unwrap();
        assert!((g_series(&r).unwrap().value - want).abs() < 1e-12);

        let r = GEvalRequest::new(3, 1, 0.8, -0.1, 0.35, q(-0.4)).unwrap();
        let a = g_series(&r).unwrap().value;
        let b = g_series(&r.swapped()).unwrap().value;
        assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn recursions_agree_with_series() {
        for (k, l, j) in [(2, 1, 1), (3, 0, 2), (3, 2, 3), (1, 1, 1)] {
            let r = GEvalRequest::new(k, l, 0.4, 0.1, 0.3, q(0.5)).unwrap();
            let want = g_series(&r).unwrap().value;
            assert!((g_reduce_kl(&r, j).unwrap() - want).abs() < 1e-9, "({k},{l},{j})");
        }
        for k in 0..=4 {
            let r = GEvalRequest::new(k, 0, 0.2, 0.5, 0.4, q(0.3)).unwrap();
            let want = g_series(&r).unwrap().value;
            assert!((g_expansion(&r).unwrap() - want).abs() < 1e-9);
            assert!((g_closed_k0(&r).unwrap() - want).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn theta_limits_and_degree() {
        let qp = q(0.5);
        let th = theta_poly(0, 3, 0.0, qp).unwrap();
        assert!((th.coeffs[0][3] - 1.0).abs() < 1e-10);
        let th = theta_poly(2, 0, 0.0, qp).unwrap();
        assert!((th.coeffs[2][0] - 1.0).abs() < 1e-10);
        let th = theta_poly(1, 0, 0.3, qp).unwrap();
        // (y - t z) / (1 - t^2)
        assert!((th.eval(0.7, -0.4) - (0.7 + 0.3 * 0.4) / (1.0 - 0.09)).abs() < 1e-10);
        let th = theta_poly(2, 1, 0.4, qp).unwrap();
        assert!(th.residual < 1e-7);
        assert_eq!(th.y_degree, 3);
    }

    #[test]
    fn g_n_routes() {
        let qp = q(0.5);
        let (y, z, r1, r2) = (0.3, -0.2, 0.5, 0.4);
        let g0 = g_n_coeff(0, y, z, r1, r2, qp).unwrap();
        assert!((g0.quadrature - 1.0).abs() < 1e-12);
        let g1 = g_n_coeff(1, y, z, r1, r2, qp).unwrap();
        let mean = (r1 * (1.0 - r2 * r2) * y + r2 * (1.0 - r1 * r1) * z) / (1.0 - r1 * r1 * r2 * r2);
        assert!((g1.quadrature - mean).abs() < 1e-10);
        for n in 2..=4 {
            let g = g_n_coeff(n, y, z, r1, r2, qp).unwrap();
            assert!(g.difference < 1e-7, "n = {n}: {g:?}");
            assert!((g_n_direct(n, y, z, r1, r2, qp).unwrap() - g.quadrature).abs() < 1e-9);
        }
    }

    #[test]
    fn expansion_partial_sums() {
        let qp = q(0.5);
        let pol = TruncationPolicy::default();
        let x = 0.1;
        assert!((poisson_mehler_expand(x, 0.3, -0.2, 0.5, 0.4, qp, 0).unwrap() - f_n(x, qp, &pol).unwrap()).abs() < 1e-14);
        let want = aw(0.3, -0.2, 0.5, 0.4, qp).unwrap().density(x, &pol).unwrap();
        let errs: Vec<f64> = [8, 16, 24, 32]
            .iter()
            .map(|n| (poisson_mehler_expand(x, 0.3, -0.2, 0.5, 0.4, qp, *n).unwrap() - want).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(errs[3] < 1e-10);
    }

    #[test]
    fn a_tables() {
        let qp = q(0.5);
        let t1 = solve_a(1, 0.5, 0.4, qp, ARoute::LinearSystem).unwrap();
        assert!((t1.get(0, 0).unwrap() - 0.4375).abs() < 1e-14);
        assert!((t1.get(0, 1).unwrap() - 0.3125).abs() < 1e-14);
        let t2 = solve_a(2, 0.5, 0.4, qp, ARoute::LinearSystem).unwrap();
        for ((r, s), v) in [((0, -1), 0.205_357_14), ((0, 0), 0.200_892_86), ((0, 1), 0.111_607_14), ((1, 0), -0.040_178_57)] {
            assert!((t2.get(r, s).unwrap() - v).abs() < 1e-8);
        }
        for n in 1..=4 {
            let a = solve_a(n, 0.5, 0.4, qp, ARoute::LinearSystem).unwrap();
            let b = solve_a(n, 0.5, 0.4, qp, ARoute::InterpolationOracle).unwrap();
            assert_eq!(a.entries.len(), ((n + 2) / 2) * ((n + 3) / 2));
            assert!(a.max_difference(&b) < 1e-8, "n = {n}");
        }
        let json = serde_json::to_string(&t2).unwrap();
        assert!(json.contains("\"0,-1\""));
        assert_eq!(serde_json::from_str::<ACoeffTable>(&json).unwrap(), t2);
    }

    #[test]
    fn conditional_variance_forms() {
        let r = cond_var_two_sided(0.3, -0.1, 0.5, 0.4, q(0.5)).unwrap();
        assert!((r.oracle - 0.646_428_571_4).abs() < 1e-9);
        assert!((r.derived - r.oracle).abs() < 1e-9);
        let one = cond_var_two_sided(0.3, -0.1, 0.5, 0.4, QParam::classical()).unwrap();
        let want = 0.75 * 0.84 / (1.0 - 0.04);
        assert!((one.oracle - want).abs() < 1e-10);
        assert!((one.as_printed_x_right - want).abs() < 1e-15);
    }

    #[test]
    fn probe_reports_small_n() {
        let rep = conjecture_probe(2, 0.5, 0.4, q(0.5)).unwrap();
        let e = rep.entries.iter().find(|e| e.reading == "same_s").unwrap();
        assert!(e.spread < 1e-7);
        assert!((e.normalized[0] - e.stated.unwrap()).abs() < 1e-7);
    }
}
