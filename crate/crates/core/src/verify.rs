//! The verification suite: every identity the library relies on, checked
//! numerically against the quadrature oracle or an independent route.
//!
//! Each check reports one or more measured errors with their tolerances. A
//! check whose numerics give up (slow convergence, `q = 1` where a product is
//! undefined) is reported as skipped with the reason instead of failing.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{f_cn, f_cn_poisson_mehler, f_mcn, f_mn, f_n, AwConditional, CondParams};
use crate::error::{QError, Result};
use crate::expansions::{
    a_closed_form, a_index_set, a_relation_ratio, chebyshev_nodes, cond_var_two_sided, expansion_partial_sum, g_closed_k0,
    g_expansion, g_n_direct, g_n_quadrature_all, g_n_table, g_reduce_kl, g_series, solve_a, ARoute, GEvalRequest,
    GnStructure,
};
use crate::multivariate::{gebelein_check, IndexSet, MVQNormalSpec};
use crate::orthopoly::{al_salam_chihara, chebyshev_u, eval_hermite_series, hermite_prob, q_hermite_all};
use crate::qseries::{q_factorial, q_number, q_pochhammer, q_pochhammer_inf, Extent, QParam, TruncationPolicy};
use crate::quadrature::{catalan_self_test, integrate_vec, CdfTable, QuadratureSpec};
use crate::sampling::{ks_critical_1pct, rng_for, sample_chain, sample_qnormal, SamplerConfig};

/// Which checks to run and with what overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Check ids or module names; empty runs everything.
    pub only: Vec<String>,
    /// Replaces the built-in `q` values of every check that takes one.
    pub q: Option<f64>,
    /// Replaces the tolerance of every deterministic comparison.
    pub tol: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// One measured quantity and the bound it must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl Part {
    fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Part { name: name.into(), error, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub module: String,
    pub about: String,
    pub status: Status,
    pub parts: Vec<Part>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub seconds: f64,
}

impl CheckResult {
    pub fn part(&self, name: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub version: String,
    pub options: VerifyOptions,
    pub checks: Vec<CheckResult>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl VerifyReport {
    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    /// One line per check, then one indented line per part.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            let _ = writeln!(s, "{tag} {:<22} {}  ({:.2}s)", c.id, c.about, c.seconds);
            for p in &c.parts {
                let mark = if p.passed() { "ok " } else { "BAD" };
                let _ = writeln!(s, "    {mark} {:<40} {:>11.3e}  <= {:.1e}", p.name, p.error, p.tolerance);
            }
            for n in &c.notes {
                let _ = writeln!(s, "    note: {n}");
            }
            if let Some(r) = &c.reason {
                let _ = writeln!(s, "    reason: {r}");
            }
        }
        let _ = writeln!(s, "{} passed, {} failed, {} skipped", self.passed, self.failed, self.skipped);
        s
    }
}

struct Ctx {
    q: Option<QParam>,
    tol: Option<f64>,
    seed: u64,
    notes: Vec<String>,
}

impl Ctx {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn qs(&self, defaults: &[f64]) -> Result<Vec<QParam>> {
        match self.q {
            Some(q) => Ok(vec![q]),
            None => defaults.iter().map(|v| QParam::new(*v)).collect(),
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }
}

type CheckFn = fn(&mut Ctx) -> Result<Vec<Part>>;

struct Check {
    id: &'static str,
    module: &'static str,
    about: &'static str,
    run: CheckFn,
}

const CHECKS: &[Check] = &[
    Check { id: "quadrature-self-test", module: "quadrature", about: "semicircle moments are Catalan numbers", run: quadrature_self_test },
    Check { id: "orthogonality", module: "orthopoly", about: "int H_n H_m f_N = delta [n]_q!", run: orthogonality },
    Check { id: "projection", module: "densities", about: "int H_n f_CN = rho^n H_n(y)", run: projection },
    Check { id: "al-salam-chihara", module: "orthopoly", about: "int P_n P_m f_CN = delta (rho^2)_n [n]_q!", run: al_salam_chihara_norms },
    Check { id: "chapman-kolmogorov", module: "densities", about: "f_CN composes over the middle variable", run: chapman_kolmogorov },
    Check { id: "generating-functions", module: "densities", about: "int phi f_N = 1 and int tau f_CN = 1", run: generating_functions },
    Check { id: "w-series", module: "qseries", about: "sums of W_n t^n / (q)_n in closed form", run: w_series },
    Check { id: "poisson-mehler", module: "densities", about: "Poisson-Mehler sum equals the product form of f_CN", run: poisson_mehler },
    Check { id: "mn-moments", module: "densities", about: "moments of the (t,q)-modified Normal", run: mn_moments },
    Check { id: "mcn-moments", module: "densities", about: "mean and variance of the modified conditional Normal", run: mcn_moments },
    Check { id: "g-recursions", module: "expansions", about: "G_{k,l} recursions against direct summation", run: g_recursions },
    Check { id: "aw-expansion", module: "expansions", about: "12-term expansion of the two-sided conditional", run: aw_expansion },
    Check { id: "gn-dual-route", module: "expansions", about: "g_n by quadrature, G-functions and interpolated Theta", run: gn_dual_route },
    Check { id: "a-coefficients", module: "expansions", about: "A^(n) by linear systems, closed form and oracle", run: a_coefficients },
    Check { id: "conditional-variance", module: "expansions", about: "two-sided conditional variance against quadrature", run: conditional_variance },
    Check { id: "gebelein", module: "multivariate", about: "generalized Gebelein inequality on random polynomials", run: gebelein },
    Check { id: "sampling", module: "sampling", about: "chain correlations, marginal moments, KS and reproducibility", run: sampling },
    Check { id: "q-limit", module: "orthopoly", about: "q -> 1 and q = 0 limits", run: q_limit },
];

/// Ids of all checks in run order.
pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.id).collect()
}

fn selected(c: &Check, only: &[String]) -> bool {
    only.is_empty() || only.iter().any(|o| o == c.id || o == c.module)
}

pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    let q = opts.q.map(QParam::new).transpose()?;
    if let Some(t) = opts.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(QError::ParamOutOfRange(format!("tolerance must be positive, got {t}")));
        }
    }
    for o in &opts.only {
        if !CHECKS.iter().any(|c| o == c.id || o == c.module) {
            return Err(QError::ParamOutOfRange(format!("unknown check or module {o:?}")));
        }
    }
    let mut checks = Vec::new();
    for c in CHECKS.iter().filter(|c| selected(c, &opts.only)) {
        let mut ctx = Ctx { q, tol: opts.tol, seed: opts.seed, notes: Vec::new() };
        let start = Instant::now();
        let out = (c.run)(&mut ctx);
        let seconds = start.elapsed().as_secs_f64();
        let (status, parts, reason) = match out {
            Ok(parts) => {
                let ok = parts.iter().all(Part::passed);
                (if ok { Status::Pass } else { Status::Fail }, parts, None)
            }
            Err(e) if e.is_convergence() || e == QError::Q1Unsupported => (Status::Skipped, Vec::new(), Some(e.to_string())),
            Err(e) => (Status::Fail, Vec::new(), Some(e.to_string())),
        };
        checks.push(CheckResult {
            id: c.id.into(),
            module: c.module.into(),
            about: c.about.into(),
            status,
            parts,
            notes: ctx.notes,
            reason,
            seconds,
        });
    }
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    Ok(VerifyReport {
        version: env!("CARGO_PKG_VERSION").into(),
        options: opts.clone(),
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        skipped: count(Status::Skipped),
        checks,
    })
}

fn pol() -> TruncationPolicy {
    TruncationPolicy::default()
}

/// Integrates a vector of functions whose evaluation may fail; the first
/// failure is returned.
fn quad_vec<F>(mut f: F, dim: usize, spec: &QuadratureSpec) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut failure = None;
    let (v, _) = integrate_vec(
        |x, out| {
            if let Err(e) = f(x, out) {
                failure.get_or_insert(e);
            }
        },
        dim,
        spec,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn quad<F: FnMut(f64) -> Result<f64>>(mut f: F, spec: &QuadratureSpec) -> Result<f64> {
    Ok(quad_vec(
        |x, out| {
            out[0] = f(x)?;
            Ok(())
        },
        1,
        spec,
    )?[0])
}

/// `count` points spread over `frac * S(q)`, both ends included.
fn spread(count: usize, frac: f64, q: QParam) -> Vec<f64> {
    let l = frac * if q.is_classical() { 3.0 } else { q.support_half_width() };
    (0..count).map(|i| -l + 2.0 * l * i as f64 / (count - 1) as f64).collect()
}

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

fn quadrature_self_test(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let spec = QuadratureSpec::new(QParam::new(0.0)?);
    let rows = catalan_self_test(20, &spec)?;
    let err = max_abs(rows.iter().map(|(_, v, c, _)| v - c));
    let covered = rows.iter().filter(|(_, v, c, e)| (v - c).abs() <= e.max(f64::EPSILON * c)).count();
    ctx.note(format!("error estimate covers the true error in {covered} of {} moments", rows.len()));
    Ok(vec![
        Part::new("moments up to degree 20", err, ctx.tol(1e-10)),
        Part::new("fraction of estimates not covering the error", 1.0 - covered as f64 / rows.len() as f64, 0.05),
    ])
}

fn orthogonality(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const N: usize = 10;
    let mut parts = Vec::new();
    for q in ctx.qs(&[-0.7, -0.3, 0.0, 0.5, 0.9])? {
        let p = pol();
        let v = quad_vec(
            |x, out| {
                let h = q_hermite_all(N, x, q);
                let w = f_n(x, q, &p)?;
                for n in 0..=N {
                    for m in 0..=N {
                        out[n * (N + 1) + m] = h[n] * h[m] * w;
                    }
                }
                Ok(())
            },
            (N + 1) * (N + 1),
            &QuadratureSpec::new(q),
        )?;
        let err = max_abs((0..=N).flat_map(|n| {
            let v = &v;
            (0..=N).map(move |m| v[n * (N + 1) + m] - if n == m { q_factorial(n as u64, q) } else { 0.0 })
        }));
        parts.push(Part::new(format!("n, m <= {N} at q = {}", q.value()), err, ctx.tol(1e-8)));
    }
    Ok(parts)
}

fn rho_q_grid(ctx: &Ctx) -> Result<Vec<(f64, QParam)>> {
    let qs = ctx.qs(&[0.5, -0.5])?;
    Ok([0.6, -0.4].into_iter().flat_map(|r| qs.iter().map(move |q| (r, *q))).collect())
}

fn projection(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const N: usize = 8;
    let mut parts = Vec::new();
    for (rho, q) in rho_q_grid(ctx)? {
        let mut err: f64 = 0.0;
        for y in spread(5, 0.9, q) {
            let cond = CondParams::new(y, rho, q)?;
            let p = pol();
            let v = quad_vec(
                |x, out| {
                    let w = f_cn(x, &cond, &p)?;
                    for (o, h) in out.iter_mut().zip(q_hermite_all(N, x, q)) {
                        *o = h * w;
                    }
                    Ok(())
                },
                N + 1,
                &QuadratureSpec::new(q),
            )?;
            let hy = q_hermite_all(N, y, q);
            err = err.max(max_abs((0..=N).map(|n| v[n] - rho.powi(n as i32) * hy[n])));
        }
        parts.push(Part::new(format!("n <= {N}, 5 y at rho = {rho}, q = {}", q.value()), err, ctx.tol(1e-8)));
    }
    Ok(parts)
}

fn al_salam_chihara_norms(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const N: usize = 8;
    let mut parts = Vec::new();
    for (rho, q) in rho_q_grid(ctx)? {
        let mut err: f64 = 0.0;
        for y in spread(3, 0.7, q) {
            let cond = CondParams::new(y, rho, q)?;
            let p = pol();
            let v = quad_vec(
                |x, out| {
                    let w = f_cn(x, &cond, &p)?;
                    let ps: Vec<f64> = (0..=N).map(|n| al_salam_chihara(n, x, y, rho, q)).collect();
                    for n in 0..=N {
                        for m in 0..=N {
                            out[n * (N + 1) + m] = ps[n] * ps[m] * w;
                        }
                    }
                    Ok(())
                },
                (N + 1) * (N + 1),
                &QuadratureSpec::new(q),
            )?;
            for n in 0..=N {
                let norm = q_pochhammer(rho * rho, q, Extent::Finite(n as u64), &p)? * q_factorial(n as u64, q);
                for m in 0..=N {
                    let want = if n == m { norm } else { 0.0 };
                    err = err.max((v[n * (N + 1) + m] - want).abs());
                }
            }
        }
        parts.push(Part::new(format!("n, m <= {N}, 3 y at rho = {rho}, q = {}", q.value()), err, ctx.tol(1e-8)));
    }
    Ok(parts)
}

fn chapman_kolmogorov(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    for (i, q) in ctx.qs(&[0.5, -0.4])?.into_iter().enumerate() {
        let (r1, r2) = (0.6, -0.5);
        let l = q.support_half_width();
        let mut rng = rng_for(ctx.seed, i as u64);
        let p = pol();
        let mut err: f64 = 0.0;
        for _ in 0..10 {
            let x = l * rng.random_range(-0.95..0.95);
            let z = l * rng.random_range(-0.95..0.95);
            let lhs = quad(
                |y| Ok(f_cn(x, &CondParams::new(y, r1, q)?, &p)? * f_cn(y, &CondParams::new(z, r2, q)?, &p)?),
                &QuadratureSpec::new(q),
            )?;
            let rhs = f_cn(x, &CondParams::new(z, r1 * r2, q)?, &p)?;
            err = err.max((lhs - rhs).abs());
        }
        parts.push(Part::new(format!("10 random (x, z) at q = {}", q.value()), err, ctx.tol(1e-8)));
    }
    Ok(parts)
}

fn generating_functions(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    let p = pol();
    let qs = ctx.qs(&[0.5, -0.3])?;
    for (t, q) in [0.4, -0.6].into_iter().zip(qs.iter().cycle()) {
        let v = quad(|x| f_mn(x, t, *q, &p), &QuadratureSpec::new(*q))?;
        parts.push(Part::new(format!("int phi f_N at t = {t}, q = {}", q.value()), v - 1.0, ctx.tol(1e-9)));
    }
    let qs = ctx.qs(&[0.6, -0.5])?;
    for ((t, y, rho), q) in [(0.5, 0.3, -0.4), (-0.3, -1.0, 0.7)].into_iter().zip(qs.iter().cycle()) {
        let cond = CondParams::new(y, rho, *q)?;
        let v = quad(|x| f_mcn(x, t, &cond, &p), &QuadratureSpec::new(*q))?;
        parts.push(Part::new(
            format!("int tau f_CN at (t, y, rho) = ({t}, {y}, {rho}), q = {}", q.value()),
            v - 1.0,
            ctx.tol(1e-9),
        ));
    }
    for part in parts.iter_mut() {
        part.error = part.error.abs();
    }
    Ok(parts)
}

/// Signed Gaussian binomial row sums `W_0..=W_n`.
fn w_row_sums(n: usize, q: QParam) -> Vec<f64> {
    let qv = q.value();
    let mut row = vec![1.0];
    let mut out = vec![1.0];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        let mut qi = qv;
        for i in 1..row.len() {
            next[i] = row[i - 1] + qi * row[i];
            qi *= qv;
        }
        out.push(next.iter().sum());
        row = next;
    }
    out
}

/// `|a - b| / max(1, |b|)`: absolute for small values, relative for large ones.
fn scaled_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn w_series(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const N: usize = 600;
    let mut first: f64 = 0.0;
    let mut second: f64 = 0.0;
    for q in ctx.qs(&[-0.8, -0.3, 0.0, 0.5, 0.8])? {
        if q.is_classical() {
            return Err(QError::Q1Unsupported);
        }
        let w = w_row_sums(N, q);
        for t in [-0.8, -0.4, 0.3, 0.8] {
            let (mut s1, mut s2) = (0.0, 0.0);
            let mut tn = 1.0;
            let mut qn = 1.0;
            let mut qk = q.value();
            for wn in &w {
                s1 += wn * tn / qn;
                s2 += wn * wn * tn / qn;
                tn *= t;
                qn *= 1.0 - qk;
                qk *= q.value();
            }
            let ti = q_pochhammer_inf(t, q)?;
            first = first.max(scaled_err(s1, 1.0 / (ti * ti)));
            second = second.max(scaled_err(s2, q_pochhammer_inf(t * t, q)? / ti.powi(4)));
        }
    }
    Ok(vec![
        Part::new("sum W_n t^n/(q)_n = 1/(t)_inf^2", first, ctx.tol(1e-8)),
        Part::new("sum W_n^2 t^n/(q)_n = (t^2)_inf/(t)_inf^4", second, ctx.tol(1e-8)),
    ])
}

fn poisson_mehler(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let start = Instant::now();
    let cases: Vec<(f64, QParam)> = match ctx.q {
        Some(q) => vec![(0.5, q), (-0.5, q)],
        None => vec![(0.5, QParam::new(0.5)?), (-0.5, QParam::new(0.5)?), (0.3, QParam::new(-0.6)?)],
    };
    let mut parts = Vec::new();
    for (rho, q) in cases {
        let grid = spread(21, 1.0, q);
        let pts: Vec<(f64, f64)> = grid.iter().flat_map(|x| grid.iter().map(move |y| (*x, *y))).collect();
        let errs = pts
            .par_iter()
            .map(|(x, y)| {
                let cond = CondParams::new(*y, rho, q)?;
                let (pm, _) = f_cn_poisson_mehler(*x, &cond, 1e-11, 4000)?;
                Ok((pm - f_cn(*x, &cond, &pol())?).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        parts.push(Part::new(format!("21x21 grid at rho = {rho}, q = {}", q.value()), max_abs(errs), ctx.tol(1e-8)));
    }
    parts.push(Part::new("runtime in seconds", start.elapsed().as_secs_f64(), 10.0));
    Ok(parts)
}

/// `int x^k f` for `k = 1..=kmax`.
fn raw_moments<F: FnMut(f64) -> Result<f64>>(mut f: F, kmax: usize, q: QParam) -> Result<Vec<f64>> {
    let spec = QuadratureSpec::new(q).with_tol(1e-13, 1e-13);
    quad_vec(
        |x, out| {
            let d = f(x)?;
            let mut p = d;
            for o in out.iter_mut() {
                p *= x;
                *o = p;
            }
            Ok(())
        },
        kmax,
        &spec,
    )
}

fn mn_moments(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let t = 0.4;
    let mut parts = Vec::new();
    for q in ctx.qs(&[0.5])? {
        let qv = q.value();
        let m = raw_moments(|x| f_mn(x, t, q, &pol()), 4, q)?;
        let mean = m[0];
        let c2 = m[1] - mean * mean;
        let c3 = m[2] - 3.0 * mean * m[1] + 2.0 * mean.powi(3);
        let c4 = m[3] - 4.0 * mean * m[2] + 6.0 * mean * mean * m[1] - 3.0 * mean.powi(4);
        let tol = ctx.tol(1e-7);
        let at = format!("(t, q) = ({t}, {qv})");
        parts.push(Part::new(format!("mean at {at}"), (mean - t).abs(), tol));
        parts.push(Part::new(format!("variance at {at}"), (c2 - 1.0).abs(), tol));
        parts.push(Part::new(format!("third central at {at}"), (c3 + t * (1.0 - qv)).abs(), tol));
        let printed = 2.0 + qv - t * t * (5.0 + 6.0 * qv + qv * qv);
        let derived = 2.0 + qv + t * t * (1.0 - qv) * (1.0 - qv);
        parts.push(Part::new(format!("fourth central, printed form, at {at}"), (c4 - printed).abs(), tol));
        parts.push(Part::new(format!("fourth central, 2+q+t^2(1-q)^2, at {at}"), (c4 - derived).abs(), tol));
        ctx.note(format!("fourth central moment {c4:.12} at {at}; printed {printed:.12}, derived {derived:.12}"));
    }
    Ok(parts)
}

fn mcn_moments(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    let qs = ctx.qs(&[0.5, -0.4])?;
    for ((y, rho, t), q) in [(0.5, 0.6, 0.4), (-0.8, -0.3, 0.5)].into_iter().zip(qs.iter().cycle()) {
        let q = *q;
        let qv = q.value();
        let cond = CondParams::new(y, rho, q)?;
        let m = raw_moments(|x| f_mcn(x, t, &cond, &pol()), 2, q)?;
        let var = m[1] - m[0] * m[0];
        let mean_want = rho * y + (1.0 - rho * rho) * t;
        let var_want = (1.0 - rho * rho) * (1.0 - (1.0 - qv) * t * y * rho + (1.0 - qv) * t * t * rho * rho);
        let at = format!("(y, rho, t, q) = ({y}, {rho}, {t}, {qv})");
        parts.push(Part::new(format!("mean at {at}"), (m[0] - mean_want).abs(), ctx.tol(1e-7)));
        parts.push(Part::new(format!("variance at {at}"), (var - var_want).abs(), ctx.tol(1e-7)));
    }
    Ok(parts)
}

fn g_recursions(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const POINTS: usize = 20;
    let mut rng = rng_for(ctx.seed, 0x9e);
    let mut points = Vec::with_capacity(POINTS);
    while points.len() < POINTS {
        let q = match ctx.q {
            Some(q) => q,
            None => QParam::new(rng.random_range(-0.8..0.8))?,
        };
        let l = q.support_half_width();
        let t: f64 = rng.random_range(-0.8..0.8);
        let (y, z) = (l * rng.random_range(-0.9..0.9), l * rng.random_range(-0.9..0.9));
        if (1.0 - q.value()) * t * t < 1.0 {
            points.push(GEvalRequest::new(0, 0, y, z, t, q)?);
        }
    }
    let scaled = scaled_err;
    let (mut red, mut exp, mut closed): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut cases = (0, 0, 0);
    for base in &points {
        for k in 1..=5 {
            for l in 0..=(5 - k) {
                let req = base.with_kl(k, l);
                let direct = g_series(&req)?.value;
                for j in 1..=k {
                    red = red.max(scaled(g_reduce_kl(&req, j)?, direct));
                    cases.0 += 1;
                }
                if l == 0 {
                    exp = exp.max(scaled(g_expansion(&req)?, direct));
                    closed = closed.max(scaled(g_closed_k0(&req)?, direct));
                    cases.1 += 1;
                    cases.2 += 1;
                }
            }
        }
    }
    ctx.note(format!(
        "{POINTS} points per case; {} reduction, {} expansion and {} closed-recursion evaluations",
        cases.0, cases.1, cases.2
    ));
    let tol = ctx.tol(1e-8);
    Ok(vec![
        Part::new("reduction of G_{k,l}, all j, k + l <= 5", red, tol),
        Part::new("expansion of G_{k,0} in G_{0,i}, k <= 5", exp, tol),
        Part::new("closed recursion for G_{k,0}, k <= 5", closed, tol),
    ])
}

fn aw_expansion(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const TERMS: usize = 12;
    const MORE: [usize; 4] = [16, 20, 24, 30];
    let (r1, r2) = (0.5, 0.4);
    let mut parts = Vec::new();
    for q in ctx.qs(&[0.5])? {
        let grid = chebyshev_nodes(15, q);
        let yz: Vec<(f64, f64)> = grid.iter().flat_map(|y| grid.iter().map(move |z| (*y, *z))).collect();
        // Column 0 is the 12-term error, then one column per entry of MORE.
        let errs = yz
            .par_iter()
            .map(|(y, z)| {
                let a = AwConditional::new(*y, *z, r1, r2, q)?;
                let g = g_n_table(MORE[MORE.len() - 1], &a)?;
                let p = pol();
                let mut e = [0.0f64; 1 + MORE.len()];
                for x in &grid {
                    let exact = a.density(*x, &p)?;
                    for (slot, n) in e.iter_mut().zip(std::iter::once(TERMS).chain(MORE)) {
                        *slot = slot.max((expansion_partial_sum(*x, &g[..=n], q)? - exact).abs());
                    }
                }
                Ok(e)
            })
            .collect::<Result<Vec<_>>>()?;
        let col = |j: usize| max_abs(errs.iter().map(|e| e[j]));
        let at = format!("(rho1, rho2, q) = ({r1}, {r2}, {})", q.value());
        parts.push(Part::new(format!("{TERMS} terms, 15^3 Chebyshev grid at {at}"), col(0), ctx.tol(1e-5)));
        let more: Vec<String> = MORE.iter().enumerate().map(|(j, n)| format!("N = {n}: {:.1e}", col(j + 1))).collect();
        ctx.note(format!("max grid error with more terms at {at}: {}", more.join(", ")));
    }
    Ok(parts)
}

fn gn_dual_route(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const N: usize = 4;
    let mut parts = Vec::new();
    let qs = ctx.qs(&[0.5, -0.4])?;
    for ((r1, r2), q) in [(0.5, 0.4), (-0.3, 0.6)].into_iter().zip(qs.iter().cycle()) {
        let q = *q;
        let l = q.support_half_width();
        let structures = (0..=N).map(|n| GnStructure::new(n, r1, r2, q)).collect::<Result<Vec<_>>>()?;
        let (mut structural, mut direct): (f64, f64) = (0.0, 0.0);
        for (fy, fz) in [(0.1, -0.07), (0.4, 0.25), (-0.55, 0.15), (0.0, 0.65), (-0.8, -0.8)] {
            let (y, z) = (fy * l, fz * l);
            let quad = g_n_quadrature_all(N, y, z, r1, r2, q)?;
            for n in 0..=N {
                structural = structural.max((structures[n].eval(y, z) - quad[n]).abs());
                direct = direct.max((g_n_direct(n, y, z, r1, r2, q)? - quad[n]).abs());
            }
        }
        let at = format!("(rho1, rho2, q) = ({r1}, {r2}, {})", q.value());
        parts.push(Part::new(format!("Theta route vs quadrature at {at}"), structural, ctx.tol(1e-7)));
        parts.push(Part::new(format!("G-series route vs quadrature at {at}"), direct, ctx.tol(1e-7)));
    }
    Ok(parts)
}

fn a_coefficients(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    let qs = ctx.qs(&[0.5, -0.4])?;
    for ((rl, rr), q) in [(0.5, 0.4), (-0.6, 0.3)].into_iter().zip(qs.iter().cycle()) {
        let q = *q;
        let (mut routes, mut closed, mut ratios): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for n in 1..=4 {
            let ls = solve_a(n, rl, rr, q, ARoute::LinearSystem)?;
            let oracle = solve_a(n, rl, rr, q, ARoute::InterpolationOracle)?;
            routes = routes.max(ls.max_difference(&oracle));
            let h = (n / 2) as i64;
            for (r, s, _) in a_index_set(n) {
                let base = oracle.get(0, s).expect("A_{0,s} exists for every s");
                if r == 0 {
                    let l = (s + h) as usize;
                    closed = closed.max((a_closed_form(n, l, rl, rr, q)? - base).abs());
                } else if let Some(ratio) = a_relation_ratio(n, r, s, rl, rr, q) {
                    ratios = ratios.max((ratio * base - oracle.get(r, s).unwrap()).abs());
                }
            }
        }
        let at = format!("(rho_L, rho_R, q) = ({rl}, {rr}, {})", q.value());
        parts.push(Part::new(format!("linear system vs oracle, n <= 4, {at}"), routes, ctx.tol(1e-8)));
        parts.push(Part::new(format!("closed form A_0 vs oracle, {at}"), closed, ctx.tol(1e-10)));
        parts.push(Part::new(format!("ratio relations vs oracle, {at}"), ratios, ctx.tol(1e-10)));
    }
    Ok(parts)
}

fn conditional_variance(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let points = [(0.3, -0.1, 0.5, 0.4, 0.5), (-1.0, 0.8, 0.6, -0.5, -0.3), (1.2, 0.4, -0.7, 0.3, 0.7)];
    let mut derived: f64 = 0.0;
    let mut limit: f64 = 0.0;
    for (i, (xl, xr, rl, rr, qd)) in points.into_iter().enumerate() {
        let q = match ctx.q {
            Some(q) => q,
            None => QParam::new(qd)?,
        };
        let rep = cond_var_two_sided(xl, xr, rl, rr, q)?;
        derived = derived.max((rep.derived - rep.oracle).abs());
        let m = rep.matching(1e-8);
        ctx.note(format!(
            "point {i} (x_L, x_R, rho_L, rho_R, q) = ({xl}, {xr}, {rl}, {rr}, {}): oracle {:.10}, printed with x_R {:.10}, printed with x_L {:.10}, matching: {}",
            q.value(),
            rep.oracle,
            rep.as_printed_x_right,
            rep.as_printed_x_left,
            if m.is_empty() { "none".to_string() } else { m.join(", ") }
        ));
        let one = cond_var_two_sided(xl, xr, rl, rr, QParam::classical())?;
        let want = (1.0 - rl * rl) * (1.0 - rr * rr) / (1.0 - rl * rl * rr * rr);
        for v in [one.as_printed_x_right, one.as_printed_x_left, one.derived, one.oracle] {
            limit = limit.max((v - want).abs());
        }
    }
    Ok(vec![
        Part::new("derived form vs quadrature", derived, ctx.tol(1e-8)),
        Part::new("q = 1 limit of every form", limit, ctx.tol(1e-10)),
    ])
}

fn gebelein(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const COUNT: usize = 100;
    const ORACLE: usize = 5;
    let q = match ctx.q {
        Some(q) => q,
        None => QParam::new(0.5)?,
    };
    let spec = MVQNormalSpec::standard(vec![0.6, -0.5], q)?;
    let past = IndexSet::new(vec![0, 1])?;
    let r = spec.rho[1];
    let mut rng = rng_for(ctx.seed, 0x6e);
    let mut violations = 0usize;
    let mut oracle_err: f64 = 0.0;
    for k in 0..COUNT {
        let degree = rng.random_range(1..=6usize);
        let mut a = vec![0.0; degree + 1];
        for c in a.iter_mut().skip(1) {
            *c = rng.random_range(-1.0..1.0);
        }
        let (lhs, rhs) = gebelein_check(&spec, 2, &past, &a)?;
        if lhs > rhs * (1.0 + 1e-12) {
            violations += 1;
        }
        if k < ORACLE && !q.is_classical() {
            // E[(E(g(X_3) | X_2))^2] by nested quadrature.
            let p = pol();
            let spec_q = QuadratureSpec::new(q).with_tol(1e-11, 1e-11);
            let v = quad(
                |y| {
                    let cond = CondParams::new(y, r, q)?;
                    let h = quad(|x| Ok(eval_hermite_series(&a, x, q) * f_cn(x, &cond, &p)?), &spec_q)?;
                    Ok(h * h * f_n(y, q, &p)?)
                },
                &spec_q,
            )?;
            oracle_err = oracle_err.max((v - lhs).abs());
        }
    }
    ctx.note(format!("{COUNT} polynomials of degree 1..=6, {violations} violations"));
    Ok(vec![
        Part::new("violations", violations as f64, 0.0),
        Part::new("closed-form lhs vs nested quadrature", oracle_err, ctx.tol(1e-8)),
    ])
}

fn sampling(ctx: &mut Ctx) -> Result<Vec<Part>> {
    const N: usize = 100_000;
    const KS_N: usize = 10_000;
    let start = Instant::now();
    let q = match ctx.q {
        Some(q) => q,
        None => QParam::new(0.5)?,
    };
    let spec = MVQNormalSpec::standard(vec![0.6, 0.5], q)?;
    let cfg = SamplerConfig::with_seed(ctx.seed);
    let batch = sample_chain(&spec, N, &cfg)?;
    let nf = N as f64;
    let mut parts = Vec::new();
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let want = spec.rho_between(i, j);
        let se = (1.0 - want * want) / nf.sqrt();
        parts.push(Part::new(
            format!("corr(X{}, X{}) vs {want} in standard errors", i + 1, j + 1),
            (batch.correlation(i, j) - want).abs() / se,
            4.0,
        ));
    }
    // Every coordinate of a standardized chain is q-Normal.
    let exact = if q.is_classical() {
        vec![0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0]
    } else {
        raw_moments(|x| f_n(x, q, &pol()), 8, q)?
    };
    let mut worst: f64 = 0.0;
    for i in 0..spec.d {
        for k in 0..4 {
            let se = ((exact[2 * k + 1] - exact[k] * exact[k]) / nf).sqrt();
            worst = worst.max((batch.moments[i][k] - exact[k]).abs() / se);
        }
    }
    parts.push(Part::new("marginal moments 1..4 in standard errors", worst, 4.0));
    for b in &batch.diagnostics {
        ctx.note(b.clone());
    }

    let ks_qs = match ctx.q {
        Some(q) => vec![q],
        None => vec![QParam::new(-0.5)?, QParam::new(0.0)?, QParam::new(0.5)?],
    };
    for kq in ks_qs {
        f_n(0.0, kq, &pol())?;
        let draws = sample_qnormal(kq, KS_N, &cfg)?;
        let spec_q = QuadratureSpec::new(kq).with_tol(1e-12, 1e-12);
        let table = CdfTable::new(|x| f_n(x, kq, &pol()).unwrap_or(f64::NAN), &spec_q, 64)?;
        let d = crate::sampling::ks_statistic(&draws, |x| table.cdf(x));
        parts.push(Part::new(
            format!("KS statistic of {KS_N} draws at q = {} (bound: 1% critical value)", kq.value()),
            d,
            ks_critical_1pct(KS_N),
        ));
    }

    let small = 5_000;
    let mut a = Vec::new();
    let mut b = Vec::new();
    sample_chain(&spec, small, &cfg)?.write_csv(&mut a).map_err(io_err)?;
    sample_chain(&spec, small, &cfg)?.write_csv(&mut b).map_err(io_err)?;
    parts.push(Part::new("fixed-seed reruns differing (bytes)", a.iter().zip(&b).filter(|(x, y)| x != y).count() as f64 + a.len().abs_diff(b.len()) as f64, 0.0));
    parts.push(Part::new("runtime in seconds", start.elapsed().as_secs_f64(), 60.0));
    Ok(parts)
}

fn io_err(e: std::io::Error) -> QError {
    QError::ParamOutOfRange(format!("i/o: {e}"))
}

fn q_limit(ctx: &mut Ctx) -> Result<Vec<Part>> {
    let near_one = QParam::new(0.999)?;
    let long = TruncationPolicy::new(1e-15, 100_000, 8)?;
    let density = max_abs(
        [-1.0, 0.0, 1.0]
            .into_iter()
            .map(|x| Ok(f_n(x, near_one, &long)? - (-x * x / 2.0).exp() / (2.0 * PI).sqrt()))
            .collect::<Result<Vec<f64>>>()?,
    );
    let one = QParam::classical();
    let zero = QParam::new(0.0)?;
    let (mut herm, mut cheb): (f64, f64) = (0.0, 0.0);
    for i in 0..=40 {
        let xh = -4.0 + 0.2 * i as f64;
        let xc = -2.0 + 0.1 * i as f64;
        let hq = q_hermite_all(12, xh, one);
        let h0 = q_hermite_all(12, xc, zero);
        for n in 0..=12 {
            herm = herm.max((hq[n] - hermite_prob(n, xh)).abs());
            cheb = cheb.max((h0[n] - chebyshev_u(n, xc / 2.0)).abs());
        }
    }
    // [n]_q -> n as a cross-check of the q-number implementation.
    let qn = (1..=12).map(|n| (q_number(n, one) - n as f64).abs()).fold(0.0, f64::max);
    Ok(vec![
        Part::new("|f_N(x|0.999) - normal pdf| at x = -1, 0, 1", density, 0.02),
        Part::new("H_n(x|1) vs Hermite, n <= 12", herm.max(qn), ctx.tol(1e-12)),
        Part::new("H_n(x|0) vs U_n(x/2), n <= 12", cheb, ctx.tol(1e-12)),
    ])
}
