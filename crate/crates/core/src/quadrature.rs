//! Adaptive Gauss-Kronrod integration over `S(q)`.
//!
//! For `|q| < 1` the default substitutes `x = L cos(theta)` with `L` the support
//! half-width, which removes the square-root behaviour of the densities at the
//! endpoints. For `q = 1` integrals run over `[-GAUSS_HALF_WIDTH, GAUSS_HALF_WIDTH]`
//! on the raw variable, which is ample for integrands carrying a Gaussian factor.
//!
//! Panels are refined by bisection with the tolerance halved at each level and
//! results are summed left to right, so the value does not depend on timing.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QError, Result};
use crate::qseries::QParam;

/// Half-width of the integration interval used at `q = 1`.
pub const GAUSS_HALF_WIDTH: f64 = 40.0;

const INITIAL_PANELS: usize = 8;
const MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Trigonometric,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub q: QParam,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub transform: Transform,
}

impl QuadratureSpec {
    /// Tolerances of `1e-12`, trigonometric transform whenever `|q| < 1`.
    pub fn new(q: QParam) -> Self {
        let transform = if q.is_classical() { Transform::None } else { Transform::Trigonometric };
        QuadratureSpec { q, abs_tol: 1e-12, rel_tol: 1e-12, max_subdivisions: 20_000, transform }
    }

    pub fn with_tol(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(QError::ParamOutOfRange("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < INITIAL_PANELS {
            return Err(QError::ParamOutOfRange(format!(
                "max_subdivisions must be at least {INITIAL_PANELS}"
            )));
        }
        if self.transform == Transform::Trigonometric && self.q.is_classical() {
            return Err(QError::ParamOutOfRange("trigonometric transform needs |q| < 1".into()));
        }
        Ok(())
    }

    /// Integration range in the working variable, and the map back to `x`.
    fn domain(&self) -> Domain {
        match self.transform {
            Transform::Trigonometric => Domain::Trig(self.q.support_half_width()),
            Transform::None if self.q.is_classical() => Domain::Raw(-GAUSS_HALF_WIDTH, GAUSS_HALF_WIDTH),
            Transform::None => {
                let l = self.q.support_half_width();
                Domain::Raw(-l, l)
            }
        }
    }
}

/// Working variable: `x = -L cos(u)` for `u` in `[0, pi]`, or `x` itself.
#[derive(Debug, Clone, Copy)]
enum Domain {
    Trig(f64),
    Raw(f64, f64),
}

impl Domain {
    fn range(&self) -> (f64, f64) {
        match *self {
            Domain::Trig(_) => (0.0, PI),
            Domain::Raw(a, b) => (a, b),
        }
    }

    /// `(x, dx/du)`.
    #[inline]
    fn map(&self, u: f64) -> (f64, f64) {
        match *self {
            Domain::Trig(l) => (-l * u.cos(), l * u.sin()),
            Domain::Raw(..) => (u, 1.0),
        }
    }

    fn to_u(self, x: f64) -> f64 {
        match self {
            Domain::Trig(l) => (-x / l).clamp(-1.0, 1.0).acos(),
            Domain::Raw(a, b) => x.clamp(a, b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    kronrod: Vec<f64>,
    abs: Vec<f64>,
    err: f64,
}

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
fn gk15<F: FnMut(f64, &mut [f64])>(f: &mut F, dom: Domain, a: f64, b: f64, buf: &mut [f64]) -> Panel {
    let dim = buf.len();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut abs = vec![0.0; dim];
    let mut eval = |u: f64, wk: f64, wg: f64, buf: &mut [f64]| {
        let (x, jac) = dom.map(u);
        buf.iter_mut().for_each(|v| *v = 0.0);
        f(x, buf);
        for i in 0..dim {
            let v = buf[i] * jac;
            kron[i] += wk * v;
            gauss[i] += wg * v;
            abs[i] += wk * v.abs();
        }
    };
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        eval(c - h * XGK[j], WGK[j], wg, buf);
        eval(c + h * XGK[j], WGK[j], wg, buf);
    }
    eval(c, WGK[7], WG[3], buf);
    let mut err: f64 = 0.0;
    for i in 0..dim {
        kron[i] *= h;
        abs[i] *= h.abs();
        err = err.max((kron[i] - gauss[i] * h).abs());
    }
    Panel { kronrod: kron, abs, err }
}

struct Accum {
    value: Vec<f64>,
    err: f64,
    budget: usize,
    met: bool,
}

#[allow(clippy::too_many_arguments)]
fn refine<F: FnMut(f64, &mut [f64])>(
    f: &mut F,
    dom: Domain,
    a: f64,
    b: f64,
    panel: Panel,
    tol: f64,
    depth: u32,
    buf: &mut [f64],
    acc: &mut Accum,
) {
    let roundoff = panel.abs.iter().fold(0.0f64, |m, v| m.max(*v)) * 50.0 * f64::EPSILON;
    if panel.err <= tol.max(roundoff) || depth >= MAX_DEPTH || acc.budget < 2 {
        if panel.err > tol.max(roundoff) {
            acc.met = false;
        }
        for (v, k) in acc.value.iter_mut().zip(&panel.kronrod) {
            *v += k;
        }
        acc.err += panel.err;
        return;
    }
    acc.budget -= 2;
    let m = 0.5 * (a + b);
    let left = gk15(f, dom, a, m, buf);
    let right = gk15(f, dom, m, b, buf);
    refine(f, dom, a, m, left, tol / 2.0, depth + 1, buf, acc);
    refine(f, dom, m, b, right, tol / 2.0, depth + 1, buf, acc);
}

fn integrate_range<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    dim: usize,
    dom: Domain,
    ua: f64,
    ub: f64,
    spec: &QuadratureSpec,
) -> (Vec<f64>, f64, bool) {
    let mut buf = vec![0.0; dim];
    if ua == ub {
        return (vec![0.0; dim], 0.0, true);
    }
    let h = (ub - ua) / INITIAL_PANELS as f64;
    let panels: Vec<(f64, f64, Panel)> = (0..INITIAL_PANELS)
        .map(|j| {
            let a = ua + h * j as f64;
            let b = if j + 1 == INITIAL_PANELS { ub } else { ua + h * (j + 1) as f64 };
            (a, b, gk15(&mut f, dom, a, b, &mut buf))
        })
        .collect();
    let mut scale: f64 = 0.0;
    for i in 0..dim {
        let s: f64 = panels.iter().map(|p| p.2.kronrod[i]).sum();
        scale = scale.max(s.abs());
    }
    let tol = spec.abs_tol.max(spec.rel_tol * scale);
    let mut acc = Accum {
        value: vec![0.0; dim],
        err: 0.0,
        budget: spec.max_subdivisions - INITIAL_PANELS,
        met: true,
    };
    for (a, b, p) in panels {
        refine(&mut f, dom, a, b, p, tol / INITIAL_PANELS as f64, 0, &mut buf, &mut acc);
    }
    (acc.value, acc.err, acc.met)
}

/// `int_{S(q)} f(x) dx`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, spec: &QuadratureSpec) -> Result<Integral> {
    spec.validate()?;
    let dom = spec.domain();
    let (ua, ub) = dom.range();
    let (v, err, met) = integrate_range(|x, out: &mut [f64]| out[0] = f(x), 1, dom, ua, ub, spec);
    finish(v[0], err, met)
}

/// `int_a^b f(x) dx` for `[a, b]` inside the integration domain of `spec`.
pub fn integrate_between<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    spec.validate()?;
    let dom = spec.domain();
    let (ua, ub) = (dom.to_u(a), dom.to_u(b));
    let (v, err, met) = integrate_range(|x, out: &mut [f64]| out[0] = f(x), 1, dom, ua, ub, spec);
    finish(v[0], err, met)
}

/// Integrates a vector-valued function; `f(x, out)` fills `out` of length `dim`.
/// The error estimate is the largest over components.
pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(f: F, dim: usize, spec: &QuadratureSpec) -> Result<(Vec<f64>, f64)> {
    spec.validate()?;
    let dom = spec.domain();
    let (ua, ub) = dom.range();
    let (v, err, met) = integrate_range(f, dim, dom, ua, ub, spec);
    if met {
        Ok((v, err))
    } else {
        Err(QError::ToleranceNotMet { value: v.first().copied().unwrap_or(0.0), estimate: err })
    }
}

fn finish(value: f64, error: f64, met: bool) -> Result<Integral> {
    if met {
        Ok(Integral { value, error })
    } else {
        Err(QError::ToleranceNotMet { value, estimate: error })
    }
}

/// `int_{lo}^{x} density(s) ds`.
pub fn cdf<F: FnMut(f64) -> f64>(density: F, x: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let dom = spec.domain();
    let (ua, _) = dom.range();
    let ux = dom.to_u(x);
    let mut f = density;
    let (v, err, met) = integrate_range(|s, out: &mut [f64]| out[0] = f(s), 1, dom, ua, ux, spec);
    Ok(finish(v[0], err, met)?.value.clamp(0.0, 1.0 + 10.0 * spec.abs_tol))
}

/// `int int f(x, y) dx dy` over `S(q)^2`. The inner integral gets a tenth of
/// the absolute tolerance; its error estimates are folded into the result.
pub fn double_integrate<F: FnMut(f64, f64) -> f64>(mut f: F, spec: &QuadratureSpec) -> Result<Integral> {
    spec.validate()?;
    let inner_spec = spec.with_tol(spec.abs_tol / 10.0, spec.rel_tol / 10.0);
    let failure: RefCell<Option<QError>> = RefCell::new(None);
    let inner_err = Cell::new(0.0f64);
    let outer = integrate(
        |y| match integrate(|x| f(x, y), &inner_spec) {
            Ok(r) => {
                inner_err.set(inner_err.get().max(r.error));
                r.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        spec,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let width = match spec.domain() {
        Domain::Trig(l) => 2.0 * l,
        Domain::Raw(a, b) => b - a,
    };
    Ok(Integral { value: outer.value, error: outer.error + width * inner_err.get() })
}

/// Tabulated CDF for repeated evaluation: cumulative integrals over fixed
/// panels, completed by one Gauss-Kronrod panel inside the last one.
pub struct CdfTable<F: Fn(f64) -> f64> {
    density: F,
    dom: Domain,
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<F: Fn(f64) -> f64> CdfTable<F> {
    pub fn new(density: F, spec: &QuadratureSpec, panels: usize) -> Result<Self> {
        spec.validate()?;
        let dom = spec.domain();
        let (ua, ub) = dom.range();
        let panels = panels.max(1);
        let knots: Vec<f64> = (0..=panels).map(|j| ua + (ub - ua) * j as f64 / panels as f64).collect();
        let mut cumulative = Vec::with_capacity(panels + 1);
        cumulative.push(0.0);
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (v, err, met) =
                integrate_range(|s, out: &mut [f64]| out[0] = density(s), 1, dom, w[0], w[1], spec);
            if !met {
                return Err(QError::ToleranceNotMet { value: v[0], estimate: err });
            }
            total += v[0];
            cumulative.push(total);
        }
        Ok(CdfTable { density, dom, knots, cumulative })
    }

    /// Integral of the density over the whole domain.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let u = self.dom.to_u(x);
        let j = match self.knots.binary_search_by(|k| k.partial_cmp(&u).unwrap()) {
            Ok(j) => return self.cumulative[j],
            Err(j) => j.saturating_sub(1).min(self.knots.len() - 2),
        };
        let mut buf = [0.0];
        let mut f = |s: f64, out: &mut [f64]| out[0] = (self.density)(s);
        let p = gk15(&mut f, self.dom, self.knots[j], u, &mut buf);
        self.cumulative[j] + p.kronrod[0]
    }
}

/// Catalan numbers `C_0..=C_n`.
pub fn catalan(n: usize) -> Vec<f64> {
    let mut c = vec![1.0f64; n + 1];
    for k in 1..=n {
        c[k] = c[k - 1] * 2.0 * (2 * k - 1) as f64 / (k + 1) as f64;
    }
    c
}

/// Moment self-test against the semicircle law on `[-2, 2]`: returns, for each
/// even degree `2k <= max_degree`, the computed moment, `C_k`, and the error estimate.
pub fn catalan_self_test(max_degree: usize, spec: &QuadratureSpec) -> Result<Vec<(usize, f64, f64, f64)>> {
    let cat = catalan(max_degree / 2);
    (0..=max_degree / 2)
        .map(|k| {
            let r = integrate(|x| x.powi(2 * k as i32) * (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI), spec)?;
            Ok((2 * k, r.value, cat[k], r.error))
        })
        .collect()
}
