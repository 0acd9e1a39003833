//! Exact rejection sampling of q-Normal variates, `f_CN` transitions and
//! whole Markov chains.
//!
//! Every draw index gets its own ChaCha8 stream derived from `(seed, index)`,
//! so results do not depend on the number of worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{check_rho, cn_ratio, f_n, phi_gen, CondParams, Support};
use crate::error::{QError, Result};
use crate::multivariate::MVQNormalSpec;
use crate::qseries::{q_pochhammer_inf, QParam, TruncationPolicy};

/// Safety margin applied to tabulated envelope maxima.
const ENVELOPE_MARGIN: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub grid_size: usize,
    pub max_rejections: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { seed: 0, grid_size: 2048, max_rejections: 1_000_000 }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 256 {
            return Err(QError::ParamOutOfRange(format!("grid_size = {} must be >= 256", self.grid_size)));
        }
        if self.max_rejections == 0 {
            return Err(QError::ParamOutOfRange("max_rejections must be positive".into()));
        }
        Ok(())
    }
}

/// The RNG used for draw (or chain) number `stream`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Proposal and acceptance counts of one rejection stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub proposed: u64,
    pub accepted: u64,
}

impl StageCounts {
    fn add(&mut self, o: StageCounts) {
        self.proposed += o.proposed;
        self.accepted += o.accepted;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Rejection sampler for `f_N(.|q)` with a uniform proposal on `S(q)`.
#[derive(Debug, Clone)]
pub struct QNormalSampler {
    q: QParam,
    half_width: f64,
    /// Tabulated `sup f_N`, inflated by the safety margin.
    bound: f64,
    policy: TruncationPolicy,
    max_rejections: u64,
}

impl QNormalSampler {
    pub fn new(q: QParam, config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let policy = TruncationPolicy::default();
        if q.is_classical() {
            return Ok(QNormalSampler { q, half_width: f64::INFINITY, bound: 1.0, policy, max_rejections: config.max_rejections });
        }
        let l = q.support_half_width();
        let n = config.grid_size;
        let mut sup: f64 = 0.0;
        for i in 0..=n {
            let x = -l + 2.0 * l * i as f64 / n as f64;
            sup = sup.max(f_n(x, q, &policy)?);
        }
        Ok(QNormalSampler { q, half_width: l, bound: sup * ENVELOPE_MARGIN, policy, max_rejections: config.max_rejections })
    }

    /// Expected acceptance probability `1 / (2 L bound)`.
    pub fn expected_rate(&self) -> f64 {
        if self.q.is_classical() {
            1.0
        } else {
            1.0 / (2.0 * self.half_width * self.bound)
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, counts: &mut StageCounts) -> Result<f64> {
        if self.q.is_classical() {
            counts.proposed += 1;
            counts.accepted += 1;
            return Ok(rng.sample(StandardNormal));
        }
        let l = self.half_width;
        for _ in 0..self.max_rejections {
            let x = l * (2.0 * rng.random::<f64>() - 1.0);
            let u: f64 = rng.random();
            counts.proposed += 1;
            let f = f_n(x, self.q, &self.policy)?;
            debug_assert!(f <= self.bound, "q-Normal envelope violated at x = {x}");
            if u * self.bound < f {
                counts.accepted += 1;
                return Ok(x);
            }
        }
        Err(QError::TooManyRejections { count: self.max_rejections })
    }
}

/// `C_2 = (rho^2; q)_inf / min((rho; q)_inf, (-rho; q)_inf)^4 = sup_{x,y} f_CN / f_N`.
///
/// With `x = L cos(theta)`, `y = L cos(phi)`, the product of the `w_k` is
/// `g(theta + phi) g(theta - phi)` where `g(a) = prod_k (1 - 2 rho q^k cos(a) + rho^2 q^{2k})`.
/// Each factor is linear and positive in `cos(a)`, so `log g` is concave in
/// `cos(a)` and its minimum sits at `cos(a) = +-1`.
pub fn envelope_constant(rho: f64, q: QParam) -> Result<f64> {
    check_rho(rho)?;
    if q.is_classical() {
        return Err(QError::Q1Unsupported);
    }
    let lo = q_pochhammer_inf(rho, q)?.min(q_pochhammer_inf(-rho, q)?);
    Ok(q_pochhammer_inf(rho * rho, q)? / lo.powi(4))
}

/// Rejection sampler for `f_CN(.|y,rho,q)` with proposal `f_N` and constant `C_2`.
#[derive(Debug, Clone)]
pub struct FcnSampler {
    base: QNormalSampler,
    rho: f64,
    c2: f64,
}

impl FcnSampler {
    pub fn new(rho: f64, q: QParam, config: &SamplerConfig) -> Result<Self> {
        check_rho(rho)?;
        let base = QNormalSampler::new(q, config)?;
        let c2 = if q.is_classical() { 1.0 } else { envelope_constant(rho, q)? };
        Ok(FcnSampler { base, rho, c2 })
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    /// One draw from `f_CN(.|y, rho, q)`. `proposal` counts the inner `f_N`
    /// draws, `counts` the outer accept step.
    pub fn sample<R: Rng>(&self, y: f64, rng: &mut R, proposal: &mut StageCounts, counts: &mut StageCounts) -> Result<f64> {
        let q = self.base.q;
        if q.is_classical() {
            counts.proposed += 1;
            counts.accepted += 1;
            let z: f64 = rng.sample(StandardNormal);
            return Ok(self.rho * y + (1.0 - self.rho * self.rho).sqrt() * z);
        }
        let cond = CondParams { y, rho: self.rho, q };
        for _ in 0..self.base.max_rejections {
            let x = self.base.sample(rng, proposal)?;
            let u: f64 = rng.random();
            counts.proposed += 1;
            let ratio = cn_ratio(x, &cond, &self.base.policy)?;
            debug_assert!(ratio <= self.c2 * (1.0 + 1e-12), "f_CN envelope violated: {ratio} > {}", self.c2);
            if u * self.c2 < ratio {
                counts.accepted += 1;
                return Ok(x);
            }
        }
        Err(QError::TooManyRejections { count: self.base.max_rejections })
    }
}

/// Rejection step from `f_N` to `phi(.,t|q) f_N` with a tabulated bound on `phi`.
#[derive(Debug, Clone)]
struct MnStep {
    t: f64,
    bound: f64,
}

impl MnStep {
    fn new(t: f64, q: QParam, grid: usize, policy: &TruncationPolicy) -> Result<Self> {
        if q.is_classical() {
            return Ok(MnStep { t, bound: 1.0 });
        }
        let l = q.support_half_width();
        let mut sup: f64 = 0.0;
        for i in 0..=grid {
            let x = -l + 2.0 * l * i as f64 / grid as f64;
            sup = sup.max(phi_gen(x, t, q, policy)?);
        }
        Ok(MnStep { t, bound: sup * ENVELOPE_MARGIN })
    }
}

fn parallel_draws<F>(n: usize, seed: u64, f: F) -> Result<(Vec<f64>, StageCounts)>
where
    F: Fn(&mut ChaCha8Rng, &mut StageCounts) -> Result<f64> + Sync,
{
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let mut c = StageCounts::default();
            f(&mut rng, &mut c).map(|v| (v, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = StageCounts::default();
    let vals = out
        .into_iter()
        .map(|(v, c)| {
            counts.add(c);
            v
        })
        .collect();
    Ok((vals, counts))
}

/// `n` independent draws from `f_N(.|q)`.
pub fn sample_qnormal(q: QParam, n: usize, config: &SamplerConfig) -> Result<Vec<f64>> {
    let s = QNormalSampler::new(q, config)?;
    Ok(parallel_draws(n, config.seed, |rng, c| s.sample(rng, c))?.0)
}

/// `n` independent draws from `f_CN(.|y,rho,q)`.
pub fn sample_fcn(y: f64, rho: f64, q: QParam, n: usize, config: &SamplerConfig) -> Result<Vec<f64>> {
    Support::new(q).check(y)?;
    let s = FcnSampler::new(rho, q, config)?;
    Ok(parallel_draws(n, config.seed, |rng, c| {
        let mut inner = StageCounts::default();
        s.sample(y, rng, &mut inner, c)
    })?
    .0)
}

/// Draws from a chain spec, stored row-major (`n_samples` rows of `d` values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub d: usize,
    pub n_samples: usize,
    pub draws: Vec<f64>,
    /// Outer acceptance rate per stage: stage 0 draws `X_1`, stage `i` draws `X_{i+1} | X_i`.
    pub acceptance_rates: Vec<f64>,
    /// Raw empirical moments `E X_i^k`, `k = 1..=4`, per coordinate.
    pub moments: Vec<[f64; 4]>,
    pub diagnostics: Vec<String>,
}

impl SampleBatch {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.draws[r * self.d..(r + 1) * self.d]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_samples).map(|r| self.draws[r * self.d + i]).collect()
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.moments[i][0]
    }

    pub fn variance(&self, i: usize) -> f64 {
        let m = self.moments[i];
        m[1] - m[0] * m[0]
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let (mi, mj) = (self.mean(i), self.mean(j));
        let cov = (0..self.n_samples)
            .map(|r| (self.draws[r * self.d + i] - mi) * (self.draws[r * self.d + j] - mj))
            .sum::<f64>()
            / self.n_samples as f64;
        cov / (self.variance(i) * self.variance(j)).sqrt()
    }

    /// CSV with header `chain,step,value`: one line per coordinate of each row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "chain,step,value")?;
        for r in 0..self.n_samples {
            for (i, v) in self.row(r).iter().enumerate() {
                writeln!(w, "{r},{i},{v}")?;
            }
        }
        Ok(())
    }
}

/// Samples `n_samples` independent realizations of the chain described by `spec`.
pub fn sample_chain(spec: &MVQNormalSpec, n_samples: usize, config: &SamplerConfig) -> Result<SampleBatch> {
    spec.validate()?;
    config.validate()?;
    let q = spec.q;
    let d = spec.d;
    let policy = TruncationPolicy::default();
    let first = QNormalSampler::new(q, config)?;
    let mn = spec.t.map(|t| MnStep::new(t, q, config.grid_size, &policy)).transpose()?;
    let steps = spec.rho.iter().map(|r| FcnSampler::new(*r, q, config)).collect::<Result<Vec<_>>>()?;
    let rows = (0..n_samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(config.seed, r as u64);
            let mut counts = vec![StageCounts::default(); d];
            let mut proposal = StageCounts::default();
            let mut z = Vec::with_capacity(d);
            let x0 = match &mn {
                None => first.sample(&mut rng, &mut counts[0])?,
                Some(step) if q.is_classical() => {
                    counts[0].proposed += 1;
                    counts[0].accepted += 1;
                    step.t + rng.sample::<f64, _>(StandardNormal)
                }
                Some(step) => {
                    let mut found = None;
                    for _ in 0..config.max_rejections {
                        let x = first.sample(&mut rng, &mut proposal)?;
                        let u: f64 = rng.random();
                        counts[0].proposed += 1;
                        let phi = phi_gen(x, step.t, q, &policy)?;
                        debug_assert!(phi <= step.bound, "phi envelope violated at x = {x}");
                        if u * step.bound < phi {
                            counts[0].accepted += 1;
                            found = Some(x);
                            break;
                        }
                    }
                    found.ok_or(QError::TooManyRejections { count: config.max_rejections })?
                }
            };
            z.push(x0);
            for (i, s) in steps.iter().enumerate() {
                let next = s.sample(z[i], &mut rng, &mut proposal, &mut counts[i + 1])?;
                z.push(next);
            }
            let x: Vec<f64> = z.iter().enumerate().map(|(i, v)| spec.m[i] + spec.sigma(i) * v).collect();
            Ok((x, counts))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut totals = vec![StageCounts::default(); d];
    let mut draws = Vec::with_capacity(n_samples * d);
    let mut sums = vec![[0.0f64; 4]; d];
    for (x, counts) in rows {
        for (t, c) in totals.iter_mut().zip(counts) {
            t.add(c);
        }
        for (i, v) in x.iter().enumerate() {
            let mut p = 1.0;
            for k in 0..4 {
                p *= v;
                sums[i][k] += p;
            }
        }
        draws.extend(x);
    }
    let nf = n_samples.max(1) as f64;
    let moments = sums.into_iter().map(|s| s.map(|v| v / nf)).collect();
    let acceptance_rates: Vec<f64> = totals.iter().map(|c| c.rate()).collect();
    let mut diagnostics = Vec::new();
    for (i, s) in steps.iter().enumerate() {
        let floor = 1.0 / (10.0 * s.c2());
        if totals[i + 1].proposed > 0 && acceptance_rates[i + 1] < floor {
            diagnostics.push(format!(
                "stage {}: acceptance rate {:.4} below 1/(10 C2) = {floor:.4}",
                i + 1,
                acceptance_rates[i + 1]
            ));
        }
    }
    Ok(SampleBatch { d, n_samples, draws, acceptance_rates, moments, diagnostics })
}

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let c = cdf(*x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value `1.6276 / sqrt(n)` of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn envelope_holds_on_a_grid() {
        let pol = TruncationPolicy::default();
        for (rho, qq) in [(0.6, 0.5), (-0.6, 0.5), (0.7, -0.6), (-0.8, -0.3), (0.9, 0.0)] {
            let qp = q(qq);
            let c2 = envelope_constant(rho, qp).unwrap();
            let l = qp.support_half_width();
            let mut sup: f64 = 0.0;
            for i in 0..=200 {
                for j in 0..=200 {
                    let x = -l + 2.0 * l * i as f64 / 200.0;
                    let y = -l + 2.0 * l * j as f64 / 200.0;
                    sup = sup.max(cn_ratio(x, &CondParams { y, rho, q: qp }, &pol).unwrap());
                }
            }
            assert!(sup <= c2 * (1.0 + 1e-12), "rho {rho} q {qq}: {sup} > {c2}");
        }
    }

    #[test]
    fn qnormal_draws_are_in_support_with_unit_variance() {
        let cfg = SamplerConfig::with_seed(7);
        let qp = q(0.0);
        let xs = sample_qnormal(qp, 20_000, &cfg).unwrap();
        assert!(xs.iter().all(|x| x.abs() <= 2.0));
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        // Var(X^2) = E X^4 - 1 = 1 for the semicircle.
        assert!((var - 1.0).abs() < 4.0 / (xs.len() as f64).sqrt());
    }

    #[test]
    fn fcn_conditional_mean() {
        let cfg = SamplerConfig::with_seed(11);
        let (y, rho, qp) = (0.5, 0.6, q(0.5));
        let xs = sample_fcn(y, rho, qp, 20_000, &cfg).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean - rho * y).abs() < 4.0 * sd / n.sqrt());
    }

    #[test]
    fn chains_are_reproducible() {
        let spec = MVQNormalSpec::standard(vec![0.6, -0.3], q(0.5)).unwrap();
        let cfg = SamplerConfig::with_seed(3);
        let a = sample_chain(&spec, 500, &cfg).unwrap();
        let b = sample_chain(&spec, 500, &cfg).unwrap();
        assert_eq!(a, b);
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        a.write_csv(&mut c1).unwrap();
        b.write_csv(&mut c2).unwrap();
        assert_eq!(c1, c2);
        assert!(String::from_utf8(c1).unwrap().starts_with("chain,step,value\n0,0,"));
        let other = sample_chain(&spec, 500, &SamplerConfig::with_seed(4)).unwrap();
        assert_ne!(a.draws, other.draws);
    }

    #[test]
    fn gaussian_chain_and_rescaling() {
        let spec = MVQNormalSpec::new(vec![1.0, -2.0], vec![4.0, 0.25], vec![0.5], QParam::classical()).unwrap();
        let b = sample_chain(&spec, 20_000, &SamplerConfig::with_seed(5)).unwrap();
        assert!((b.mean(0) - 1.0).abs() < 0.06);
        assert!((b.variance(1) - 0.25).abs() < 0.02);
        assert!((b.correlation(0, 1) - 0.5).abs() < 0.03);
    }

    #[test]
    fn ks_helpers() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&xs, |x| x) <= 0.0005 + 1e-12);
        assert!((ks_critical_1pct(10_000) - 0.016_276).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut c = SamplerConfig::default();
        c.grid_size = 10;
        assert!(c.validate().is_err());
    }
}
