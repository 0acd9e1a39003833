//! The `qnorm` command line: density grids, sampling, coefficient tables and
//! the verification suite.
//!
//! Defaults for grid sizes, truncation and sampling live in one TOML file
//! named by `QNORM_CONFIG`; flags override them. Every file written with
//! `--out` is accompanied by a `<out>.manifest.json` recording the command,
//! the resolved parameters, the defaults in force, the seed and the version.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::densities::{f_cn, f_mcn, f_mn, f_n, AwConditional, CondParams};
use crate::error::QError;
use crate::expansions::{conjecture_probe, solve_a, ARoute};
use crate::multivariate::MVQNormalSpec;
use crate::qseries::{QParam, TruncationPolicy};
use crate::sampling::{sample_chain, SampleBatch, SamplerConfig};
use crate::verify::{self, VerifyOptions};

/// Environment variable naming the defaults file.
pub const CONFIG_ENV: &str = "QNORM_CONFIG";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numeric(#[from] QError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0} verification check(s) failed")]
    VerificationFailed(usize),
}

impl CliError {
    /// 1 verification failure, 2 usage error, 3 numerical-convergence abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed(_) => 1,
            CliError::Numeric(e) if e.is_convergence() => 3,
            CliError::Usage(_) | CliError::Numeric(_) | CliError::Io(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Physical defaults; every field can be set in the `QNORM_CONFIG` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    /// Grid points per axis for `density`.
    pub points: usize,
    /// Half-width of the density grid at `q = 1`, where the support is unbounded.
    pub gauss_range: f64,
    /// Draws for `sample`.
    pub samples: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub max_rejections: u64,
    pub tail_tol: f64,
    pub max_terms: usize,
    pub min_terms: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        let p = TruncationPolicy::default();
        let s = SamplerConfig::default();
        Defaults {
            points: 201,
            gauss_range: 6.0,
            samples: 10_000,
            seed: s.seed,
            grid_size: s.grid_size,
            max_rejections: s.max_rejections,
            tail_tol: p.tail_tol,
            max_terms: p.max_terms,
            min_terms: p.min_terms,
        }
    }
}

impl Defaults {
    pub fn from_toml(s: &str) -> CliResult<Self> {
        toml::from_str(s).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    /// Reads the file named by `QNORM_CONFIG`, or the built-in values if unset.
    pub fn load() -> CliResult<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) => {
                let text = fs::read_to_string(&path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", Path::new(&path).display())))?;
                Self::from_toml(&text)
            }
            None => Ok(Self::default()),
        }
    }

    fn policy(&self, tail_tol: Option<f64>) -> CliResult<TruncationPolicy> {
        Ok(TruncationPolicy::new(tail_tol.unwrap_or(self.tail_tol), self.max_terms, self.min_terms)?)
    }
}

#[derive(Debug, Parser)]
#[command(name = "qnorm", version, about = "q-Normal densities, sampling, coefficient tables and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a density on a grid.
    Density(DensityArgs),
    /// Sample a (modified) multivariate q-Normal chain.
    Sample(SampleArgs),
    /// Coefficients A^(n) of the two-sided conditional q-Hermite regression.
    Coeffs(CoeffsArgs),
    /// Run the verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// f_N(x|q)
    Qn,
    /// f_CN(x|y,rho,q)
    Cn,
    /// phi(x,t|q) f_N(x|q)
    Mn,
    /// tau(x,t|y,rho,q) f_CN(x|y,rho,q)
    Mcn,
    /// two-sided conditional phi(x|y,z,rho1,rho2,q)
    Aw,
    /// joint density f_N(x) f_CN(y|x,rho,q)
    Joint2d,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, allow_hyphen_values = true)]
    pub q: f64,
    /// Correlation(s); `aw` takes two.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<f64>,
    /// Grid points per axis.
    #[arg(long)]
    pub points: Option<usize>,
    /// Tail tolerance of the infinite products.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    /// Spec file (JSON, or TOML by extension) with d, m, sigma2, rho, q and optional t.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    /// Chain correlations; a single value is repeated d - 1 times.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Means; a single value is repeated d times.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pub m: Vec<f64>,
    /// Variances; a single value is repeated d times.
    #[arg(long, value_delimiter = ',')]
    pub sigma2: Vec<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of independent chains.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CoeffsArgs {
    /// Degree n.
    #[arg(long)]
    pub n: usize,
    /// rho_left and rho_right, in that order.
    #[arg(long, allow_hyphen_values = true, num_args = 1, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: f64,
    /// Report how A_{r,.}/A_{0,.} factors (n <= 6) instead of solving.
    #[arg(long)]
    pub probe: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Check ids or module names, repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    /// Tolerance replacing every deterministic comparison's default.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `json` prints the report as JSON instead of text.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Recorded next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: Value,
    pub defaults: Defaults,
    pub seed: Option<u64>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    fn new(subcommand: &str, params: Value, defaults: &Defaults, seed: Option<u64>) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        RunManifest {
            subcommand: subcommand.into(),
            params,
            defaults: defaults.clone(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp,
        }
    }
}

/// Sidecar path `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

/// Writes `body` to `out` (with its manifest sidecar) or to `stdout`.
fn emit(body: &[u8], out: Option<&Path>, manifest: &RunManifest, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, body)?;
            fs::write(manifest_path(path), to_json(manifest))?;
        }
        None => stdout.write_all(body)?,
    }
    Ok(())
}

fn parse_q(q: f64) -> CliResult<QParam> {
    QParam::new(q).map_err(|e| CliError::Usage(e.to_string()))
}

fn need<T: Copy>(v: Option<T>, flag: &str, family: Family) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for family {family:?}")))
}

fn one_rho(rho: &[f64], family: Family) -> CliResult<f64> {
    match rho {
        [r] => Ok(*r),
        _ => Err(CliError::Usage(format!("family {family:?} takes exactly one --rho, got {}", rho.len()))),
    }
}

/// `count` equally spaced points over the support, or over the configured
/// range at `q = 1`.
fn axis(q: QParam, count: usize, defaults: &Defaults) -> Vec<f64> {
    let l = if q.is_classical() { defaults.gauss_range } else { q.support_half_width() };
    (0..count).map(|i| -l + 2.0 * l * i as f64 / (count - 1) as f64).collect()
}

fn csv_rows(header: &str, rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = String::with_capacity(rows.len() * 32);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn cmd_density(args: &DensityArgs, defaults: &Defaults, stdout: &mut dyn Write) -> CliResult<()> {
    let q = parse_q(args.q)?;
    let policy = defaults.policy(args.tol)?;
    let points = args.points.unwrap_or(defaults.points);
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let xs = axis(q, points, defaults);
    let fam = args.family;
    let mut rows = Vec::new();
    let header = if fam == Family::Joint2d { "x,y,density" } else { "x,density" };
    match fam {
        Family::Qn => {
            for &x in &xs {
                rows.push(vec![x, f_n(x, q, &policy)?]);
            }
        }
        Family::Cn | Family::Mcn => {
            let cond = CondParams::new(need(args.y, "y", fam)?, one_rho(&args.rho, fam)?, q)?;
            for &x in &xs {
                let v = if fam == Family::Cn {
                    f_cn(x, &cond, &policy)?
                } else {
                    f_mcn(x, need(args.t, "t", fam)?, &cond, &policy)?
                };
                rows.push(vec![x, v]);
            }
        }
        Family::Mn => {
            let t = need(args.t, "t", fam)?;
            for &x in &xs {
                rows.push(vec![x, f_mn(x, t, q, &policy)?]);
            }
        }
        Family::Aw => {
            let [r1, r2] = args.rho[..] else {
                return Err(CliError::Usage(format!("family aw takes two --rho values, got {}", args.rho.len())));
            };
            let a = AwConditional::new(need(args.y, "y", fam)?, need(args.z, "z", fam)?, r1, r2, q)?;
            for &x in &xs {
                rows.push(vec![x, a.density(x, &policy)?]);
            }
        }
        Family::Joint2d => {
            let rho = one_rho(&args.rho, fam)?;
            for &x in &xs {
                let fx = f_n(x, q, &policy)?;
                let cond = CondParams::new(x, rho, q)?;
                for &y in &xs {
                    rows.push(vec![x, y, fx * f_cn(y, &cond, &policy)?]);
                }
            }
        }
    }
    let params = json!({ "args": args, "points": points, "policy": policy });
    let manifest = RunManifest::new("density", params, defaults, None);
    let body = match args.format {
        Format::Csv => csv_rows(header, &rows),
        Format::Json => to_json(&json!({
            "manifest": manifest,
            "columns": header.split(',').collect::<Vec<_>>(),
            "rows": rows,
        }))
        .into_bytes(),
    };
    emit(&body, args.out.as_deref(), &manifest, stdout)
}

fn broadcast(v: &[f64], len: usize, fill: f64, flag: &str) -> CliResult<Vec<f64>> {
    match v.len() {
        0 => Ok(vec![fill; len]),
        1 => Ok(vec![v[0]; len]),
        n if n == len => Ok(v.to_vec()),
        n => Err(CliError::Usage(format!("--{flag} needs 1 or {len} values, got {n}"))),
    }
}

fn resolve_spec(args: &SampleArgs) -> CliResult<MVQNormalSpec> {
    if let Some(path) = &args.spec {
        let inline = args.q.is_some() || !args.rho.is_empty() || args.t.is_some() || !args.m.is_empty();
        if inline || !args.sigma2.is_empty() || args.d.is_some() {
            return Err(CliError::Usage("--spec cannot be combined with inline parameters".into()));
        }
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        let spec = if is_toml { MVQNormalSpec::from_toml(&text) } else { MVQNormalSpec::from_json(&text) };
        return spec.map_err(|e| CliError::Usage(e.to_string()));
    }
    let q = parse_q(args.q.ok_or_else(|| CliError::Usage("--q or --spec is required".into()))?)?;
    let d = match (args.d, args.rho.len()) {
        (Some(d), _) => d,
        (None, 0) => 1,
        (None, k) => k + 1,
    };
    if d == 0 {
        return Err(CliError::Usage("--d must be positive".into()));
    }
    let rho = if d == 1 { Vec::new() } else { broadcast(&args.rho, d - 1, f64::NAN, "rho")? };
    if rho.iter().any(|r| r.is_nan()) {
        return Err(CliError::Usage(format!("--rho is required for d = {d}")));
    }
    let spec = MVQNormalSpec {
        d,
        m: broadcast(&args.m, d, 0.0, "m")?,
        sigma2: broadcast(&args.sigma2, d, 1.0, "sigma2")?,
        rho,
        q,
        t: args.t,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CoordinateSummary {
    index: usize,
    mean: f64,
    analytic_mean: f64,
    variance: f64,
    analytic_variance: f64,
    acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CorrelationSummary {
    i: usize,
    j: usize,
    empirical: f64,
    analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SampleSummary {
    n_samples: usize,
    coordinates: Vec<CoordinateSummary>,
    correlations: Vec<CorrelationSummary>,
    diagnostics: Vec<String>,
}

/// Empirical against analytic moments. Standardized coordinates have
/// variance 1 and mean `t prod rho`; correlations are products of `rho`.
fn summarize(spec: &MVQNormalSpec, batch: &SampleBatch) -> SampleSummary {
    let t = spec.t.unwrap_or(0.0);
    let coordinates = (0..spec.d)
        .map(|i| CoordinateSummary {
            index: i,
            mean: batch.mean(i),
            analytic_mean: spec.m[i] + spec.sigma(i) * t * spec.rho_between(0, i),
            variance: batch.variance(i),
            analytic_variance: spec.sigma2[i],
            acceptance_rate: batch.acceptance_rates[i],
        })
        .collect();
    let correlations = (0..spec.d)
        .flat_map(|i| (i + 1..spec.d).map(move |j| (i, j)))
        .map(|(i, j)| CorrelationSummary { i, j, empirical: batch.correlation(i, j), analytic: spec.rho_between(i, j) })
        .collect();
    SampleSummary { n_samples: batch.n_samples, coordinates, correlations, diagnostics: batch.diagnostics.clone() }
}

pub fn cmd_sample(args: &SampleArgs, defaults: &Defaults, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let spec = resolve_spec(args)?;
    let n = args.n.unwrap_or(defaults.samples);
    let cfg = SamplerConfig {
        seed: args.seed.unwrap_or(defaults.seed),
        grid_size: defaults.grid_size,
        max_rejections: defaults.max_rejections,
    };
    let batch = sample_chain(&spec, n, &cfg)?;
    let summary = summarize(&spec, &batch);
    let params = json!({ "args": args, "spec": spec, "n": n, "sampler": cfg });
    let manifest = RunManifest::new("sample", params, defaults, Some(cfg.seed));
    for c in &summary.coordinates {
        writeln!(
            stderr,
            "X{}: mean {:.5} (analytic {:.5}), variance {:.5} (analytic {:.5}), acceptance {:.4}",
            c.index + 1,
            c.mean,
            c.analytic_mean,
            c.variance,
            c.analytic_variance,
            c.acceptance_rate
        )?;
    }
    for c in &summary.correlations {
        writeln!(stderr, "corr(X{}, X{}) = {:.5} (analytic {:.5})", c.i + 1, c.j + 1, c.empirical, c.analytic)?;
    }
    for d in &summary.diagnostics {
        writeln!(stderr, "warning: {d}")?;
    }
    match args.format {
        Format::Csv => {
            let mut body = Vec::new();
            batch.write_csv(&mut body)?;
            emit(&body, args.out.as_deref(), &manifest, stdout)?;
            if let Some(out) = &args.out {
                let mut p = out.as_os_str().to_owned();
                p.push(".summary.json");
                fs::write(PathBuf::from(p), to_json(&json!({ "config": cfg, "summary": summary })))?;
            }
        }
        Format::Json => {
            let body = to_json(&json!({ "manifest": manifest, "summary": summary, "batch": batch }));
            emit(body.as_bytes(), args.out.as_deref(), &manifest, stdout)?;
        }
    }
    Ok(())
}

pub fn cmd_coeffs(args: &CoeffsArgs, defaults: &Defaults, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let q = parse_q(args.q)?;
    let [rl, rr] = args.rho[..] else {
        return Err(CliError::Usage(format!("coeffs takes two --rho values (left, right), got {}", args.rho.len())));
    };
    let params = json!({ "args": args });
    let manifest = RunManifest::new("coeffs", params, defaults, None);
    if args.probe {
        let report = conjecture_probe(args.n, rl, rr, q)?;
        let worst = report.entries.iter().map(|e| e.spread).fold(0.0, f64::max);
        writeln!(stderr, "conjecture probe n = {}: {} ratios, largest spread {worst:.3e}", args.n, report.entries.len())?;
        let body = match args.format {
            Format::Json => to_json(&json!({ "manifest": manifest, "probe": report })).into_bytes(),
            Format::Csv => {
                let mut s = String::from("r,s,reading,spread,stated\n");
                for e in &report.entries {
                    let stated = e.stated.map(|v| v.to_string()).unwrap_or_default();
                    s.push_str(&format!("{},{},{},{},{}\n", e.r, e.s, e.reading, e.spread, stated));
                }
                s.into_bytes()
            }
        };
        return emit(&body, args.out.as_deref(), &manifest, stdout);
    }
    if !(1..=4).contains(&args.n) {
        return Err(CliError::Usage(format!("coeffs solves n = 1..=4 (use --probe for n <= 6), got {}", args.n)));
    }
    let ls = solve_a(args.n, rl, rr, q, ARoute::LinearSystem)?;
    let oracle = solve_a(args.n, rl, rr, q, ARoute::InterpolationOracle)?;
    let diff = ls.max_difference(&oracle);
    writeln!(stderr, "A^({}): {} entries, max difference between routes {diff:.3e}", args.n, ls.entries.len())?;
    let body = match args.format {
        Format::Json => to_json(&json!({
            "manifest": manifest,
            "linear_system": ls,
            "interpolation_oracle": oracle,
            "max_difference": diff,
        }))
        .into_bytes(),
        Format::Csv => {
            let mut s = String::from("r,s,linear_system,interpolation_oracle,difference\n");
            for ((r, c), v) in &ls.entries {
                let o = oracle.entries[&(*r, *c)];
                s.push_str(&format!("{r},{c},{v},{o},{}\n", (v - o).abs()));
            }
            s.into_bytes()
        }
    };
    emit(&body, args.out.as_deref(), &manifest, stdout)
}

pub fn cmd_verify(args: &VerifyArgs, defaults: &Defaults, stdout: &mut dyn Write) -> CliResult<()> {
    let opts = VerifyOptions {
        only: args.only.clone(),
        q: args.q,
        tol: args.tol,
        seed: args.seed.unwrap_or(defaults.seed),
    };
    let report = verify::run(&opts).map_err(|e| CliError::Usage(e.to_string()))?;
    let manifest = RunManifest::new("verify", json!({ "args": args, "options": opts }), defaults, Some(opts.seed));
    let doc = to_json(&json!({ "manifest": manifest, "report": report }));
    match args.format {
        Some(Format::Json) => stdout.write_all(doc.as_bytes())?,
        _ => stdout.write_all(report.to_text().as_bytes())?,
    }
    if let Some(out) = &args.out {
        fs::write(out, &doc)?;
        fs::write(manifest_path(out), to_json(&manifest))?;
    }
    if report.failed > 0 {
        return Err(CliError::VerificationFailed(report.failed));
    }
    Ok(())
}

pub fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let defaults = Defaults::load()?;
    match &cli.command {
        Command::Density(a) => cmd_density(a, &defaults, stdout),
        Command::Sample(a) => cmd_sample(a, &defaults, stdout, stderr),
        Command::Coeffs(a) => cmd_coeffs(a, &defaults, stdout, stderr),
        Command::Verify(a) => cmd_verify(a, &defaults, stdout),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    match dispatch(&cli, &mut out, &mut err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
