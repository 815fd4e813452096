//! Named experiment pipelines. Each writes plot-ready CSV tables and a
//! `report.json` into the configured output directory; CSV content depends
//! only on the configuration and seed.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rvl_core::expsums::{minor_arc_frequencies, prime_weyl_sum, regularity_scan, Axis, RegularityParams};
use rvl_core::iw::{
    build_pn, disjointness_check, eta_n, lower_inclusion, upper_inclusion_threshold, xi_partition, IWParams, DEFAULT_CHI,
    DEFAULT_SET_CAP,
};
use rvl_core::lattice::{build_gamma, counting, enumerate_orbit, ConvexBody, Lift, OrbitShape, DEFAULT_ORBIT_CAP};
use rvl_core::multipliers::{
    gauss_max, h_hat, m_hat, major_arc_average, major_arc_singular, phi_integral, GaussStructure, PhiDomain, QuadratureSpec,
    RationalFrequency,
};
use rvl_core::numtheory::{progression_deviation, PrimeTable};
use rvl_core::operators::{compare_weighted_unweighted, telescoping_l1, CZKernel, SparseFunction, TelescopeKind, TelescopeSetup};
use rvl_core::variation::{pad_by_repetition, split_variation, vr, vr_bruteforce, vr_dyadic_bound, vr_seq, IndexedSequence, BRUTEFORCE_MAX_LEN};

use crate::acceptance::{envelope_fit, ZERO_FLOOR};
use crate::cache::load_primes;
use crate::config::ExperimentConfig;

pub const EXPERIMENTS: [&str; 10] = [
    "gauss-decay",
    "theta-asymptotic",
    "multiplier-sweep",
    "variation-study",
    "convergence-study",
    "weyl-scan",
    "iw-build",
    "major-arc",
    "comparison",
    "telescoping",
];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub id: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub fitted: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
    pub environment: Environment,
    pub seconds: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    checks: Vec<Check>,
    fitted: BTreeMap<String, f64>,
    artifacts: Vec<PathBuf>,
    primes: Option<PrimeTable>,
}

impl Ctx<'_> {
    fn primes(&mut self) -> Result<&PrimeTable> {
        if self.primes.is_none() {
            self.primes = Some(load_primes(self.cfg.sieve.limit)?);
        }
        Ok(self.primes.as_ref().unwrap())
    }

    fn check(&mut self, name: &str, value: f64, default_bound: f64) -> Result<()> {
        let bound = self.cfg.tolerance_or(name, default_bound)?;
        self.checks.push(Check {
            name: name.to_string(),
            value,
            bound,
            passed: value < bound,
        });
        Ok(())
    }

    fn fit(&mut self, name: &str, v: f64) {
        self.fitted.insert(name.to_string(), v);
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.cfg.out.join(name);
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?));
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

/// Body and orbit descriptor shared by most experiments.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitDesc {
    /// `interval`, `cube` or `ball`.
    pub body: String,
    pub kprime: usize,
    pub kdoubleprime: usize,
    pub signed: bool,
    pub degree: u32,
}

impl Default for OrbitDesc {
    fn default() -> Self {
        Self {
            body: "interval".into(),
            kprime: 0,
            kdoubleprime: 1,
            signed: false,
            degree: 2,
        }
    }
}

impl OrbitDesc {
    pub fn shape(&self) -> OrbitShape {
        OrbitShape::new(self.kprime, self.kdoubleprime, self.signed)
    }

    pub fn body(&self) -> Result<ConvexBody> {
        let k = self.kprime + self.kdoubleprime;
        match self.body.as_str() {
            "interval" if k == 1 => Ok(ConvexBody::interval()),
            "interval" => bail!("body \"interval\" needs kprime + kdoubleprime = 1, got {k}"),
            "cube" => Ok(ConvexBody::cube(k)),
            "ball" => Ok(ConvexBody::ball(k)),
            other => bail!("unknown body {other:?}; expected interval, cube or ball"),
        }
    }

    pub fn lift(&self) -> Result<Lift> {
        Ok(Lift::identity(&build_gamma(self.kprime + self.kdoubleprime, self.degree)?))
    }
}

fn flatten<T: for<'de> Deserialize<'de>>(cfg: &ExperimentConfig) -> Result<(OrbitDesc, T)> {
    let mut orbit = toml::Table::new();
    let mut rest = cfg.params.clone();
    for key in ["body", "kprime", "kdoubleprime", "signed", "degree"] {
        if let Some(v) = rest.remove(key) {
            orbit.insert(key.to_string(), v);
        }
    }
    let mut sub = cfg.clone();
    sub.params = orbit;
    let desc: OrbitDesc = sub.params()?;
    sub.params = rest;
    Ok((desc, sub.params()?))
}

fn no_orbit<T: for<'de> Deserialize<'de>>(cfg: &ExperimentConfig) -> Result<T> {
    cfg.params()
}

fn pow2(exps: &[u32]) -> Result<Vec<u64>> {
    exps.iter()
        .map(|&e| if e < 40 { Ok(1u64 << e) } else { Err(anyhow!("scale exponent {e} is too large")) })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    if !EXPERIMENTS.contains(&cfg.id.as_str()) {
        bail!("unknown experiment id {:?}; known: {}", cfg.id, EXPERIMENTS.join(", "));
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg,
        checks: Vec::new(),
        fitted: BTreeMap::new(),
        artifacts: Vec::new(),
        primes: None,
    };
    match cfg.id.as_str() {
        "gauss-decay" => gauss_decay(&mut ctx),
        "theta-asymptotic" => theta_asymptotic(&mut ctx),
        "multiplier-sweep" => multiplier_sweep(&mut ctx),
        "variation-study" => variation_study(&mut ctx),
        "convergence-study" => convergence_study(&mut ctx),
        "weyl-scan" => weyl_scan(&mut ctx),
        "iw-build" => iw_build(&mut ctx),
        "major-arc" => major_arc(&mut ctx),
        "comparison" => comparison(&mut ctx),
        _ => telescoping(&mut ctx),
    }
    .with_context(|| format!("experiment {:?}", cfg.id))?;
    let report = RunReport {
        id: cfg.id.clone(),
        seed: cfg.seed,
        checks: ctx.checks,
        fitted: ctx.fitted,
        artifacts: ctx.artifacts,
        environment: Environment::current(),
        seconds: start.elapsed().as_secs_f64(),
    };
    let path = cfg.out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GaussParams {
    qmax: u64,
}

impl Default for GaussParams {
    fn default() -> Self {
        Self { qmax: 200 }
    }
}

fn gauss_decay(ctx: &mut Ctx) -> Result<()> {
    let (desc, p): (OrbitDesc, GaussParams) = flatten(ctx.cfg)?;
    let gamma = build_gamma(desc.kprime + desc.kdoubleprime, desc.degree)?;
    let s = GaussStructure::new(desc.kprime, desc.kdoubleprime, gamma)?;
    let mut maxima = Vec::new();
    let mut rows = Vec::new();
    for q in 1..=p.qmax {
        let (m, a) = gauss_max(q, &s)?;
        let a: Vec<String> = a.iter().map(|v| v.to_string()).collect();
        rows.push(row![q, m, a.join(" ")]);
        maxima.push((q, m));
    }
    ctx.csv("gauss.csv", &header(&["q", "max_abs", "argmax_a"]), &rows)?;
    let (delta, c) = envelope_fit(&maxima);
    ctx.fit("delta", delta);
    ctx.fit("C", c);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ThetaParams {
    exponents: Vec<u32>,
    /// Moduli for the progression deviations and the fitted constant `c` in
    /// `max_r |ϑ(x; q, r) - x/φ(q)| <= x e^{-c √ln x}`.
    moduli: Vec<u64>,
}

impl Default for ThetaParams {
    fn default() -> Self {
        Self {
            exponents: (8..=14).collect(),
            moduli: vec![3, 4, 5, 7, 8, 12],
        }
    }
}

fn theta_asymptotic(ctx: &mut Ctx) -> Result<()> {
    let (desc, p): (OrbitDesc, ThetaParams) = flatten(ctx.cfg)?;
    let body = desc.body()?;
    let shape = desc.shape();
    let main_vol = body.positive_volume().value;
    let mut rows = Vec::new();
    let mut errs = Vec::new();
    for n in pow2(&p.exponents)? {
        let (count, theta) = counting(&body, n, shape, ctx.primes()?)?;
        let main = main_vol * (n as f64).powi(shape.k() as i32);
        let err = (theta / main - 1.0).abs();
        rows.push(row![n, count, theta, main, theta / main, err, 3.0 / (n as f64).ln()]);
        errs.push((n, err));
    }
    ctx.csv("theta.csv", &header(&["n", "count", "theta", "main_term", "ratio", "error", "bound"]), &rows)?;
    let mut prog = Vec::new();
    let mut c_fit = f64::INFINITY;
    for n in pow2(&p.exponents)? {
        for &q in &p.moduli {
            let dev = progression_deviation(ctx.primes()?, n as f64, q)?;
            let c = -dev.ln() / (n as f64).ln().sqrt();
            c_fit = c_fit.min(c);
            prog.push(row![n, q, dev, c]);
        }
    }
    ctx.csv("progressions.csv", &header(&["n", "q", "relative_deviation", "c"]), &prog)?;
    if c_fit.is_finite() {
        ctx.fit("siegel_walfisz_c", c_fit);
    }
    if let Some(&(n, e)) = errs.last() {
        ctx.check("final error · ln N / 3", e * (n as f64).ln() / 3.0, 1.0)?;
        let tail = &errs[errs.len().saturating_sub(5)..];
        let rises = tail.windows(2).filter(|w| w[1].1 >= w[0].1).count();
        ctx.check("increases over the last four doublings", rises as f64, 0.5)?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SweepParams {
    n: u64,
    points: usize,
    /// `average`, `singular` or `continuous`.
    kind: String,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            n: 256,
            points: 256,
            kind: "average".into(),
        }
    }
}

fn multiplier_sweep(ctx: &mut Ctx) -> Result<()> {
    let (mut desc, p): (OrbitDesc, SweepParams) = flatten(ctx.cfg)?;
    if p.kind == "singular" {
        desc.signed = true;
    }
    let body = desc.body()?;
    let gamma = build_gamma(desc.kprime + desc.kdoubleprime, desc.degree)?;
    let d = gamma.len();
    // a uniform grid along the diagonal, then seeded points
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let xis: Vec<Vec<f64>> = (0..p.points)
        .map(|i| {
            if i < p.points / 2 {
                vec![i as f64 / (p.points / 2) as f64 - 0.5; d]
            } else {
                (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect()
            }
        })
        .collect();
    let values: Vec<Complex64> = match p.kind.as_str() {
        "average" => m_hat(&xis, &enumerate_orbit(&body, p.n, desc.shape(), &gamma, ctx.primes()?, DEFAULT_ORBIT_CAP)?)?,
        "singular" => {
            let orbit = enumerate_orbit(&body, p.n, desc.shape(), &gamma, ctx.primes()?, DEFAULT_ORBIT_CAP)?;
            h_hat(&xis, &orbit, &CZKernel::builtin(desc.kprime + desc.kdoubleprime))?
        }
        "continuous" => {
            let spec = QuadratureSpec::default();
            xis.iter()
                .map(|xi| phi_integral(xi, &body, &gamma, p.n as f64, PhiDomain::Full, &spec).map(|r| r.value))
                .collect::<rvl_core::Result<_>>()?
        }
        other => bail!("unknown multiplier kind {other:?}; expected average, singular or continuous"),
    };
    let mut cols: Vec<String> = (0..d).map(|j| format!("xi_{j}")).collect();
    cols.extend(header(&["re", "im", "abs"]));
    let rows: Vec<Vec<String>> = xis
        .iter()
        .zip(&values)
        .map(|(xi, v)| {
            let mut r: Vec<String> = xi.iter().map(|x| x.to_string()).collect();
            r.extend(row![v.re, v.im, v.norm()]);
            r
        })
        .collect();
    ctx.csv("multiplier.csv", &cols, &rows)?;
    ctx.fit("max_abs", values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct VariationParams {
    length: usize,
    trials: usize,
    r: Vec<f64>,
    rho: f64,
}

impl Default for VariationParams {
    fn default() -> Self {
        Self {
            length: 65,
            trials: 100,
            r: vec![2.0, 3.0],
            rho: 0.5,
        }
    }
}

fn variation_study(ctx: &mut Ctx) -> Result<()> {
    let p: VariationParams = no_orbit(ctx.cfg)?;
    if p.length == 0 {
        bail!("length must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let mut rows = Vec::new();
    let mut worst_dyadic: f64 = 0.0;
    let mut worst_split: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for t in 0..p.trials {
        let a: Vec<Complex64> = (0..p.length)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        for &r in &p.r {
            let v = vr(&a, r)?;
            let (lhs, rhs) = vr_dyadic_bound(&pad_by_repetition(&a), r)?;
            let split = split_variation(&IndexedSequence::new((1..=p.length as i64).collect(), a.clone())?, p.rho, r)?;
            let brute = if p.length <= BRUTEFORCE_MAX_LEN { Some(vr_bruteforce(&a, r)?) } else { None };
            if let Some(b) = brute {
                worst_oracle = worst_oracle.max(if b > 0.0 { (v - b).abs() / b } else { v });
            }
            worst_dyadic = worst_dyadic.max(lhs / rhs);
            worst_split = worst_split.max(split.smallest_constant);
            rows.push(row![
                t,
                r,
                v,
                brute.map_or(String::new(), |b| b.to_string()),
                lhs,
                rhs,
                split.long,
                split.short,
                split.smallest_constant
            ]);
        }
    }
    ctx.csv(
        "variation.csv",
        &header(&["trial", "r", "vr", "vr_bruteforce", "dyadic_lhs", "dyadic_rhs", "split_long", "split_short", "split_constant"]),
        &rows,
    )?;
    ctx.check("dyadic lhs/rhs", worst_dyadic, 1.0 + ZERO_FLOOR)?;
    ctx.check("split constant / 2", worst_split / 2.0, 1.0 + ZERO_FLOOR)?;
    ctx.check("oracle relative error", worst_oracle, ZERO_FLOOR)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConvergenceParams {
    /// `[a_1, …, a_d, q]`; the frequency is `a/q`.
    frequency: Vec<u64>,
    /// Scales `1..=nmax`; an empty orbit contributes `0`.
    nmax: u64,
    r: Vec<f64>,
    rho: f64,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        Self {
            frequency: vec![2, 1, 2],
            nmax: 256,
            r: vec![2.5, 4.0],
            rho: 0.5,
        }
    }
}

fn convergence_study(ctx: &mut Ctx) -> Result<()> {
    let (desc, p): (OrbitDesc, ConvergenceParams) = flatten(ctx.cfg)?;
    let body = desc.body()?;
    let gamma = build_gamma(desc.kprime + desc.kdoubleprime, desc.degree)?;
    let Some((&q, a)) = p.frequency.split_last() else {
        bail!("frequency must list a_1..a_d then q");
    };
    let freq = RationalFrequency::exact(a.to_vec(), q)?;
    let xi = freq.value();
    let mut idx = Vec::new();
    let mut vals = Vec::new();
    let mut rows = Vec::new();
    for n in 1..=p.nmax {
        let orbit = enumerate_orbit(&body, n, desc.shape(), &gamma, ctx.primes()?, DEFAULT_ORBIT_CAP)?;
        let v = if orbit.is_empty() { Complex64::new(0.0, 0.0) } else { m_hat(std::slice::from_ref(&xi), &orbit)?[0] };
        rows.push(row![n, v.re, v.im, v.norm()]);
        idx.push(n as i64);
        vals.push(v);
    }
    ctx.csv("convergence.csv", &header(&["n", "re", "im", "abs"]), &rows)?;
    if vals.is_empty() {
        bail!("nmax must be positive");
    }
    let seq = IndexedSequence::new(idx, vals)?;
    for &r in &p.r {
        ctx.fit(&format!("V_{r}"), vr_seq(&seq, r)?);
        let split = split_variation(&seq, p.rho, r)?;
        ctx.fit(&format!("split_constant_{r}"), split.smallest_constant);
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WeylParams {
    exponents: Vec<u32>,
    frequencies: usize,
    /// Minor-arc denominators are drawn from `[(ln N_max)^2, N_min^2/(ln N_min)^2]` unless given.
    q_range: Option<(u64, u64)>,
    modulus: u64,
    trials: usize,
}

impl Default for WeylParams {
    fn default() -> Self {
        Self {
            exponents: vec![10, 11, 12, 13],
            frequencies: 10,
            q_range: None,
            modulus: 3,
            trials: 4,
        }
    }
}

fn weyl_scan(ctx: &mut Ctx) -> Result<()> {
    let (desc, p): (OrbitDesc, WeylParams) = flatten(ctx.cfg)?;
    let body = desc.body()?;
    let shape = desc.shape();
    let gamma = build_gamma(shape.k(), desc.degree)?;
    let scales = pow2(&p.exponents)?;
    let (Some(&lo), Some(&hi)) = (scales.first(), scales.last()) else {
        bail!("exponents must not be empty");
    };
    let (q_min, q_max) = p.q_range.unwrap_or((
        (hi as f64).ln().powi(2).ceil() as u64,
        ((lo as f64).powi(2) / (lo as f64).ln().powi(2)).floor() as u64,
    ));
    let freqs = minor_arc_frequencies(p.frequencies, gamma.len(), q_min, q_max, ctx.cfg.seed);
    let mut rows = Vec::new();
    let mut no_decay = 0usize;
    for (i, (xi, q)) in freqs.iter().enumerate() {
        let mut first_last = (0.0, 0.0);
        for (j, &n) in scales.iter().enumerate() {
            let s = prime_weyl_sum(xi, shape, &gamma, &body, n, ctx.primes()?)?;
            let norm = s.norm() / (n as f64).powi(shape.k() as i32);
            if j == 0 {
                first_last.0 = norm;
            }
            first_last.1 = norm;
            rows.push(row![i, q, n, norm]);
        }
        if first_last.1 >= first_last.0 {
            no_decay += 1;
        }
    }
    ctx.csv("weyl.csv", &header(&["frequency", "q", "n", "normalized"]), &rows)?;
    ctx.check("frequencies without decay", no_decay as f64, 1.5)?;
    let params = RegularityParams {
        degree: desc.degree,
        modulus: p.modulus,
        alpha: 1.0,
        alpha1: 2.0,
        beta: 2.0,
        trials: p.trials,
        seed: ctx.cfg.seed,
    };
    let reg = regularity_scan(&Axis::Primes, &scales, &params, ctx.primes()?)?;
    let rows: Vec<Vec<String>> = reg.iter().map(|r| row![r.n, r.q, r.modulus, r.ratio, r.skipped]).collect();
    ctx.csv("regularity.csv", &header(&["n", "q", "modulus", "ratio", "skipped"]), &rows)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct IWBuildParams {
    levels: Vec<u64>,
    beta: u32,
    chi: f64,
    rho: f64,
    s_max: u64,
    m_max: u64,
    /// Seeded ξ at which `Ξ_n` is evaluated, for levels `n` with a small enough set.
    xi_points: usize,
}

impl Default for IWBuildParams {
    fn default() -> Self {
        Self {
            levels: vec![1, 2, 3, 4],
            beta: 1,
            chi: DEFAULT_CHI,
            rho: 0.5,
            s_max: 3,
            m_max: 6,
            xi_points: 8,
        }
    }
}

fn iw_build(ctx: &mut Ctx) -> Result<()> {
    let (desc, p): (OrbitDesc, IWBuildParams) = flatten(ctx.cfg)?;
    let gamma = build_gamma(desc.kprime + desc.kdoubleprime, desc.degree)?;
    let params = IWParams::new(p.beta, p.chi, p.rho, &gamma)?;
    let mut rows = Vec::new();
    for &n in &p.levels {
        let set = build_pn(n, p.beta)?;
        let missing = lower_inclusion(&set);
        rows.push(row![n, p.beta, set.n0, set.cardinality(), set.log_max(), missing.map_or(String::new(), |q| q.to_string())]);
    }
    ctx.csv("sets.csv", &header(&["n", "beta", "n0", "cardinality", "log_max", "lower_inclusion_missing"]), &rows)?;
    let mut rows = Vec::new();
    let mut overlapping = 0usize;
    for s in 0..=p.s_max {
        for m in s + 1..=p.m_max {
            let rep = disjointness_check(s, m, &params, DEFAULT_SET_CAP)?;
            overlapping += !rep.disjoint as usize;
            let witness = rep
                .witness
                .map(|(f, g)| format!("{:?}/{} {:?}/{}", f.a, f.q, g.a, g.q))
                .unwrap_or_default();
            rows.push(row![s, m, rep.disjoint, format!("{:?}", rep.method), rep.radius, rep.log_q_max, rep.denominators, witness]);
        }
    }
    ctx.csv(
        "disjointness.csv",
        &header(&["s", "m", "disjoint", "method", "radius", "log_q_max", "denominators", "witness"]),
        &rows,
    )?;
    ctx.check("overlapping (s, m) pairs", overlapping as f64, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let mut rows = Vec::new();
    for _ in 0..p.xi_points {
        let xi: Vec<f64> = (0..params.d()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        for &n in &p.levels {
            let Ok(v) = xi_partition(&xi, n, None, &params, DEFAULT_SET_CAP as u128) else {
                continue;
            };
            let mut r: Vec<String> = xi.iter().map(|x| x.to_string()).collect();
            r.extend(row![n, eta_n(&xi, n, &params), v]);
            rows.push(r);
        }
    }
    let mut cols: Vec<String> = (0..params.d()).map(|j| format!("xi_{j}")).collect();
    cols.extend(header(&["n", "eta_n", "xi_partition"]));
    ctx.csv("xi.csv", &cols, &rows)?;
    let threshold = upper_inclusion_threshold(p.beta, p.levels.iter().copied())?;
    ctx.fit("upper_inclusion_threshold", threshold.map_or(f64::NAN, |n| n as f64));
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MajorArcParams {
    /// Each entry is `[a_1, …, a_d, q]`.
    frequencies: Vec<Vec<u64>>,
    exponents: Vec<u32>,
    singular: bool,
    beta_prime: f64,
}

impl Default for MajorArcParams {
    fn default() -> Self {
        Self {
            frequencies: vec![vec![1, 1, 1], vec![2, 1, 2], vec![3, 1, 3]],
            exponents: (6..=12).collect(),
            singular: false,
            beta_prime: 2.0,
        }
    }
}

fn major_arc(ctx: &mut Ctx) -> Result<()> {
    let (mut desc, p): (OrbitDesc, MajorArcParams) = flatten(ctx.cfg)?;
    desc.signed |= p.singular;
    let body = desc.body()?;
    let gamma = build_gamma(desc.kprime + desc.kdoubleprime, desc.degree)?;
    let spec = QuadratureSpec::default();
    let kernel = CZKernel::builtin(desc.kprime + desc.kdoubleprime);
    let orbits = pow2(&p.exponents)?
        .into_iter()
        .map(|n| enumerate_orbit(&body, n, desc.shape(), &gamma, ctx.primes()?, DEFAULT_ORBIT_CAP).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut worst_final: f64 = 0.0;
    for f in &p.frequencies {
        let Some((&q, a)) = f.split_last() else {
            bail!("each frequency must list a_1..a_d then q");
        };
        let freq = RationalFrequency::exact(a.to_vec(), q)?;
        let label = format!("{a:?}/{q}");
        let reports = if p.singular {
            orbits
                .windows(2)
                .map(|w| major_arc_singular(&freq, &w[0], &w[1], &body, &kernel, p.beta_prime, &spec))
                .collect::<rvl_core::Result<Vec<_>>>()?
        } else {
            orbits
                .iter()
                .map(|o| major_arc_average(&freq, o, &body, p.beta_prime, &spec))
                .collect::<rvl_core::Result<Vec<_>>>()?
        };
        for r in &reports {
            rows.push(row![label, r.n, r.error, r.gauss.norm(), r.discrete.norm(), r.continuous.norm(), r.within_hypothesis]);
        }
        if let Some(r) = reports.last() {
            worst_final = worst_final.max(r.error);
        }
    }
    ctx.csv("major_arc.csv", &header(&["frequency", "n", "error", "gauss_abs", "discrete_abs", "continuous_abs", "within_hypothesis"]), &rows)?;
    ctx.check("final error", worst_final, 0.05)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ComparisonParams {
    exponents: Vec<u32>,
    random_functions: usize,
    support: usize,
    radius: i64,
    p: f64,
}

impl Default for ComparisonParams {
    fn default() -> Self {
        Self {
            exponents: (6..=13).collect(),
            random_functions: 2,
            support: 24,
            radius: 100,
            p: 1.0,
        }
    }
}

fn comparison(ctx: &mut Ctx) -> Result<()> {
    let (desc, p): (OrbitDesc, ComparisonParams) = flatten(ctx.cfg)?;
    let body = desc.body()?;
    let lift = desc.lift()?;
    let d = lift.gamma.len();
    let scales = pow2(&p.exponents)?;
    let mut fs = vec![("delta".to_string(), SparseFunction::delta(vec![0; d]))];
    for i in 0..p.random_functions {
        fs.push((format!("random-{}", i + 1), SparseFunction::random(d, p.support, p.radius, ctx.cfg.seed.wrapping_add(i as u64))));
    }
    let mut rows = Vec::new();
    for (label, f) in &fs {
        let rep = compare_weighted_unweighted(f, &lift, &body, desc.shape(), &scales, ctx.primes()?, p.p)?;
        for r in &rep.rows {
            rows.push(row![label, r.n, r.relative_norm.map_or(String::new(), |v| v.to_string()), r.skipped]);
        }
        ctx.fit(&format!("C_{label}"), rep.c_fit);
    }
    ctx.csv("comparison.csv", &header(&["function", "n", "relative_norm", "skipped"]), &rows)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TelescopingParams {
    /// `average` or `singular`.
    kind: String,
    pairs: Vec<(u64, u64)>,
}

impl Default for TelescopingParams {
    fn default() -> Self {
        Self {
            kind: "average".into(),
            pairs: vec![(2, 8), (8, 32), (16, 64), (32, 128), (64, 256)],
        }
    }
}

fn telescoping(ctx: &mut Ctx) -> Result<()> {
    let (mut desc, p): (OrbitDesc, TelescopingParams) = flatten(ctx.cfg)?;
    let kind = match p.kind.as_str() {
        "average" => TelescopeKind::Average,
        "singular" => {
            desc.signed = true;
            TelescopeKind::Singular
        }
        other => bail!("unknown telescoping kind {other:?}; expected average or singular"),
    };
    let setup = TelescopeSetup {
        body: desc.body()?,
        shape: desc.shape(),
        lift: desc.lift()?,
        kernel: matches!(kind, TelescopeKind::Singular).then(|| CZKernel::builtin(desc.kprime + desc.kdoubleprime)),
    };
    let mut rows = Vec::new();
    let mut worst_identity: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for &(n1, n2) in &p.pairs {
        let rep = telescoping_l1(kind, n1, n2, &setup, ctx.primes()?, 1.0)?;
        worst_identity = worst_identity.max(rep.identity_error);
        worst_ratio = worst_ratio.max(rep.ratio);
        rows.push(row![n1, n2, rep.lhs, rep.theta_n1, rep.theta_n2, rep.ratio, rep.identity_error]);
    }
    ctx.csv("telescoping.csv", &header(&["n1", "n2", "lhs", "theta_n1", "theta_n2", "ratio", "identity_error"]), &rows)?;
    ctx.check("identity error", worst_identity, ZERO_FLOOR)?;
    ctx.fit("C", worst_ratio);
    Ok(())
}

/// Reads all CSV artifacts of a report, for determinism comparisons.
pub fn read_artifacts(report: &RunReport) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    report
        .artifacts
        .iter()
        .map(|p: &PathBuf| Ok((p.file_name().map(PathBuf::from).unwrap_or_default(), fs::read(p)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_id_is_rejected() {
        let e = run_experiment(&ExperimentConfig::new("gauss")).unwrap_err().to_string();
        assert!(e.contains("unknown experiment id") && e.contains("gauss-decay"), "{e}");
    }

    #[test]
    fn orbit_keys_split_from_experiment_keys() {
        let mut c = ExperimentConfig::new("gauss-decay");
        c.set("degree", 3).set("qmax", 10);
        let (d, p): (OrbitDesc, GaussParams) = flatten(&c).unwrap();
        assert_eq!((d.degree, p.qmax), (3, 10));
        c.set("qmx", 1);
        let e = flatten::<GaussParams>(&c).err().unwrap().to_string();
        assert!(e.contains("qmx"), "{e}");
    }

    #[test]
    fn body_descriptor() {
        let mut d = OrbitDesc::default();
        assert!(d.body().is_ok());
        d.kprime = 1;
        assert!(d.body().is_err());
        d.body = "ball".into();
        assert_eq!(d.body().unwrap().k(), 2);
        d.body = "simplex".into();
        assert!(d.body().unwrap_err().to_string().contains("simplex"));
    }
}
