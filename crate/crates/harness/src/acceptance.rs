//! The acceptance suite. Each criterion is one named check with a primary
//! measured value, a bound it must stay strictly below, and any further
//! conditions that must hold.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{anyhow, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rvl_core::expsums::{minor_arc_frequencies, prime_weyl_sum};
use rvl_core::iw::{build_pn, disjointness_check, lower_inclusion, IWParams, DEFAULT_CHI, DEFAULT_SET_CAP};
use rvl_core::lattice::{build_gamma, counting, enumerate_orbit, ConvexBody, Lift, OrbitShape, DEFAULT_ORBIT_CAP};
use rvl_core::multipliers::{
    envelope_check, gauss_max, gaussian_sum_direct, gaussian_sum_factorized, major_arc_average, major_arc_singular,
    m_hat, phi_integral, phi_interval_closed_form, GaussStructure, PhiDomain, QuadratureSpec,
    RationalFrequency,
};
use rvl_core::numtheory::{factorize, ramanujan_average, ramanujan_closed_form, PrimeTable};
use rvl_core::operators::{
    apply_average, compare_weighted_unweighted, telescoping_l1, telescoping_table, CZKernel, SparseFunction,
    TelescopeKind, TelescopeSetup,
};
use rvl_core::variation::{oscillation, vr, vr_bruteforce, vr_dyadic_bound, IndexedSequence};

use crate::cache::load_primes;

pub const DEFAULT_SEED: u64 = 0x5eed;
pub const SIEVE_LIMIT: u64 = 100_000;
/// Errors below this are round-off around an exact zero.
pub const ZERO_FLOOR: f64 = 1e-12;

/// Constants fitted on the pinned reference run (`rvl acceptance --refit`
/// prints fresh values).
pub mod frozen {
    pub const GAUSS_DELTA: f64 = 0.131;
    pub const GAUSS_C: f64 = 1.52;
    /// `|m_N - G Φ_N|` at `N = 2^12` for `1/2` and `1/3`.
    pub const MAJOR_ARC_FINAL: [f64; 2] = [3.442151223993495e-4, 4.724758004787483e-4];
    pub const TELESCOPE_C_AVERAGE: f64 = 2.09;
    pub const TELESCOPE_C_SINGULAR: f64 = 0.479;
    pub const ENVELOPE_C: f64 = 4.93;
    pub const COMPARISON_C: f64 = 1.19;
}

#[derive(Debug, Clone, Serialize)]
pub struct Condition {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: &'static str,
    pub criterion: u8,
    pub passed: bool,
    pub metric: &'static str,
    pub value: f64,
    pub bound: f64,
    pub conditions: Vec<Condition>,
    pub fitted: BTreeMap<String, f64>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CheckRecord {
    pub fn summary(&self) -> String {
        let failed: Vec<&str> = self
            .conditions
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        let mut s = format!(
            "[{:>2}] {:<22} {}  {} = {:.3e} (bound {:.3e}, {:.1}s of {:.0}s)",
            self.criterion,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.metric,
            self.value,
            self.bound,
            self.seconds,
            self.budget_seconds
        );
        if !failed.is_empty() {
            s += &format!("  failed: {}", failed.join(", "));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub seed: u64,
    /// Replaces every primary bound; `0` turns the suite into a negative control.
    pub tolerance: Option<f64>,
    /// Fit the constants afresh instead of using the frozen ones.
    pub refit: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            tolerance: None,
            refit: false,
        }
    }
}

pub struct Suite {
    pub opts: Options,
    primes: PrimeTable,
}

/// `(name, criterion, runtime budget in seconds)`.
pub const CHECKS: [(&str, u8, f64); 15] = [
    ("vr-oracle", 1, 5.0),
    ("dyadic-bound", 2, 10.0),
    ("variation-algebra", 3, 30.0),
    ("ramanujan", 4, 30.0),
    ("gauss-crt", 5, 60.0),
    ("gauss-decay", 6, 300.0),
    ("chebyshev-asymptotic", 7, 120.0),
    ("major-arc-average", 8, 180.0),
    ("major-arc-singular", 9, 180.0),
    ("telescoping", 10, 60.0),
    ("fourier-consistency", 11, 60.0),
    ("vdc-envelopes", 12, 120.0),
    ("weighted-unweighted", 13, 120.0),
    ("iw-construction", 14, 60.0),
    ("minor-arc-decay", 15, 300.0),
];

struct Draft {
    metric: &'static str,
    value: f64,
    bound: f64,
    conditions: Vec<Condition>,
    fitted: BTreeMap<String, f64>,
}

impl Draft {
    fn new(metric: &'static str, value: f64, bound: f64) -> Self {
        Self {
            metric,
            value,
            bound,
            conditions: Vec::new(),
            fitted: BTreeMap::new(),
        }
    }

    fn cond(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.conditions.push(Condition {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn fit(&mut self, name: &str, v: f64) {
        self.fitted.insert(name.to_string(), v);
    }
}

/// Rounds up to three significant digits.
pub fn freeze_up(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(2 - x.log10().floor() as i32);
    (x * scale).ceil() / scale
}

/// Rounds down to three decimals.
pub fn freeze_down(x: f64) -> f64 {
    (x * 1000.0).floor() / 1000.0
}

fn random_complex(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn strictly_decreasing_or_zero(errs: &[f64]) -> (bool, String) {
    if errs.iter().all(|&e| e < ZERO_FLOOR) {
        return (true, "identically zero".into());
    }
    let ok = errs.windows(2).all(|w| w[1] < w[0]);
    (ok, fmt_list(errs))
}

impl Suite {
    pub fn new(opts: Options) -> Result<Self> {
        Ok(Self {
            primes: load_primes(SIEVE_LIMIT)?,
            opts,
        })
    }

    fn rng(&self, criterion: u8) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.opts.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ criterion as u64)
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        CHECKS.iter().map(|c| c.0)
    }

    pub fn run(&self, name: &str) -> Result<CheckRecord> {
        let &(name, criterion, budget) = CHECKS
            .iter()
            .find(|c| c.0 == name)
            .ok_or_else(|| anyhow!("unknown check {name:?}; known: {}", Self::names().collect::<Vec<_>>().join(", ")))?;
        let start = Instant::now();
        let draft = match criterion {
            1 => self.vr_oracle(),
            2 => self.dyadic_bound(),
            3 => self.variation_algebra(),
            4 => self.ramanujan(),
            5 => self.gauss_crt(),
            6 => self.gauss_decay(),
            7 => self.chebyshev(),
            8 => self.major_arc_average(),
            9 => self.major_arc_singular(),
            10 => self.telescoping(),
            11 => self.fourier_consistency(),
            12 => self.vdc_envelopes(),
            13 => self.weighted_unweighted(),
            14 => self.iw_construction(),
            _ => self.minor_arc_decay(),
        }?;
        let seconds = start.elapsed().as_secs_f64();
        let bound = self.opts.tolerance.unwrap_or(draft.bound);
        let mut conditions = draft.conditions;
        conditions.push(Condition {
            name: "runtime".into(),
            passed: seconds <= budget,
            detail: format!("{seconds:.2}s of {budget:.0}s"),
        });
        let passed = draft.value < bound && conditions.iter().all(|c| c.passed);
        Ok(CheckRecord {
            name,
            criterion,
            passed,
            metric: draft.metric,
            value: draft.value,
            bound,
            conditions,
            fitted: draft.fitted,
            seconds,
            budget_seconds: budget,
        })
    }

    fn vr_oracle(&self) -> Result<Draft> {
        let mut rng = self.rng(1);
        let mut worst: f64 = 0.0;
        for _ in 0..500 {
            let len = rng.gen_range(1..=12);
            let a = random_complex(&mut rng, len);
            for r in [2.0, 2.5, 3.0, 10.0] {
                let dp = vr(&a, r)?;
                let bf = vr_bruteforce(&a, r)?;
                let rel = if bf > 0.0 { (dp - bf).abs() / bf } else { dp.abs() };
                worst = worst.max(rel);
            }
        }
        Ok(Draft::new("max relative error", worst, 1e-12))
    }

    fn dyadic_bound(&self) -> Result<Draft> {
        let mut rng = self.rng(2);
        let mut worst: f64 = 0.0;
        let mut violations = 0;
        for _ in 0..1000 {
            let a = random_complex(&mut rng, 65);
            for r in [2.0, 3.0] {
                let (lhs, rhs) = vr_dyadic_bound(&a, r)?;
                if lhs > rhs {
                    violations += 1;
                }
                worst = worst.max(lhs / rhs);
            }
        }
        let mut d = Draft::new("max lhs/rhs", worst, 1.0);
        d.cond("no violations", violations == 0, format!("{violations} violations"));
        Ok(d)
    }

    fn variation_algebra(&self) -> Result<Draft> {
        let mut rng = self.rng(3);
        let slack = 1.0 + 1e-12;
        let mut worst = BTreeMap::<&str, f64>::new();
        let mut note = |k: &'static str, lhs: f64, rhs: f64| {
            let ratio = if rhs > 0.0 {
                lhs / rhs
            } else if lhs <= 1e-15 {
                0.0
            } else {
                f64::INFINITY
            };
            let e = worst.entry(k).or_insert(0.0);
            *e = e.max(ratio);
        };
        for _ in 0..1000 {
            let len = rng.gen_range(3..=48);
            let a = random_complex(&mut rng, len);
            let r = rng.gen_range(2.0..10.0);
            let v = vr(&a, r)?;
            let j0 = rng.gen_range(0..len);
            let sup = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
            note("sup bound", sup, v + a[j0].norm());
            let mut u: Vec<usize> = (0..rng.gen_range(0..5)).map(|_| rng.gen_range(0..len)).collect();
            u.extend([0, len - 1]);
            u.sort_unstable();
            u.dedup();
            let k = (u.len() - 1) as f64;
            let blocks: f64 = u
                .windows(2)
                .map(|w| vr(&a[w[0]..=w[1]], r).map(|b| b.powf(r)))
                .sum::<rvl_core::Result<f64>>()?;
            note("concatenation", v, k.powf(1.0 - 1.0 / r) * blocks.powf(1.0 / r));
            let r2 = rng.gen_range(1.0..r);
            note("r-monotonicity", v, vr(&a, r2)?);
            let lr = a.iter().map(|z| z.norm().powf(r)).sum::<f64>().powf(1.0 / r);
            note("minkowski", v, 2.0 * lr);
            let seq = IndexedSequence::from_values(a.clone());
            let mut lac: Vec<i64> = (0..rng.gen_range(2..8)).map(|_| rng.gen_range(0..len) as i64).collect();
            lac.sort_unstable();
            lac.dedup();
            if lac.len() >= 2 {
                let lac: Vec<i64> = lac.iter().map(|&i| seq.indices()[i as usize]).collect();
                let j = (lac.len() - 1) as f64;
                note("oscillation", oscillation(&seq, &lac)?, j.powf(0.5 - 1.0 / r) * v);
            }
        }
        let max = worst.values().copied().fold(0.0, f64::max);
        let mut d = Draft::new("max lhs/rhs", max, slack);
        for (k, w) in worst {
            d.cond(k, w < slack, format!("max ratio {w:.6}"));
        }
        Ok(d)
    }

    fn ramanujan(&self) -> Result<Draft> {
        let mut worst: f64 = 0.0;
        for q in 1..=500u64 {
            for a in 0..q as i64 {
                let lhs = ramanujan_average(a, q)?;
                let rhs = ramanujan_closed_form(a, q)?;
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok(Draft::new("max |average - closed form|", worst, 1e-12))
    }

    fn gauss_crt(&self) -> Result<Draft> {
        let mut rng = self.rng(5);
        let structures = [
            ("k=1, Γ={1,2}", GaussStructure::new(0, 1, build_gamma(1, 2)?)?),
            ("k=2, degree 2", GaussStructure::new(1, 1, build_gamma(2, 2)?)?),
        ];
        let mut worst: f64 = 0.0;
        let mut tested = 0usize;
        for q in 4..=100u64 {
            let f = factorize(q);
            if f.len() == 1 && f[0].1 == 1 {
                continue;
            }
            for (_, s) in &structures {
                for _ in 0..20 {
                    let a = loop {
                        let a: Vec<u64> = (0..s.d()).map(|_| rng.gen_range(1..=q)).collect();
                        if a.iter().fold(q, |g, &v| num_integer::gcd(g, v)) == 1 {
                            break a;
                        }
                    };
                    let x = gaussian_sum_direct(&a, q, s)?;
                    let y = gaussian_sum_factorized(&a, q, s)?;
                    worst = worst.max((x - y).norm());
                    tested += 1;
                }
            }
        }
        let mut d = Draft::new("max |direct - factorized|", worst, 1e-10);
        d.cond("coverage", tested > 0, format!("{tested} sums over {} structures", structures.len()));
        Ok(d)
    }

    fn gauss_decay(&self) -> Result<Draft> {
        let s = GaussStructure::new(0, 1, build_gamma(1, 2)?)?;
        let maxima: Vec<(u64, f64)> = (1..=200u64)
            .map(|q| gauss_max(q, &s).map(|(m, _)| (q, m)))
            .collect::<rvl_core::Result<_>>()?;
        let (delta, c) = envelope_fit(&maxima);
        let (fd, fc) = if self.opts.refit {
            (freeze_down(delta), freeze_up(envelope_constant(&maxima, freeze_down(delta))))
        } else {
            (frozen::GAUSS_DELTA, frozen::GAUSS_C)
        };
        let ratio = maxima
            .iter()
            .map(|&(q, m)| m / (fc * (q as f64).powf(-fd)))
            .fold(0.0, f64::max);
        let mut d = Draft::new("max_q max|G| / (C q^-δ) at frozen (C, δ)", ratio, 1.0);
        d.fit("delta", delta);
        d.fit("C", c);
        d.fit("frozen_delta", fd);
        d.fit("frozen_C", fc);
        d.cond("δ >= 0.2", delta >= 0.2, format!("fitted δ = {delta:.4}"));
        d.cond("C <= 5", c <= 5.0, format!("fitted C = {c:.4}"));
        Ok(d)
    }

    fn chebyshev(&self) -> Result<Draft> {
        let cases = [
            ("interval", ConvexBody::interval(), OrbitShape::new(0, 1, false)),
            ("cube", ConvexBody::cube(2), OrbitShape::new(1, 1, false)),
            ("ball", ConvexBody::ball(2), OrbitShape::new(1, 1, false)),
        ];
        let mut d = Draft::new("max final error · ln N / 3", 0.0, 1.0);
        for (name, body, shape) in cases {
            let mut errs = Vec::new();
            for e in 8..=14 {
                let n = 1u64 << e;
                let (_, theta) = counting(&body, n, shape, &self.primes)?;
                let main = body.positive_volume().value * (n as f64).powi(shape.k() as i32);
                errs.push((theta / main - 1.0).abs());
            }
            let tail = &errs[errs.len() - 5..];
            let dec = tail.windows(2).all(|w| w[1] < w[0]);
            d.cond(format!("{name} decreasing"), dec, fmt_list(&errs));
            let last = errs[errs.len() - 1] * ((1u64 << 14) as f64).ln() / 3.0;
            d.value = d.value.max(last);
            d.fit(&format!("{name}_final_error"), errs[errs.len() - 1]);
        }
        Ok(d)
    }

    /// The frequency `a/q` sits on the `p^2` coordinate, `ξ = (0, a/q)`.
    fn major_arc_frequencies() -> Result<Vec<(String, RationalFrequency)>> {
        [(0u64, 1u64), (1, 2), (1, 3)]
            .iter()
            .map(|&(a, q)| Ok((format!("{a}/{q}"), RationalFrequency::exact(vec![q, if a == 0 { q } else { a }], q)?)))
            .collect()
    }

    fn major_arc_average(&self) -> Result<Draft> {
        let gamma = build_gamma(1, 2)?;
        let body = ConvexBody::interval();
        let spec = QuadratureSpec::default();
        let orbits = (6..=12)
            .map(|e| enumerate_orbit(&body, 1 << e, OrbitShape::new(0, 1, false), &gamma, &self.primes, DEFAULT_ORBIT_CAP))
            .collect::<rvl_core::Result<Vec<_>>>()?;
        let mut d = Draft::new("max error at N = 2^12", 0.0, 0.05);
        let mut finals = Vec::new();
        for (label, f) in Self::major_arc_frequencies()? {
            let errs: Vec<f64> = orbits
                .iter()
                .map(|o| major_arc_average(&f, o, &body, 2.0, &spec).map(|r| r.error))
                .collect::<rvl_core::Result<_>>()?;
            let (ok, detail) = strictly_decreasing_or_zero(&errs);
            d.cond(format!("{label} decreasing"), ok, detail);
            let last = errs[errs.len() - 1];
            d.value = d.value.max(last);
            d.fit(&format!("final_{label}"), last);
            if f.q > 1 {
                finals.push(last);
            }
        }
        if !self.opts.refit {
            for (got, want) in finals.iter().zip(frozen::MAJOR_ARC_FINAL) {
                let rel = (got - want).abs() / want;
                d.cond("matches frozen reference", rel < 1e-6, format!("{got:.6e} vs {want:.6e}"));
            }
        }
        Ok(d)
    }

    fn major_arc_singular(&self) -> Result<Draft> {
        let gamma = build_gamma(1, 2)?;
        let body = ConvexBody::interval();
        let spec = QuadratureSpec::default();
        let kernel = CZKernel::builtin(1);
        let orbits = (6..=12)
            .map(|e| enumerate_orbit(&body, 1 << e, OrbitShape::new(0, 1, true), &gamma, &self.primes, DEFAULT_ORBIT_CAP))
            .collect::<rvl_core::Result<Vec<_>>>()?;
        let mut d = Draft::new("largest increase between consecutive N", 0.0, ZERO_FLOOR);
        for (label, f) in Self::major_arc_frequencies()? {
            let errs: Vec<f64> = orbits
                .windows(2)
                .map(|w| major_arc_singular(&f, &w[0], &w[1], &body, &kernel, 2.0, &spec).map(|r| r.error))
                .collect::<rvl_core::Result<_>>()?;
            let rise = errs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            d.value = d.value.max(rise);
            let (ok, detail) = strictly_decreasing_or_zero(&errs);
            d.cond(format!("{label} decreasing"), ok, detail);
            d.fit(&format!("max_error_{label}"), errs.iter().copied().fold(0.0, f64::max));
        }
        Ok(d)
    }

    fn telescoping(&self) -> Result<Draft> {
        let mut rng = self.rng(10);
        let gamma = build_gamma(1, 2)?;
        let lift = Lift::identity(&gamma);
        let setups = [
            (
                TelescopeKind::Average,
                TelescopeSetup {
                    body: ConvexBody::interval(),
                    shape: OrbitShape::new(0, 1, false),
                    lift: lift.clone(),
                    kernel: None,
                },
            ),
            (
                TelescopeKind::Singular,
                TelescopeSetup {
                    body: ConvexBody::interval(),
                    shape: OrbitShape::new(0, 1, true),
                    lift,
                    kernel: Some(CZKernel::builtin(1)),
                },
            ),
        ];
        let mut d = Draft::new("max pointwise identity error", 0.0, 1e-12);
        for (kind, setup) in &setups {
            let mut worst_ratio: f64 = 0.0;
            for _ in 0..50 {
                let n1 = rng.gen_range(2..=60u64);
                let n2 = rng.gen_range(n1 + 1..=n1 + 120);
                let table = telescoping_table(*kind, n1, n2, setup, &self.primes)?;
                let i = rng.gen_range(0..table.points.len());
                d.value = d.value.max((table.direct[i] - table.closed_form[i]).abs());
                d.value = d.value.max(table.identity_error());
                let rep = telescoping_l1(*kind, n1, n2, setup, &self.primes, 1.0)?;
                worst_ratio = worst_ratio.max(rep.ratio);
            }
            let (label, frozen_c) = match kind {
                TelescopeKind::Average => ("average", frozen::TELESCOPE_C_AVERAGE),
                TelescopeKind::Singular => ("singular", frozen::TELESCOPE_C_SINGULAR),
            };
            let c = if self.opts.refit { freeze_up(worst_ratio) } else { frozen_c };
            d.fit(&format!("C_{label}"), worst_ratio);
            d.cond(format!("{label} ℓ1 bound"), worst_ratio <= c, format!("max ratio {worst_ratio:.4} vs C = {c}"));
        }
        Ok(d)
    }

    fn fourier_consistency(&self) -> Result<Draft> {
        let mut rng = self.rng(11);
        let gamma = build_gamma(1, 2)?;
        let lift = Lift::identity(&gamma);
        let orbit = enumerate_orbit(&ConvexBody::interval(), 256, OrbitShape::new(0, 1, false), &gamma, &self.primes, DEFAULT_ORBIT_CAP)?;
        let xis: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let m = m_hat(&xis, &orbit)?;
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let f = SparseFunction::random(2, 16, 50, rng.gen());
            let g = apply_average(&f, &orbit, &lift, true)?;
            for (xi, mv) in xis.iter().zip(&m) {
                worst = worst.max((g.fourier(xi) - mv * f.fourier(xi)).norm());
            }
        }
        Ok(Draft::new("max |(M_N f)^ - m_N f^|", worst, 1e-10))
    }

    fn vdc_envelopes(&self) -> Result<Draft> {
        let mut rng = self.rng(12);
        let spec = QuadratureSpec::default();
        let mut worst_closed: f64 = 0.0;
        let g1 = build_gamma(1, 1)?;
        for _ in 0..200 {
            let xi: f64 = rng.gen_range(-0.5..0.5);
            let n = rng.gen_range(1.0..64.0);
            let q = phi_integral(&[xi], &ConvexBody::interval(), &g1, n, PhiDomain::Full, &spec)?;
            worst_closed = worst_closed.max((q.value - phi_interval_closed_form(xi, n)).norm());
        }
        let mut d = Draft::new("k=1 |quadrature - closed form|", worst_closed, 1e-10);
        let cases = [
            ("k=1", ConvexBody::interval(), build_gamma(1, 2)?, 8.0),
            ("k=2", ConvexBody::cube(2), build_gamma(2, 1)?, 4.0),
        ];
        for (label, body, gamma, n) in cases {
            let xis: Vec<Vec<f64>> = (0..10_000)
                .map(|_| (0..gamma.len()).map(|_| rng.gen_range(-0.5..0.5)).collect())
                .collect();
            let c_frozen = if self.opts.refit { 10.0 } else { frozen::ENVELOPE_C };
            let rep = envelope_check(&xis, n, &body, &gamma, None, &spec, c_frozen)?;
            d.fit(&format!("C_{label}"), rep.c_fit);
            d.cond(format!("{label} fitted C <= 10"), rep.c_fit <= 10.0, format!("C = {:.4}", rep.c_fit));
            d.cond(
                format!("{label} no violations"),
                rep.violations == 0,
                format!("{} of {} points above C = {c_frozen}", rep.violations, rep.points),
            );
        }
        if self.opts.refit {
            let c = d.fitted.values().copied().fold(0.0, f64::max);
            d.fit("frozen_C", freeze_up(c));
        }
        Ok(d)
    }

    fn weighted_unweighted(&self) -> Result<Draft> {
        let gamma = build_gamma(1, 2)?;
        let lift = Lift::identity(&gamma);
        let scales: Vec<u64> = (6..=13).map(|e| 1u64 << e).collect();
        let fs = [
            ("delta", SparseFunction::delta(vec![0, 0])),
            ("random-1", SparseFunction::random(2, 24, 100, self.opts.seed ^ 13)),
            ("random-2", SparseFunction::random(2, 24, 1000, self.opts.seed ^ 31)),
        ];
        let mut fitted: f64 = 0.0;
        let mut reps = Vec::new();
        for (label, f) in &fs {
            let rep = compare_weighted_unweighted(f, &lift, &ConvexBody::interval(), OrbitShape::new(0, 1, false), &scales, &self.primes, 1.0)?;
            fitted = fitted.max(rep.c_fit);
            reps.push((label, rep));
        }
        let c = if self.opts.refit { freeze_up(fitted) } else { frozen::COMPARISON_C };
        let mut d = Draft::new("max ‖M_N f - A_N f‖_1 ln N / (‖f‖_1 C)", fitted / c, 1.0);
        d.fit("C", fitted);
        d.fit("frozen_C", c);
        for (label, rep) in reps {
            d.cond(format!("{label} covered"), rep.rows.iter().all(|r| !r.skipped), format!("C_fit = {:.4}", rep.c_fit));
        }
        Ok(d)
    }

    fn iw_construction(&self) -> Result<Draft> {
        let mut failures = 0usize;
        let mut d = Draft::new("failed sub-checks", 0.0, 0.5);
        let p1 = build_pn(1, 1)?.materialize(DEFAULT_SET_CAP)?;
        let p2 = build_pn(2, 1)?.materialize(DEFAULT_SET_CAP)?;
        let want2: Vec<u128> = (0..=21).map(|e| 1u128 << e).collect();
        let ok = p1 == vec![1] && p2 == want2;
        failures += !ok as usize;
        d.cond("P_1 and P_2", ok, format!("|P_1| = {}, |P_2| = {}", p1.len(), p2.len()));
        let mut missing = Vec::new();
        for beta in 1..=4u32 {
            let mut n = 1u64;
            while (n as f64).powi(beta as i32) <= 1e4 {
                if let Some(q) = lower_inclusion(&build_pn(n, beta)?) {
                    missing.push((n, beta, q));
                }
                n += 1;
            }
        }
        failures += !missing.is_empty() as usize;
        d.cond("lower inclusion", missing.is_empty(), format!("missing {missing:?}"));
        let mut bad = Vec::new();
        for beta in 1..=2u32 {
            let params = IWParams::new(beta, DEFAULT_CHI, 0.5, &build_gamma(1, 1)?)?;
            for s in 0..=3u64 {
                for m in s + 1..=10 {
                    let rep = disjointness_check(s, m, &params, DEFAULT_SET_CAP)?;
                    if !rep.disjoint {
                        bad.push(format!("(s={s}, m={m}, β={beta}: {:?} {:?})", rep.method, rep.witness.map(|(a, b)| (a.a, a.q, b.a, b.q))));
                    }
                }
            }
        }
        failures += !bad.is_empty() as usize;
        d.cond(
            "disjointness",
            bad.is_empty(),
            if bad.is_empty() { "all disjoint".to_string() } else { format!("{} overlapping cases, first {}", bad.len(), bad[0]) },
        );
        d.value = failures as f64;
        Ok(d)
    }

    fn minor_arc_decay(&self) -> Result<Draft> {
        let gamma = build_gamma(1, 2)?;
        let body = ConvexBody::interval();
        let shape = OrbitShape::new(0, 1, false);
        let (lo, hi) = (1u64 << 10, 1u64 << 13);
        // (ln N)^2 <= q <= N^2 / (ln N)^2 for every N in the range
        let q_min = (hi as f64).ln().powi(2).ceil() as u64;
        let q_max = ((lo as f64).powi(2) / (lo as f64).ln().powi(2)).floor() as u64;
        let freqs = minor_arc_frequencies(10, gamma.len(), q_min, q_max, self.opts.seed);
        let mut increases = 0usize;
        let mut rows = Vec::new();
        for (xi, q) in &freqs {
            let v: Vec<f64> = [lo, hi]
                .iter()
                .map(|&n| prime_weyl_sum(xi, shape, &gamma, &body, n, &self.primes).map(|s| s.norm() / n as f64))
                .collect::<rvl_core::Result<_>>()?;
            if v[1] >= v[0] {
                increases += 1;
            }
            rows.push(format!("q={q}: {:.4}->{:.4}", v[0], v[1]));
        }
        let mut d = Draft::new("frequencies without decay", increases as f64, 1.5);
        d.cond("at least 9 of 10 decrease", increases <= 1, rows.join("; "));
        d.fit("q_min", q_min as f64);
        d.fit("q_max", q_max as f64);
        Ok(d)
    }

    pub fn run_all(&self, filter: Option<&str>) -> Result<Vec<CheckRecord>> {
        match filter {
            Some(name) if name != "all" => Ok(vec![self.run(name)?]),
            _ => CHECKS.iter().map(|c| self.run(c.0)).collect(),
        }
    }
}

/// Machine-readable outcome of an acceptance run.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub seed: u64,
    pub refit: bool,
    pub tolerance: Option<f64>,
    pub checks: Vec<CheckRecord>,
    pub environment: crate::experiments::Environment,
}

impl Verdict {
    pub fn new(opts: &Options, checks: Vec<CheckRecord>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            seed: opts.seed,
            refit: opts.refit,
            tolerance: opts.tolerance,
            checks,
            environment: crate::experiments::Environment::current(),
        }
    }
}

/// `max_q M(q) q^δ`.
pub fn envelope_constant(maxima: &[(u64, f64)], delta: f64) -> f64 {
    maxima
        .iter()
        .map(|&(q, m)| m * (q as f64).powf(delta))
        .fold(0.0, f64::max)
}

/// Upper-envelope fit of `M(q) <= C q^{-δ}`: among lines lying above every
/// point in log–log coordinates, the one with the least mean gap.
pub fn envelope_fit(maxima: &[(u64, f64)]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = maxima
        .iter()
        .filter(|&&(_, m)| m > ZERO_FLOOR)
        .map(|&(q, m)| ((q as f64).ln(), m.ln()))
        .collect();
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    // the objective c(δ) - δ x̄ is convex; minimize on its breakpoints
    let objective = |delta: f64| {
        let c = pts.iter().map(|&(x, y)| y + delta * x).fold(f64::NEG_INFINITY, f64::max);
        c - delta * mean_x
    };
    let mut candidates = vec![0.0];
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            if (a.0 - b.0).abs() > 1e-12 {
                let delta = -(a.1 - b.1) / (a.0 - b.0);
                if delta >= 0.0 {
                    candidates.push(delta);
                }
            }
        }
    }
    let delta = candidates
        .into_iter()
        .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
        .unwrap_or(0.0);
    (delta, envelope_constant(maxima, delta))
}
