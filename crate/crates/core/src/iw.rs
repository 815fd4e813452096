//! Ionescu–Wainger rational sets, the plateau bump `η` and the partition
//! multipliers built from them.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::MultiIndexSet;
use crate::numeric::torus_signed;
use crate::numtheory::{factorize, sieve_primes};
use crate::variation::{factorial_factorization, ScaleLadder};

pub const DEFAULT_SET_CAP: u128 = 1_000_000;
pub const DEFAULT_CHI: f64 = 0.05;

/// Parameters shared by the sets and multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IWParams {
    pub beta: u32,
    pub chi: f64,
    pub rho: f64,
    /// `|γ|` for each frequency coordinate; `d` is its length.
    pub orders: Vec<u32>,
}

impl IWParams {
    pub fn new(beta: u32, chi: f64, rho: f64, gamma: &MultiIndexSet) -> Result<Self> {
        if beta == 0 {
            return Err(Error::Domain("β must be a positive integer".into()));
        }
        if !(chi > 0.0) {
            return Err(Error::Domain(format!("χ = {chi} must be positive")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("ρ = {rho} outside (0, 1)")));
        }
        Ok(Self {
            beta,
            chi,
            rho,
            orders: gamma.orders().to_vec(),
        })
    }

    pub fn d(&self) -> usize {
        self.orders.len()
    }

    /// `D = 20β + 1`.
    pub fn big_d(&self) -> u32 {
        20 * self.beta + 1
    }

    /// `N_n = ⌊2^{n^ρ}⌋`.
    pub fn scale(&self, n: u64) -> u64 {
        ScaleLadder::raw_scale(self.rho, n)
    }

    /// Level of `U` used by `Ξ_n`: `⌊n^ρ⌋`.
    pub fn level(&self, n: u64) -> u64 {
        (n as f64).powf(self.rho).floor() as u64
    }

    /// Support radius of `η_n(· - a/q)` along a coordinate of order `o`:
    /// `(16d)^{-1} 2^{χ √(log₂ N_n)} N_n^{-o}`.
    pub fn support_radius(&self, n: u64, order: u32) -> f64 {
        let nn = self.scale(n) as f64;
        let d = self.d() as f64;
        2f64.powf(self.chi * nn.log2().sqrt()) / (16.0 * d) * nn.powi(-(order as i32))
    }
}

/// The denominators `P_n = {Q·w : Q | Q_0, w ∈ Π ∪ {1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenominatorSet {
    pub n: u64,
    pub beta: u32,
    /// `⌊n^{1/20}⌋`.
    pub n0: u64,
    pub big_d: u32,
    /// `Q_0 = (n_0!)^D` as `[(p, e)]`.
    pub q0: Vec<(u64, u64)>,
    /// Primes in `(n_0, n^β]`.
    pub large_primes: Vec<u64>,
}

fn binomial(m: u128, k: u128) -> u128 {
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(m - i) / (i + 1);
    }
    r
}

/// Integer `⌊x^{1/k}⌋`.
fn iroot(x: u64, k: u32) -> u64 {
    let mut r = (x as f64).powf(1.0 / k as f64).round() as u64;
    while r > 0 && (r as u128).pow(k) > x as u128 {
        r -= 1;
    }
    while ((r + 1) as u128).pow(k) <= x as u128 {
        r += 1;
    }
    r
}

impl DenominatorSet {
    pub fn level_zero(beta: u32) -> Self {
        Self {
            n: 0,
            beta,
            n0: 0,
            big_d: 20 * beta + 1,
            q0: Vec::new(),
            large_primes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `log Q_0 + D Σ_{top D large primes} log p`, the logarithm of `max P_n`.
    pub fn log_max(&self) -> f64 {
        if self.is_empty() {
            return f64::NEG_INFINITY;
        }
        let q0: f64 = self.q0.iter().map(|&(p, e)| e as f64 * (p as f64).ln()).sum();
        let top: f64 = self
            .large_primes
            .iter()
            .rev()
            .take(self.big_d as usize)
            .map(|&p| self.big_d as f64 * (p as f64).ln())
            .sum();
        q0 + top
    }

    /// `|P_n| = τ(Q_0) Σ_{j <= min(D, m)} C(m, j) D^j`, saturating.
    pub fn cardinality(&self) -> u128 {
        if self.is_empty() {
            return 0;
        }
        let tau: u128 = self
            .q0
            .iter()
            .fold(1u128, |acc, &(_, e)| acc.saturating_mul(e as u128 + 1));
        let m = self.large_primes.len() as u128;
        let dd = self.big_d as u128;
        let mut total: u128 = 0;
        for j in 0..=m.min(dd) {
            let term = binomial(m, j).saturating_mul(dd.saturating_pow(j as u32));
            total = total.saturating_add(term);
        }
        tau.saturating_mul(total)
    }

    pub fn contains(&self, q: u64) -> bool {
        if self.is_empty() || q == 0 {
            return false;
        }
        let mut large = 0u32;
        for (p, e) in factorize(q) {
            if p <= self.n0 {
                let cap = self.q0.iter().find(|&&(pp, _)| pp == p).map(|&(_, c)| c).unwrap_or(0);
                if e as u64 > cap {
                    return false;
                }
            } else {
                if self.large_primes.binary_search(&p).is_err() || e > self.big_d {
                    return false;
                }
                large += 1;
            }
        }
        large <= self.big_d
    }

    /// All elements in increasing order, when `|P_n| <= cap` and every element
    /// fits in `u128`.
    pub fn materialize(&self, cap: u128) -> Result<Vec<u128>> {
        let card = self.cardinality();
        if card > cap {
            return Err(Error::Size {
                what: format!("P_{} at β = {}", self.n, self.beta),
                count: card,
                cap,
            });
        }
        if self.log_max() > 127.0 * std::f64::consts::LN_2 {
            return Err(Error::Overflow(format!(
                "max P_{} = e^{:.1} does not fit in 128 bits",
                self.n,
                self.log_max()
            )));
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        let mut divisors: Vec<u128> = vec![1];
        for &(p, e) in &self.q0 {
            let mut next = Vec::with_capacity(divisors.len() * (e as usize + 1));
            for &v in &divisors {
                let mut pk = v;
                next.push(pk);
                for _ in 0..e {
                    pk *= p as u128;
                    next.push(pk);
                }
            }
            divisors = next;
        }
        // w over products of at most D distinct large primes with exponents in 1..=D
        let mut ws: Vec<(u128, u32, usize)> = vec![(1, 0, 0)];
        let mut out_w = vec![1u128];
        while let Some((w, used, start)) = ws.pop() {
            if used == self.big_d {
                continue;
            }
            for (i, &p) in self.large_primes.iter().enumerate().skip(start) {
                let mut pk = 1u128;
                for _ in 0..self.big_d {
                    pk *= p as u128;
                    let v = w * pk;
                    out_w.push(v);
                    ws.push((v, used + 1, i + 1));
                }
            }
        }
        let mut all: Vec<u128> = divisors
            .iter()
            .flat_map(|&q| out_w.iter().map(move |&w| q * w))
            .collect();
        all.sort_unstable();
        all.dedup();
        Ok(all)
    }
}

/// `P_n` for level `n >= 1`; level 0 gives the empty set.
pub fn build_pn(n: u64, beta: u32) -> Result<DenominatorSet> {
    if beta == 0 {
        return Err(Error::Domain("β must be a positive integer".into()));
    }
    if n == 0 {
        return Ok(DenominatorSet::level_zero(beta));
    }
    let big_d = 20 * beta + 1;
    let n0 = iroot(n, 20);
    let q0 = factorial_factorization(n0)
        .into_iter()
        .map(|(p, e)| (p, e * big_d as u64))
        .collect();
    let upper = (n as u128).checked_pow(beta).filter(|&v| v <= 1 << 32).ok_or_else(|| Error::Size {
        what: format!("prime range (n0, n^β] for n = {n}, β = {beta}"),
        count: (n as f64).powi(beta as i32) as u128,
        cap: 1 << 32,
    })? as u64;
    let large_primes = if upper >= 2 {
        sieve_primes(upper)?
            .primes()
            .iter()
            .copied()
            .filter(|&p| p > n0)
            .collect()
    } else {
        Vec::new()
    };
    Ok(DenominatorSet {
        n,
        beta,
        n0,
        big_d,
        q0,
        large_primes,
    })
}

/// `N_{n^β} ⊆ P_n`, checked element by element. Returns the first missing `q`.
pub fn lower_inclusion(set: &DenominatorSet) -> Option<u64> {
    let top = (set.n as f64).powi(set.beta as i32).floor() as u64;
    (1..=top).find(|&q| !set.contains(q))
}

/// Smallest `n` in `levels` with `max P_n <= e^{n^{1/10}}`.
pub fn upper_inclusion_threshold(beta: u32, levels: impl IntoIterator<Item = u64>) -> Result<Option<u64>> {
    for n in levels {
        let s = build_pn(n, beta)?;
        if s.log_max() <= (n as f64).powf(0.1) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

fn smooth_step(s: f64) -> f64 {
    // exp(-1/s) / (exp(-1/s) + exp(-1/(1-s))) on (0, 1)
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// `η(x)`: `1` for `‖x‖_∞ <= 1/(32d)`, `0` for `‖x‖_∞ >= 1/(16d)`, smooth between.
pub fn eta(x: &[f64]) -> f64 {
    let d = x.len().max(1) as f64;
    let t = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (lo, hi) = (1.0 / (32.0 * d), 1.0 / (16.0 * d));
    if t <= lo {
        1.0
    } else if t >= hi {
        0.0
    } else {
        smooth_step((hi - t) / (hi - lo))
    }
}

/// `η_n(ξ) = η(2^{-χ √(log₂ N_n)} N_n^A ξ)` with each coordinate of `ξ` read on the torus.
pub fn eta_n(xi: &[f64], n: u64, params: &IWParams) -> f64 {
    let nn = params.scale(n) as f64;
    let damp = 2f64.powf(-params.chi * nn.log2().sqrt());
    let y: Vec<f64> = xi
        .iter()
        .zip(&params.orders)
        .map(|(&v, &o)| damp * nn.powi(o as i32) * torus_signed(v))
        .collect();
    eta(&y)
}

/// `ε_n = exp(-n^{1/5}) · factor` with `factor <= 1`.
pub fn epsilon_n(n: u64, factor: f64) -> f64 {
    (-(n as f64).powf(0.2)).exp() * factor.min(1.0)
}

/// Numerators `a_j` with `|ξ_j - a_j/q|` (on the torus) below `radius_j`,
/// taken in `1..=q`.
fn nearby_numerators(xi: f64, q: u128, radius: f64) -> Vec<u128> {
    let qf = q as f64;
    let reach = (radius * qf).ceil() as i128 + 1;
    if 2 * reach + 1 >= q as i128 {
        return (1..=q).collect();
    }
    let centre = (xi.rem_euclid(1.0) * qf).round() as i128;
    let mut out: Vec<u128> = (centre - reach..=centre + reach)
        .map(|a| {
            let r = a.rem_euclid(q as i128) as u128;
            if r == 0 {
                q
            } else {
                r
            }
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// `Σ_{a/q} η_n(ξ - a/q)` over fractions whose denominator lies in `qs` and
/// is accepted by `keep_q`, streaming numerators near `ξ` per denominator.
fn bump_sum(
    xi: &[f64],
    n: u64,
    params: &IWParams,
    qs: &[u128],
    keep_q: &dyn Fn(u128) -> bool,
    cap: u128,
) -> Result<f64> {
    let radii: Vec<f64> = params.orders.iter().map(|&o| params.support_radius(n, o)).collect();
    let kept: Vec<u128> = qs.iter().copied().filter(|&q| keep_q(q)).collect();
    let work = kept.iter().fold(0u128, |acc, &q| {
        let per_q = radii.iter().fold(1u128, |w, &r| {
            let reach = (r * q as f64).ceil().min(1e30) as u128 + 1;
            w.saturating_mul((2 * reach + 1).min(q))
        });
        acc.saturating_add(per_q)
    });
    if work > cap {
        return Err(Error::Size {
            what: format!("numerators near ξ at level n = {n}"),
            count: work,
            cap,
        });
    }
    let mut total = 0.0;
    for q in kept {
        let cands: Vec<Vec<u128>> = xi
            .iter()
            .zip(&radii)
            .map(|(&x, &r)| nearby_numerators(x, q, r))
            .collect();
        let d = xi.len();
        let mut idx = vec![0usize; d];
        loop {
            let a: Vec<u128> = (0..d).map(|j| cands[j][idx[j]]).collect();
            let g = a.iter().fold(q, |g, &v| g.gcd(&v));
            if g == 1 {
                let diff: Vec<f64> = xi
                    .iter()
                    .zip(&a)
                    .map(|(&x, &aj)| x - aj as f64 / q as f64)
                    .collect();
                total += eta_n(&diff, n, params);
            }
            let mut j = d;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < cands[j].len() {
                    break;
                }
                idx[j] = 0;
                if j == 0 {
                    j = usize::MAX;
                    break;
                }
            }
            if j == usize::MAX {
                break;
            }
        }
    }
    Ok(total)
}

/// `Ξ_n(ξ)` over `U_{⌊n^ρ⌋}`, or `Ξ_{n,s}(ξ)` over `R_s = U_{⌊(s+1)^ρ⌋} \ U_{⌊s^ρ⌋}`.
pub fn xi_partition(xi: &[f64], n: u64, s: Option<u64>, params: &IWParams, cap: u128) -> Result<f64> {
    if xi.len() != params.d() {
        return Err(Error::Domain(format!("ξ has {} components, d = {}", xi.len(), params.d())));
    }
    match s {
        None => {
            let set = build_pn(params.level(n), params.beta)?;
            let qs = set.materialize(cap)?;
            bump_sum(xi, n, params, &qs, &|_| true, cap)
        }
        Some(s) => {
            if s >= n {
                return Err(Error::Domain(format!("need s < n, got s = {s}, n = {n}")));
            }
            let (lo, hi) = residual_levels(s, params);
            let upper = build_pn(hi, params.beta)?;
            let lower = build_pn(lo, params.beta)?;
            let qs = upper.materialize(cap)?;
            bump_sum(
                xi,
                n,
                params,
                &qs,
                &|q| u64::try_from(q).map(|q| !lower.contains(q)).unwrap_or(true),
                cap,
            )
        }
    }
}

/// `(⌊s^ρ⌋, ⌊(s+1)^ρ⌋)`.
pub fn residual_levels(s: u64, params: &IWParams) -> (u64, u64) {
    (params.level(s), params.level(s + 1))
}

/// A fraction `a/q` on `T^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub a: Vec<u128>,
    pub q: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisjointnessMethod {
    EmptySet,
    Singleton,
    ClosedForm,
    Exhaustive,
    Witness,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub s: u64,
    pub m: u64,
    pub levels: (u64, u64),
    pub disjoint: bool,
    pub method: DisjointnessMethod,
    pub witness: Option<(Fraction, Fraction)>,
    /// Support radius along the lowest-order coordinate.
    pub radius: f64,
    /// `ln max q` over denominators of `R_s`.
    pub log_q_max: f64,
    pub denominators: usize,
}

/// Whether the open supports of `η_m(· - a/q)` and `η_m(· - a'/q')` meet.
fn supports_overlap(f: &Fraction, g: &Fraction, radii: &[f64]) -> bool {
    f.a.iter().zip(&g.a).zip(radii).all(|((&a, &b), &r)| {
        let dist = match (f.q.checked_mul(g.q), a.checked_mul(g.q), b.checked_mul(f.q)) {
            (Some(qq), Some(x), Some(y)) => {
                let x = (x % qq + qq - y % qq) % qq;
                x.min(qq - x) as f64 / qq as f64
            }
            _ => torus_signed(a as f64 / f.q as f64 - b as f64 / g.q as f64).abs(),
        };
        dist < 2.0 * r
    })
}

const EXHAUSTIVE_CAP: u128 = 20_000;

/// Decides whether the supports of `η_m(· - a/q)` are pairwise disjoint as
/// `a/q` runs over `R_s`, returning a violating pair when they are not.
pub fn disjointness_check(s: u64, m: u64, params: &IWParams, cap: u128) -> Result<DisjointnessReport> {
    if m <= s {
        return Err(Error::Domain(format!("need m > s, got s = {s}, m = {m}")));
    }
    let (lo, hi) = residual_levels(s, params);
    let upper = build_pn(hi, params.beta)?;
    let lower = build_pn(lo, params.beta)?;
    let qs: Vec<u128> = upper
        .materialize(cap)?
        .into_iter()
        .filter(|&q| u64::try_from(q).map(|q| !lower.contains(q)).unwrap_or(true))
        .collect();
    let radii: Vec<f64> = params.orders.iter().map(|&o| params.support_radius(m, o)).collect();
    let lead = (0..params.d()).min_by_key(|&j| params.orders[j]).unwrap_or(0);
    let radius = radii[lead];
    let log_q_max = qs.last().map(|&q| (q as f64).ln()).unwrap_or(f64::NEG_INFINITY);
    let mut rep = DisjointnessReport {
        s,
        m,
        levels: (lo, hi),
        disjoint: true,
        method: DisjointnessMethod::EmptySet,
        witness: None,
        radius,
        log_q_max,
        denominators: qs.len(),
    };
    let d = params.d();
    let fraction_count: u128 = qs
        .iter()
        .map(|&q| units_vector_count(q, d))
        .fold(0u128, |a, b| a.saturating_add(b));
    if fraction_count == 0 {
        return Ok(rep);
    }
    if fraction_count == 1 {
        rep.method = DisjointnessMethod::Singleton;
        return Ok(rep);
    }
    // distinct reduced fractions differ by at least 1/(q q') in some coordinate
    if -2.0 * log_q_max > (2.0 * radii.iter().copied().fold(0.0, f64::max)).ln() {
        rep.method = DisjointnessMethod::ClosedForm;
        return Ok(rep);
    }
    if let Some(w) = find_witness(&qs, d, lead, &radii) {
        rep.disjoint = false;
        rep.method = DisjointnessMethod::Witness;
        rep.witness = Some(w);
        return Ok(rep);
    }
    if fraction_count <= EXHAUSTIVE_CAP {
        let all: Vec<Fraction> = qs.iter().flat_map(|&q| units_fractions(q, d)).collect();
        for (i, f) in all.iter().enumerate() {
            for g in &all[i + 1..] {
                if supports_overlap(f, g, &radii) {
                    rep.disjoint = false;
                    rep.method = DisjointnessMethod::Witness;
                    rep.witness = Some((f.clone(), g.clone()));
                    return Ok(rep);
                }
            }
        }
        rep.method = DisjointnessMethod::Exhaustive;
        return Ok(rep);
    }
    rep.disjoint = false;
    rep.method = DisjointnessMethod::Undecided;
    Ok(rep)
}

fn units_vector_count(q: u128, d: usize) -> u128 {
    // #{a ∈ [1, q]^d : gcd(q, a) = 1} = q^d ∏_{p | q} (1 - p^{-d})
    let Ok(q64) = u64::try_from(q) else {
        return u128::MAX;
    };
    let mut count = q.saturating_pow(d as u32);
    for (p, _) in factorize(q64) {
        let pd = (p as u128).saturating_pow(d as u32);
        count = count / pd * (pd - 1);
    }
    count
}

fn units_fractions(q: u128, d: usize) -> Vec<Fraction> {
    let total = q.pow(d as u32);
    (0..total)
        .filter_map(|mut idx| {
            let mut a = vec![0u128; d];
            for v in a.iter_mut().rev() {
                *v = idx % q + 1;
                idx /= q;
            }
            (a.iter().fold(q, |g, &v| g.gcd(&v)) == 1).then_some(Fraction { a, q })
        })
        .collect()
}

/// Tries pairs built from the largest denominators: `(1,…,1)/q` against the
/// same vector with `2` (or the next unit when `d = 1`) on the lowest-order coordinate, and `(1,…,1)/q`
/// against `(1,…,1)/q'`.
fn find_witness(qs: &[u128], d: usize, lead: usize, radii: &[f64]) -> Option<(Fraction, Fraction)> {
    let ones = |q: u128| Fraction { a: vec![1; d], q };
    for &q in qs.iter().rev().take(64) {
        if q >= 2 {
            let mut b = ones(q);
            b.a[lead] = if d == 1 { (2..=q).find(|v| v.gcd(&q) == 1).unwrap_or(q) } else { 2 % q };
            if b.a[lead] == 0 {
                b.a[lead] = q;
            }
            let f = ones(q);
            if f != b && supports_overlap(&f, &b, radii) {
                return Some((f, b));
            }
        }
    }
    let top: Vec<u128> = qs.iter().rev().take(64).copied().collect();
    for (i, &q) in top.iter().enumerate() {
        for &q2 in &top[i + 1..] {
            let (f, g) = (ones(q), ones(q2));
            if supports_overlap(&f, &g, radii) {
                return Some((f, g));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_gamma;

    fn params(beta: u32, chi: f64) -> IWParams {
        IWParams::new(beta, chi, 0.5, &build_gamma(1, 1).unwrap()).unwrap()
    }

    #[test]
    fn small_sets() {
        assert_eq!(build_pn(1, 3).unwrap().materialize(100).unwrap(), vec![1]);
        let p2: Vec<u128> = (0..=21).map(|e| 1u128 << e).collect();
        let s = build_pn(2, 1).unwrap();
        assert_eq!(s.materialize(100).unwrap(), p2);
        assert_eq!(s.cardinality(), 22);
        assert!(s.contains(1) && s.contains(2) && s.contains(1 << 21));
        assert!(!s.contains(3) && !s.contains(1 << 22));
        assert_eq!(lower_inclusion(&s), None);
    }

    #[test]
    fn cardinality_matches_materialization() {
        for (n, beta) in [(3, 1), (5, 1), (2, 2), (4, 1)] {
            let s = build_pn(n, beta).unwrap();
            assert_eq!(s.materialize(1 << 20).unwrap().len() as u128, s.cardinality(), "n = {n}");
        }
        let s = build_pn(100, 1).unwrap();
        assert!(matches!(s.materialize(1000), Err(Error::Size { .. })));
        assert!(matches!(build_pn(7, 1).unwrap().materialize(1 << 20), Err(Error::Overflow(_))));
    }

    #[test]
    fn n0_and_q0() {
        let s = build_pn(1 << 20, 1).unwrap();
        assert_eq!(s.n0, 2);
        assert_eq!(s.q0, vec![(2, 21)]);
        assert!(!s.large_primes.contains(&2));
        assert_eq!(build_pn((1 << 20) - 1, 1).unwrap().n0, 1);
        assert_eq!(iroot((1 << 20) - 1, 20), 1);
        assert_eq!(iroot(1 << 20, 20), 2);
    }

    #[test]
    fn eta_thresholds() {
        for d in 1..4 {
            let at = |t: f64| {
                let mut x = vec![0.0; d];
                x[0] = t;
                eta(&x)
            };
            let d = d as f64;
            assert_eq!(at(1.0 / (64.0 * d)), 1.0);
            assert_eq!(at(1.0 / (32.0 * d)), 1.0);
            assert_eq!(at(1.0 / (16.0 * d)), 0.0);
            assert_eq!(at(1.0 / (8.0 * d)), 0.0);
            let mid = at(1.5 / (32.0 * d));
            assert!(mid > 0.0 && mid < 1.0);
        }
        assert_eq!(eta_n(&[0.0], 5, &params(1, 0.05)), 1.0);
    }

    #[test]
    fn xi_at_origin() {
        let p = params(1, 0.05);
        assert_eq!(xi_partition(&[0.0], 1, None, &p, 1000).unwrap(), 1.0);
        assert_eq!(xi_partition(&[0.37], 1, None, &p, 1000).unwrap(), 0.0);
        assert!(xi_partition(&[0.0], 3, Some(3), &p, 1000).is_err());
    }

    #[test]
    fn disjointness_small_levels() {
        let p = params(1, 0.05);
        let r = disjointness_check(0, 1, &p, DEFAULT_SET_CAP).unwrap();
        assert!(r.disjoint);
        assert_eq!(r.method, DisjointnessMethod::Singleton);
        let r = disjointness_check(1, 5, &p, DEFAULT_SET_CAP).unwrap();
        assert!(r.disjoint);
        assert_eq!(r.method, DisjointnessMethod::EmptySet);
    }

    #[test]
    fn level_three_produces_witness() {
        let p = params(1, 0.05);
        let r = disjointness_check(3, 4, &p, DEFAULT_SET_CAP).unwrap();
        assert_eq!(r.levels, (1, 2));
        assert!(!r.disjoint, "{r:?}");
        let (f, g) = r.witness.unwrap();
        let radii = [p.support_radius(4, 1)];
        assert!(supports_overlap(&f, &g, &radii));
    }

    #[test]
    fn overlap_is_symmetric_and_exact() {
        let f = Fraction { a: vec![1], q: 4 };
        let g = Fraction { a: vec![1], q: 3 };
        assert!(supports_overlap(&f, &g, &[1.0 / 24.0 + 1e-9]));
        assert!(!supports_overlap(&f, &g, &[1.0 / 24.0]));
        assert!(supports_overlap(&g, &f, &[1.0 / 24.0 + 1e-9]));
    }

    #[test]
    fn unit_vector_counts() {
        for q in 1..30u128 {
            for d in 1..3 {
                assert_eq!(units_vector_count(q, d), units_fractions(q, d).len() as u128);
            }
        }
    }
}
