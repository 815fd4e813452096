//! Prime sieving and the multiplicative arithmetic the rest of the crate leans on.

use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, pairwise_sum_complex, torus, RootsOfUnity};

/// Largest modulus for which unit-group enumeration is attempted.
pub const UNIT_GROUP_CAP: u64 = 1_000_000;

/// Complete table of primes up to `limit` with natural-log weights.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    logs: Vec<f64>,
}

impl PrimeTable {
    /// Builds a table from an already sorted, complete prime list (cache reload).
    pub fn from_sorted(limit: u64, primes: Vec<u64>) -> Result<Self> {
        if limit < 2 {
            return Err(Error::EmptyDomain(format!("sieve limit {limit} < 2")));
        }
        if primes.windows(2).any(|w| w[0] >= w[1]) || primes.last().is_some_and(|&p| p > limit) {
            return Err(Error::Validation("prime list is not increasing or exceeds limit".into()));
        }
        let logs = primes.iter().map(|&p| (p as f64).ln()).collect();
        Ok(Self { limit, primes, logs })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn logs(&self) -> &[f64] {
        &self.logs
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Number of primes `<= x`.
    pub fn count_up_to(&self, x: u64) -> usize {
        self.primes.partition_point(|&p| p <= x)
    }

    pub fn primes_up_to(&self, x: u64) -> &[u64] {
        &self.primes[..self.count_up_to(x)]
    }

    pub fn is_prime(&self, n: u64) -> bool {
        self.primes.binary_search(&n).is_ok()
    }

    /// `ln p` for a listed prime.
    pub fn log_weight(&self, p: u64) -> Option<f64> {
        self.primes.binary_search(&p).ok().map(|i| self.logs[i])
    }

    /// The signed view `±P` restricted to `|p| <= x`, ordered `-p_max, …, -2, 2, …, p_max`.
    pub fn signed_up_to(&self, x: u64) -> Vec<i64> {
        let ps = self.primes_up_to(x);
        ps.iter()
            .rev()
            .map(|&p| -(p as i64))
            .chain(ps.iter().map(|&p| p as i64))
            .collect()
    }

    pub fn ensure_covers(&self, x: u64) -> Result<()> {
        if x > self.limit {
            return Err(Error::OutOfRange {
                what: "x",
                requested: x,
                limit: self.limit,
            });
        }
        Ok(())
    }
}

/// Sieve of Eratosthenes over odd numbers.
pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    if limit < 2 {
        return Err(Error::EmptyDomain(format!("sieve limit {limit} < 2")));
    }
    let n = limit as usize;
    // index i stands for 2i + 1
    let half = n / 2 + 1;
    let mut odd_composite = vec![false; half];
    odd_composite[0] = true;
    let mut i = 1;
    while (2 * i + 1) * (2 * i + 1) <= n {
        if !odd_composite[i] {
            let p = 2 * i + 1;
            let mut j = p * p / 2;
            while j < half {
                odd_composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    let mut primes = vec![2u64];
    primes.extend(
        odd_composite
            .iter()
            .enumerate()
            .filter(|&(i, &c)| !c && 2 * i + 1 <= n)
            .map(|(i, _)| (2 * i + 1) as u64),
    );
    PrimeTable::from_sorted(limit, primes)
}

/// Prime factorization by trial division, ascending primes.
pub fn factorize(mut q: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= q {
        if q % p == 0 {
            let mut e = 0;
            while q % p == 0 {
                q /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if q > 1 {
        out.push((q, 1));
    }
    out
}

pub fn totient(q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::Domain("totient(0) is undefined".into()));
    }
    Ok(factorize(q)
        .into_iter()
        .fold(q, |acc, (p, _)| acc / p * (p - 1)))
}

pub fn moebius(q: u64) -> Result<i8> {
    if q == 0 {
        return Err(Error::Domain("moebius(0) is undefined".into()));
    }
    let f = factorize(q);
    if f.iter().any(|&(_, e)| e > 1) {
        Ok(0)
    } else if f.len() % 2 == 0 {
        Ok(1)
    } else {
        Ok(-1)
    }
}

/// The reduced residue system `A_q = {1 <= x <= q : gcd(x, q) = 1}`.
pub fn units(q: u64) -> Result<Vec<u64>> {
    if q == 0 {
        return Err(Error::Domain("A_0 is undefined".into()));
    }
    if q > UNIT_GROUP_CAP {
        return Err(Error::Size {
            what: "unit group A_q".into(),
            count: q as u128,
            cap: UNIT_GROUP_CAP as u128,
        });
    }
    Ok((1..=q).filter(|x| x.gcd(&q) == 1).collect())
}

/// `θ(x; q, r)`: sum of `ln p` over primes `p <= x` with `p ≡ r (mod q)`.
pub fn theta_progression(table: &PrimeTable, x: f64, q: u64, r: u64) -> Result<f64> {
    if !(x >= 2.0) {
        return Err(Error::Domain(format!("theta(x; q, r) requires x >= 2, got {x}")));
    }
    if q == 0 || r == 0 || r > q {
        return Err(Error::Domain(format!("residue r = {r} not in [1, {q}]")));
    }
    let xf = x.floor() as u64;
    table.ensure_covers(xf)?;
    let n = table.count_up_to(xf);
    let r = r % q;
    let terms: Vec<f64> = table.primes()[..n]
        .iter()
        .zip(table.logs())
        .filter(|(&p, _)| p % q == r)
        .map(|(_, &l)| l)
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `θ(x; q, r)` for every residue `r = 0..q` in one pass (index `r mod q`).
pub fn theta_all_residues(table: &PrimeTable, x: f64, q: u64) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::Domain("modulus must be positive".into()));
    }
    let xf = x.max(0.0).floor() as u64;
    table.ensure_covers(xf)?;
    let n = table.count_up_to(xf);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); q as usize];
    for (&p, &l) in table.primes()[..n].iter().zip(table.logs()) {
        buckets[(p % q) as usize].push(l);
    }
    Ok(buckets.iter().map(|b| pairwise_sum(b)).collect())
}

/// Largest relative deviation `max_{r ∈ A_q} |θ(x; q, r) − x/φ(q)| / x`.
pub fn progression_deviation(table: &PrimeTable, x: f64, q: u64) -> Result<f64> {
    let all = theta_all_residues(table, x, q)?;
    let phi = totient(q)? as f64;
    let expected = x / phi;
    Ok(units(q)?
        .into_iter()
        .map(|r| (all[(r % q) as usize] - expected).abs() / x)
        .fold(0.0, f64::max))
}

/// `(1/φ(q)) Σ_{x ∈ A_q} e^{2πi a x / q}` by direct enumeration.
pub fn ramanujan_average(a: i64, q: u64) -> Result<Complex64> {
    let us = units(q)?;
    let roots = RootsOfUnity::new(q);
    let terms: Vec<Complex64> = us
        .iter()
        .map(|&x| roots.get(a as i128 * x as i128))
        .collect();
    Ok(pairwise_sum_complex(&terms) / us.len() as f64)
}

/// Closed form `μ(q/g)/φ(q/g)` with `g = gcd(a, q)`.
pub fn ramanujan_closed_form(a: i64, q: u64) -> Result<f64> {
    if q == 0 {
        return Err(Error::Domain("q must be positive".into()));
    }
    let g = (a.unsigned_abs()).gcd(&q);
    let m = q / g;
    Ok(moebius(m)? as f64 / totient(m)? as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RationalApprox {
    pub a: u64,
    pub q: u64,
    pub target: f64,
    /// Torus distance `‖target − a/q‖`.
    pub err: f64,
}

/// Best continued-fraction convergent `a/q` of `xi` with `q <= big_q`.
///
/// The expansion runs on the exact dyadic value of `xi`, so the convergents are
/// those of the stored double. `0/1` is reported as `1/1`.
pub fn dirichlet_approx(xi: f64, big_q: u64) -> Result<RationalApprox> {
    if big_q == 0 {
        return Err(Error::Domain("Dirichlet bound Q must be >= 1".into()));
    }
    if !xi.is_finite() {
        return Err(Error::Domain(format!("non-finite frequency {xi}")));
    }
    let target = torus(xi);
    let (num, den) = dyadic_fraction(target);
    let cap = big_q as u128;

    let (mut h_prev, mut h) = (1u128, 0u128);
    let (mut k_prev, mut k) = (0u128, 1u128);
    let (mut n, mut d) = (den, num);
    // a_0 = 0 since target < 1, giving the convergent 0/1 already stored.
    while d != 0 {
        let a = n / d;
        let next_k = a.checked_mul(k).and_then(|v| v.checked_add(k_prev));
        let next_h = a.checked_mul(h).and_then(|v| v.checked_add(h_prev));
        match (next_h, next_k) {
            (Some(nh), Some(nk)) if nk <= cap => {
                h_prev = h;
                h = nh;
                k_prev = k;
                k = nk;
            }
            _ => break,
        }
        let rem = n - a * d;
        n = d;
        d = rem;
    }
    let (a, q) = if h == 0 { (1, 1) } else { (h as u64, k as u64) };
    let diff = target - a as f64 / q as f64;
    let err = diff.abs().min(1.0 - diff.abs());
    Ok(RationalApprox { a, q, target, err })
}

/// `x = num/den` exactly for `x ∈ [0, 1)`, with `den` a power of two `<= 2^120`.
fn dyadic_fraction(x: f64) -> (u128, u128) {
    if x == 0.0 {
        return (0, 1);
    }
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let (m, e) = if exp_bits == 0 {
        ((bits & 0x000f_ffff_ffff_ffff) as u128, -1074)
    } else {
        (((bits & 0x000f_ffff_ffff_ffff) | (1 << 52)) as u128, exp_bits - 1075)
    };
    let s = -e;
    if s <= 120 {
        (m, 1u128 << s)
    } else {
        let shift = (s - 120) as u32;
        let m = if shift >= 128 { 0 } else { m >> shift };
        (m, 1u128 << 120)
    }
}
