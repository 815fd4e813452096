//! r-variation and oscillation seminorms, the dyadic variation bound and the
//! long/short split along sub-exponential scales.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BRUTEFORCE_MAX_LEN: usize = 16;
pub const R_MAX: f64 = 64.0;

/// Values indexed by a strictly increasing integer sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedSequence {
    indices: Vec<i64>,
    values: Vec<Complex64>,
}

impl IndexedSequence {
    pub fn new(indices: Vec<i64>, values: Vec<Complex64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} indices for {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!("indices not strictly increasing at {} -> {}", w[0], w[1])));
        }
        Ok(Self { indices, values })
    }

    /// Indexed by `1, 2, …, len`.
    pub fn from_values(values: Vec<Complex64>) -> Self {
        let indices = (1..=values.len() as i64).collect();
        Self { indices, values }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::from_values(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn indices(&self) -> &[i64] {
        &self.indices
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn position(&self, index: i64) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    /// The subsequence on indices in `[lo, hi]`.
    pub fn window(&self, lo: i64, hi: i64) -> Self {
        let a = self.indices.partition_point(|&i| i < lo);
        let b = self.indices.partition_point(|&i| i <= hi);
        Self {
            indices: self.indices[a..b].to_vec(),
            values: self.values[a..b].to_vec(),
        }
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(1.0..=R_MAX).contains(&r) {
        return Err(Error::Domain(format!("r = {r} outside [1, {R_MAX}]")));
    }
    Ok(())
}

fn max_jump(values: &[Complex64]) -> f64 {
    let mut m: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            m = m.max((a - b).norm());
        }
    }
    m
}

/// `V_r` by dynamic programming over increasing chains, `O(n^2)`.
///
/// Jumps are scaled by the largest one before raising to the power `r`.
pub fn vr(values: &[Complex64], r: f64) -> Result<f64> {
    check_r(r)?;
    if values.is_empty() {
        return Err(Error::EmptyDomain("V_r of an empty sequence".into()));
    }
    let scale = max_jump(values);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut best = vec![0.0f64; values.len()];
    for j in 1..values.len() {
        let mut b: f64 = 0.0;
        for i in 0..j {
            b = b.max(best[i] + ((values[j] - values[i]).norm() / scale).powf(r));
        }
        best[j] = b;
    }
    let top = best.iter().copied().fold(0.0, f64::max);
    Ok(scale * top.powf(1.0 / r))
}

pub fn vr_seq(seq: &IndexedSequence, r: f64) -> Result<f64> {
    vr(seq.values(), r)
}

/// `V_r` by exhaustive search over all subsequences.
pub fn vr_bruteforce(values: &[Complex64], r: f64) -> Result<f64> {
    check_r(r)?;
    if values.is_empty() {
        return Err(Error::EmptyDomain("V_r of an empty sequence".into()));
    }
    if values.len() > BRUTEFORCE_MAX_LEN {
        return Err(Error::Size {
            what: "brute-force V_r".into(),
            count: values.len() as u128,
            cap: BRUTEFORCE_MAX_LEN as u128,
        });
    }
    let scale = max_jump(values);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let n = values.len();
    let mut best: f64 = 0.0;
    for mask in 1u32..(1 << n) {
        let mut prev: Option<usize> = None;
        let mut s = 0.0;
        for i in 0..n {
            if mask & (1 << i) != 0 {
                if let Some(p) = prev {
                    s += ((values[i] - values[p]).norm() / scale).powf(r);
                }
                prev = Some(i);
            }
        }
        best = best.max(s);
    }
    Ok(scale * best.powf(1.0 / r))
}

/// Extends a sequence to length `2^s + 1` by repeating its last value.
pub fn pad_by_repetition(values: &[Complex64]) -> Vec<Complex64> {
    let mut out = values.to_vec();
    if let Some(&last) = values.last() {
        let target = (values.len().max(2) - 1).next_power_of_two() + 1;
        out.resize(target, last);
    }
    out
}

/// `(V_r(a), √2 Σ_{i=0}^{s} (Σ_j |a_{(j+1)2^i} - a_{j2^i}|^2)^{1/2})` for a
/// sequence of length `2^s + 1`.
pub fn vr_dyadic_bound(values: &[Complex64], r: f64) -> Result<(f64, f64)> {
    if r < 2.0 {
        return Err(Error::Domain(format!("dyadic bound needs r >= 2, got {r}")));
    }
    let len = values.len();
    if len < 2 || !(len - 1).is_power_of_two() {
        return Err(Error::Validation(format!(
            "length {len} is not 2^s + 1; pad by repetition first"
        )));
    }
    let s = (len - 1).trailing_zeros();
    let mut rhs = 0.0;
    for i in 0..=s {
        let step = 1usize << i;
        let sq: f64 = (0..(len - 1) / step)
            .map(|j| (values[(j + 1) * step] - values[j * step]).norm_sqr())
            .sum();
        rhs += sq.sqrt();
    }
    Ok((vr(values, r)?, std::f64::consts::SQRT_2 * rhs))
}

/// `(Σ_j sup_{N_j <= n <= N_{j+1}} |a_n - a_{N_j}|^2)^{1/2}` over consecutive
/// entries of `lacunary`, which must be indices of `seq`.
pub fn oscillation(seq: &IndexedSequence, lacunary: &[i64]) -> Result<f64> {
    if lacunary.is_empty() {
        return Err(Error::Domain("empty lacunary sequence".into()));
    }
    if lacunary.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("lacunary indices must increase".into()));
    }
    let pos: Vec<usize> = lacunary
        .iter()
        .map(|&i| {
            seq.position(i)
                .ok_or_else(|| Error::Validation(format!("lacunary index {i} is not an index of the sequence")))
        })
        .collect::<Result<_>>()?;
    let v = seq.values();
    let total: f64 = pos
        .windows(2)
        .map(|w| {
            (w[0]..=w[1])
                .map(|n| (v[n] - v[w[0]]).norm_sqr())
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total.sqrt())
}

/// The scales `N_n = ⌊2^{n^ρ}⌋` and the parameters `κ_s`, `Q_s` attached to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub rho: f64,
    pub d: usize,
    /// Distinct scales in increasing order (first occurrence kept).
    pub scales: Vec<u64>,
}

impl ScaleLadder {
    /// All distinct `N_n <= max_scale`.
    pub fn new(rho: f64, d: usize, max_scale: u64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("ρ = {rho} outside (0, 1)")));
        }
        let mut scales: Vec<u64> = Vec::new();
        let mut n = 0u64;
        loop {
            let v = Self::raw_scale(rho, n);
            if v > max_scale {
                break;
            }
            if scales.last() != Some(&v) {
                scales.push(v);
            }
            n += 1;
        }
        Ok(Self { rho, d, scales })
    }

    /// `⌊2^{n^ρ}⌋`.
    pub fn raw_scale(rho: f64, n: u64) -> u64 {
        2f64.powf((n as f64).powf(rho)).floor() as u64
    }

    /// `κ_s = 20d(⌊ρ^{-1}(s+1)^{ρ/10}⌋ + 1)`.
    pub fn kappa(&self, s: u64) -> u64 {
        let inner = ((s as f64 + 1.0).powf(self.rho / 10.0) / self.rho).floor() as u64;
        20 * self.d as u64 * (inner + 1)
    }

    /// `m_s = ⌊e^{(s+1)^{ρ/10}}⌋`, so that `Q_s = m_s!`.
    pub fn q_s_base(&self, s: u64) -> u64 {
        (s as f64 + 1.0).powf(self.rho / 10.0).exp().floor() as u64
    }

    /// `Q_s` as a prime factorization (Legendre's formula).
    pub fn q_s(&self, s: u64) -> Vec<(u64, u64)> {
        factorial_factorization(self.q_s_base(s))
    }
}

/// `m!` as `[(p, v_p(m!))]`.
pub fn factorial_factorization(m: u64) -> Vec<(u64, u64)> {
    (2..=m)
        .filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0))
        .map(|p| {
            let mut e = 0;
            let mut pk = p;
            while pk <= m {
                e += m / pk;
                pk = match pk.checked_mul(p) {
                    Some(v) => v,
                    None => break,
                };
            }
            (p, e)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub long: f64,
    pub short: f64,
    pub total: f64,
    /// `total / (long + short)`, the smallest constant that works for this input.
    pub smallest_constant: f64,
    /// `total <= 2 (long + short)`.
    pub holds: bool,
    pub scales: Vec<u64>,
}

/// Splits `V_r` of a sequence indexed by `1..=M` into the variation along the
/// scales `N_n` and the `ℓ^r` sum of variations over `[N_n, N_{n+1})`, with the
/// last block `[N_last, M]`.
pub fn split_variation(seq: &IndexedSequence, rho: f64, r: f64) -> Result<SplitReport> {
    check_r(r)?;
    if seq.is_empty() {
        return Err(Error::EmptyDomain("empty sequence".into()));
    }
    let m = seq.len() as i64;
    if seq.indices().first() != Some(&1) || seq.indices().last() != Some(&m) {
        return Err(Error::Validation("split needs a sequence indexed by 1..=M".into()));
    }
    let ladder = ScaleLadder::new(rho, 1, m as u64)?;
    let scales = ladder.scales.clone();
    let long_vals: Vec<Complex64> = scales.iter().map(|&n| seq.values()[n as usize - 1]).collect();
    let long = vr(&long_vals, r)?;
    let mut short_r = 0.0;
    for (i, &lo) in scales.iter().enumerate() {
        let hi = scales.get(i + 1).map(|&h| h as i64 - 1).unwrap_or(m);
        let block = seq.window(lo as i64, hi);
        if block.len() >= 2 {
            short_r += vr(block.values(), r)?.powf(r);
        }
    }
    let short = short_r.powf(1.0 / r);
    let total = vr(seq.values(), r)?;
    let denom = long + short;
    let smallest_constant = if denom > 0.0 { total / denom } else { 0.0 };
    Ok(SplitReport {
        long,
        short,
        total,
        smallest_constant,
        holds: total <= 2.0 * denom * (1.0 + 1e-12) + 1e-300,
        scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn vr_examples() {
        assert_eq!(vr(&re(&[3.0, 3.0, 3.0]), 2.0).unwrap(), 0.0);
        assert!((vr(&re(&[0.0, 1.0, 2.0]), 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((vr(&re(&[0.0, 1.0, 0.0]), 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((vr_bruteforce(&re(&[0.0, 1.0, 0.0]), 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(vr_bruteforce(&re(&[5.0]), 2.0).unwrap(), 0.0);
        for r in [1.0, 2.5, 7.0] {
            assert!((vr_bruteforce(&re(&[0.0, 1.0]), r).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vr_errors() {
        assert!(matches!(vr(&re(&[0.0, 1.0]), 0.5), Err(Error::Domain(_))));
        assert!(matches!(vr(&re(&[0.0, 1.0]), 65.0), Err(Error::Domain(_))));
        assert!(matches!(vr(&[], 2.0), Err(Error::EmptyDomain(_))));
        assert!(matches!(vr_bruteforce(&re(&[0.0; 17]), 2.0), Err(Error::Size { .. })));
    }

    #[test]
    fn large_r_does_not_overflow() {
        let v = re(&[0.0, 1e200, -1e200, 1e200]);
        let x = vr(&v, 64.0).unwrap();
        assert!(x.is_finite() && x >= 2e200);
    }

    #[test]
    fn dyadic_examples() {
        let (l, r) = vr_dyadic_bound(&re(&[0.0, 1.0, 0.0, 1.0, 0.0]), 2.0).unwrap();
        assert!((l - 2.0).abs() < 1e-15);
        assert!((r - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(vr_dyadic_bound(&re(&[1.0; 9]), 2.0).unwrap(), (0.0, 0.0));
        assert!(vr_dyadic_bound(&re(&[0.0; 6]), 2.0).is_err());
        assert_eq!(pad_by_repetition(&re(&[0.0; 6])).len(), 9);
        assert_eq!(pad_by_repetition(&re(&[0.0; 5])).len(), 5);
    }

    #[test]
    fn oscillation_examples() {
        let s = IndexedSequence::from_real(&[0.0, 3.0, -1.0, 2.0, 2.0]);
        assert!((oscillation(&s, &[1, 5]).unwrap() - 3.0).abs() < 1e-15);
        assert!((oscillation(&s, &[1, 3, 5]).unwrap() - (9.0f64 + 9.0).sqrt()).abs() < 1e-15);
        assert_eq!(oscillation(&IndexedSequence::from_real(&[1.0; 5]), &[1, 3, 5]).unwrap(), 0.0);
        assert!(oscillation(&s, &[]).is_err());
        assert!(oscillation(&s, &[1, 9]).is_err());
    }

    #[test]
    fn ladder_deduplicates() {
        let l = ScaleLadder::new(0.5, 1, 100).unwrap();
        assert_eq!(&l.scales[..4], &[1, 2, 3, 4]);
        assert!(l.scales.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ScaleLadder::raw_scale(0.5, 1), ScaleLadder::raw_scale(0.5, 2));
        assert!(ScaleLadder::new(1.0, 1, 100).is_err());
        assert!((0..50).all(|s| l.kappa(s) <= l.kappa(s + 1)));
        assert_eq!(l.kappa(0), 20 * 3);
    }

    #[test]
    fn factorials() {
        assert_eq!(factorial_factorization(6), vec![(2, 4), (3, 2), (5, 1)]);
        assert!(factorial_factorization(1).is_empty());
        let l = ScaleLadder::new(0.5, 1, 10).unwrap();
        assert_eq!(l.q_s_base(0), 2);
        assert_eq!(l.q_s(0), vec![(2, 1)]);
    }

    #[test]
    fn split_constant_sequence() {
        let s = IndexedSequence::from_real(&[2.0; 40]);
        let rep = split_variation(&s, 0.5, 2.5).unwrap();
        assert_eq!((rep.long, rep.short, rep.total), (0.0, 0.0, 0.0));
        assert!(rep.holds);
        assert!(split_variation(&s, 1.5, 2.5).is_err());
    }
}
