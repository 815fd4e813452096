//! Summation, phase and quadrature primitives shared by the operator and
//! multiplier code.
//!
//! Phases `e^{2πi t}` are always formed from `t mod 1`. When `t = ξ·v` with an
//! integer `v` the fractional part is computed from the exact dyadic expansion
//! of `ξ`, so large monomials `v` do not destroy the phase.

use std::f64::consts::TAU;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (tree) summation. The result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_complex(&xs[..mid]) + pairwise_sum_complex(&xs[mid..])
}

/// Splits a finite `x` into `(m, e)` with `x = m · 2^e` exactly.
fn decompose(x: f64) -> (i64, i32) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & 0x000f_ffff_ffff_ffff) as i64;
    if exp_bits == 0 {
        (sign * frac, -1074)
    } else {
        (sign * (frac | (1 << 52)), exp_bits - 1075)
    }
}

/// Fractional part of `xi · v` in `[0, 1)`.
///
/// Exact (up to the final rounding to `f64`) whenever the binary exponent of
/// `xi` is at least `-120`; tinier frequencies fall back to float arithmetic,
/// where the product is small anyway.
pub fn frac_mul(xi: f64, v: i64) -> f64 {
    if xi == 0.0 || v == 0 {
        return 0.0;
    }
    let (m, e) = decompose(xi);
    if e >= 0 {
        return 0.0;
    }
    let s = -e;
    if s > 120 {
        return (xi * v as f64).rem_euclid(1.0);
    }
    let modulus: i128 = 1i128 << s;
    let prod = (m as i128) * (v as i128);
    let r = prod.rem_euclid(modulus);
    let t = r as f64 / modulus as f64;
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

/// Reduces a real number to the torus representative in `[0, 1)`.
pub fn torus(x: f64) -> f64 {
    let t = x - x.floor();
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

/// Signed torus distance representative in `[-1/2, 1/2)`.
pub fn torus_signed(x: f64) -> f64 {
    let t = torus(x);
    if t >= 0.5 {
        t - 1.0
    } else {
        t
    }
}

/// `e^{2πi t}`.
pub fn phase(t: f64) -> Complex64 {
    Complex64::cis(TAU * torus(t))
}

/// Table of `e^{2πi r/q}` for `r = 0..q`.
#[derive(Debug, Clone)]
pub struct RootsOfUnity {
    table: Vec<Complex64>,
}

impl RootsOfUnity {
    pub fn new(q: u64) -> Self {
        let q = q.max(1);
        let table = (0..q)
            .map(|r| Complex64::cis(TAU * (r as f64) / (q as f64)))
            .collect();
        Self { table }
    }

    pub fn modulus(&self) -> u64 {
        self.table.len() as u64
    }

    /// `e^{2πi r/q}` for any integer residue `r`.
    pub fn get(&self, r: i128) -> Complex64 {
        let q = self.table.len() as i128;
        self.table[r.rem_euclid(q) as usize]
    }
}

/// Gauss–Legendre rule on `[-1, 1]`, stored as plain node/weight vectors.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
        let rule = GaussLegendre::new(n);
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        Self { nodes, weights }
    }

    /// Composite rule on `[a, b]` with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.nodes.len());
        let mut ws = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + 0.5 * h * x);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_mul_handles_large_integers() {
        // 1/3 is not dyadic, but the product with the exact f64 value must be
        // close to the true fractional part for moderate v.
        let t = frac_mul(0.25, 7);
        assert_eq!(t, 0.75);
        let t = frac_mul(0.5, -3);
        assert_eq!(t, 0.5);
        let big = (1i64 << 60) + 3;
        assert_eq!(frac_mul(0.125, big), 0.375);
        let naive = (0.125 * big as f64).rem_euclid(1.0);
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
    }

    #[test]
    fn torus_reduction() {
        assert_eq!(torus(-0.25), 0.75);
        assert_eq!(torus(3.5), 0.5);
        assert_eq!(torus_signed(0.75), -0.25);
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = GaussRule::new(5);
        let (xs, ws) = rule.composite(0.0, 2.0, 3);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 32.0).abs() < 1e-12);
    }

    #[test]
    fn roots_of_unity_wrap() {
        let t = RootsOfUnity::new(4);
        assert!((t.get(-1) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((t.get(5) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }
}
