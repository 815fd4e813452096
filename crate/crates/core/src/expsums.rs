//! Weyl sums over products of integer and prime sets, restricted to convex
//! regions, and an empirical scan for polynomial regularity.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ConvexBody, MultiIndexSet, OrbitShape, IMAGE_BOUND};
use crate::numeric::{frac_mul, pairwise_sum_complex, phase};
use crate::numtheory::PrimeTable;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// `[-N, N] ∩ Z`.
    Integers,
    /// `{1, …, N}`.
    Naturals,
    Primes,
    SignedPrimes,
    Custom(Vec<i64>),
}

impl Axis {
    pub fn values(&self, n: u64, primes: &PrimeTable) -> Result<Vec<i64>> {
        let ni = n as i64;
        Ok(match self {
            Self::Integers => (-ni..=ni).collect(),
            Self::Naturals => (1..=ni).collect(),
            Self::Primes => {
                primes.ensure_covers(n)?;
                primes.primes_up_to(n).iter().map(|&p| p as i64).collect()
            }
            Self::SignedPrimes => {
                primes.ensure_covers(n)?;
                primes.signed_up_to(n)
            }
            Self::Custom(v) => {
                let mut v: Vec<i64> = v.iter().copied().filter(|x| x.unsigned_abs() <= n).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        })
    }

    pub fn is_prime_axis(&self) -> bool {
        matches!(self, Self::Primes | Self::SignedPrimes)
    }
}

/// A convex region `Ω`, which must lie inside `[-N, N]^k`.
#[derive(Clone)]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : ⟨a_i, x⟩ <= b_i}` intersected with `[-N, N]^k`.
    HalfSpaces(Vec<(Vec<f64>, f64)>),
    /// The dilate `B_λ`.
    Body { body: ConvexBody, scale: f64 },
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Self::Ball { center, radius } => write!(f, "Ball({center:?}, {radius})"),
            Self::HalfSpaces(h) => write!(f, "HalfSpaces({} constraints)", h.len()),
            Self::Body { body, scale } => write!(f, "Body({:?}, {scale})", body.kind()),
        }
    }
}

impl Region {
    pub fn contains(&self, x: &[i64]) -> bool {
        match self {
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&l, &h))| l <= v as f64 && v as f64 <= h),
            Self::Ball { center, radius } => {
                x.iter().zip(center).map(|(&v, c)| (v as f64 - c).powi(2)).sum::<f64>() <= radius * radius
            }
            Self::HalfSpaces(hs) => hs
                .iter()
                .all(|(a, b)| a.iter().zip(x).map(|(ai, &v)| ai * v as f64).sum::<f64>() <= *b),
            Self::Body { body, scale } => {
                if scale.fract() == 0.0 && *scale >= 1.0 {
                    body.contains_lattice(x, *scale as u64)
                } else {
                    let y: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                    body.contains_scaled(&y, *scale)
                }
            }
        }
    }

    fn check_bounds(&self, k: usize, n: u64) -> Result<()> {
        let nf = n as f64;
        let ok = match self {
            Self::Box { lo, hi } => {
                lo.len() == k && hi.len() == k && lo.iter().chain(hi).all(|v| v.abs() <= nf)
            }
            Self::Ball { center, radius } => center.len() == k && center.iter().all(|c| c.abs() + radius <= nf),
            Self::HalfSpaces(hs) => hs.iter().all(|(a, _)| a.len() == k),
            Self::Body { body, scale } => body.k() == k && *scale <= nf,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("region {self:?} is not contained in [-{n}, {n}]^{k}")))
        }
    }
}

pub type Amplitude = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A polynomial exponential sum `Σ e(P(x)) 1_Ω(x) φ(x) w(x)` over a product of axes.
#[derive(Clone)]
pub struct ExpSumSpec {
    pub axes: Vec<Axis>,
    pub region: Region,
    /// `(γ, ξ_γ)` with `γ ≠ 0`.
    pub poly: Vec<(Vec<u32>, f64)>,
    pub amplitude: Option<Amplitude>,
    /// Multiply by `∏ ln|x_j|` over prime axes.
    pub logweights: bool,
}

impl fmt::Debug for ExpSumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpSumSpec")
            .field("axes", &self.axes)
            .field("region", &self.region)
            .field("poly", &self.poly)
            .field("amplitude", &self.amplitude.is_some())
            .field("logweights", &self.logweights)
            .finish()
    }
}

impl ExpSumSpec {
    pub fn k(&self) -> usize {
        self.axes.len()
    }

    /// Samples `|φ| <= c` and `|∇φ(x)| <= (1 + ‖x‖)^{-1}` (central differences)
    /// on random points of `[-N, N]^k` inside the region.
    pub fn validate_amplitude(&self, n: u64, c: f64, samples: usize, seed: u64) -> Result<()> {
        let Some(phi) = &self.amplitude else {
            return Ok(());
        };
        let k = self.k();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nf = n as f64;
        let mut checked = 0;
        for _ in 0..samples * 20 {
            if checked == samples {
                break;
            }
            let xi: Vec<i64> = (0..k).map(|_| rng.gen_range(-(n as i64)..=n as i64)).collect();
            if !self.region.contains(&xi) {
                continue;
            }
            checked += 1;
            let x: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
            let v = phi(&x);
            if v.abs() > c {
                return Err(Error::Validation(format!("|φ({x:?})| = {v} exceeds {c}")));
            }
            let h = 1e-4 * (1.0 + nf);
            let mut g2 = 0.0;
            for j in 0..k {
                let mut a = x.clone();
                let mut b = x.clone();
                a[j] += h;
                b[j] -= h;
                g2 += ((phi(&a) - phi(&b)) / (2.0 * h)).powi(2);
            }
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if g2.sqrt() > (1.0 + 1e-6) / (1.0 + r) {
                return Err(Error::Validation(format!("|∇φ({x:?})| = {} exceeds (1 + ‖x‖)^-1", g2.sqrt())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylResult {
    pub sum: Complex64,
    /// `|sum| / N^k`.
    pub normalized: f64,
    pub points: u64,
}

fn monomial(x: &[i64], g: &[u32]) -> Result<i64> {
    let mut v: i128 = 1;
    for (&xi, &e) in x.iter().zip(g) {
        for _ in 0..e {
            v *= xi as i128;
            if v.abs() > IMAGE_BOUND {
                return Err(Error::Overflow(format!("monomial x^{g:?} at {x:?} exceeds 2^62")));
            }
        }
    }
    Ok(v as i64)
}

/// Walks the product of `axes` (lexicographic, parallel over the leading axis)
/// and sums `term(x)` over points accepted by `keep`.
fn product_sum(
    axes: &[Vec<i64>],
    keep: &(dyn Fn(&[i64]) -> bool + Sync),
    term: &(dyn Fn(&[i64]) -> Result<Complex64> + Sync),
) -> Result<(Complex64, u64)> {
    let k = axes.len();
    let partial: Vec<Result<(Complex64, u64)>> = axes[0]
        .par_iter()
        .map(|&lead| {
            let mut acc = Vec::new();
            let mut idx = vec![0usize; k];
            let mut x = vec![lead; k];
            if axes[1..].iter().any(|a| a.is_empty()) {
                return Ok((Complex64::default(), 0));
            }
            loop {
                for j in 1..k {
                    x[j] = axes[j][idx[j]];
                }
                if keep(&x) {
                    acc.push(term(&x)?);
                }
                let mut j = k;
                loop {
                    j -= 1;
                    if j == 0 {
                        return Ok((pairwise_sum_complex(&acc), acc.len() as u64));
                    }
                    idx[j] += 1;
                    if idx[j] < axes[j].len() {
                        break;
                    }
                    idx[j] = 0;
                }
            }
        })
        .collect();
    let mut sums = Vec::with_capacity(partial.len());
    let mut count = 0;
    for p in partial {
        let (s, c) = p?;
        sums.push(s);
        count += c;
    }
    Ok((pairwise_sum_complex(&sums), count))
}

/// The exact finite sum `Σ_{x ∈ axes ∩ Ω} e(Σ ξ_γ x^γ) φ(x) w(x)`.
pub fn weyl_sum(spec: &ExpSumSpec, n: u64, primes: &PrimeTable) -> Result<WeylResult> {
    let k = spec.k();
    if k == 0 {
        return Err(Error::Domain("no axes".into()));
    }
    spec.region.check_bounds(k, n)?;
    if let Some((g, _)) = spec.poly.iter().find(|(g, _)| g.len() != k || g.iter().all(|&e| e == 0)) {
        return Err(Error::Domain(format!("invalid exponent {g:?}")));
    }
    let axes: Vec<Vec<i64>> = spec.axes.iter().map(|a| a.values(n, primes)).collect::<Result<_>>()?;
    let prime_axes: Vec<bool> = spec.axes.iter().map(Axis::is_prime_axis).collect();
    let term = |x: &[i64]| -> Result<Complex64> {
        let mut t = 0.0;
        for (g, c) in &spec.poly {
            t += frac_mul(*c, monomial(x, g)?);
        }
        let mut w = 1.0;
        if spec.logweights {
            for (v, &is_p) in x.iter().zip(&prime_axes) {
                if is_p {
                    w *= (v.unsigned_abs() as f64).ln();
                }
            }
        }
        if let Some(phi) = &spec.amplitude {
            let y: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            w *= phi(&y);
        }
        Ok(phase(t) * w)
    };
    let keep = |x: &[i64]| spec.region.contains(x);
    let (sum, points) = product_sum(&axes, &keep, &term)?;
    Ok(WeylResult {
        sum,
        normalized: sum.norm() / (n as f64).powi(k as i32),
        points,
    })
}

/// `Σ_{(n,p) ∈ B_N} e(⟨ξ, Q(n, p)⟩) ∏ ln p_j`, evaluated without building an orbit.
pub fn prime_weyl_sum(
    xi: &[f64],
    shape: OrbitShape,
    gamma: &MultiIndexSet,
    body: &ConvexBody,
    n: u64,
    primes: &PrimeTable,
) -> Result<Complex64> {
    if xi.len() != gamma.len() || gamma.k() != shape.k() || body.k() != shape.k() {
        return Err(Error::Domain("ξ, Γ, body and orbit shape have inconsistent dimensions".into()));
    }
    let int_axis = if shape.signed { Axis::Integers } else { Axis::Naturals };
    let prime_axis = if shape.signed { Axis::SignedPrimes } else { Axis::Primes };
    let mut axes = vec![int_axis; shape.kprime];
    axes.extend(std::iter::repeat(prime_axis).take(shape.kdoubleprime));
    let spec = ExpSumSpec {
        axes,
        region: Region::Body {
            body: body.clone(),
            scale: n as f64,
        },
        poly: gamma.gammas().iter().cloned().zip(xi.iter().copied()).collect(),
        amplitude: None,
        logweights: true,
    };
    Ok(weyl_sum(&spec, n, primes)?.sum)
}

/// `S_r = Σ_{x ∈ axis ∩ [-N, N], x ≡ r mod Q} e(Σ_j c_j x^j)` for `r = 0..Q`.
///
/// `coeffs[j]` multiplies `x^{j+1}`.
pub fn progression_sums(axis: &Axis, coeffs: &[f64], n: u64, modulus: u64, primes: &PrimeTable) -> Result<Vec<Complex64>> {
    if modulus == 0 {
        return Err(Error::Domain("modulus 0".into()));
    }
    let values = axis.values(n, primes)?;
    let mut buckets: Vec<Vec<Complex64>> = vec![Vec::new(); modulus as usize];
    for &x in &values {
        let mut t = 0.0;
        let mut pw: i128 = 1;
        for &c in coeffs {
            pw *= x as i128;
            if pw.abs() > IMAGE_BOUND {
                return Err(Error::Overflow(format!("{x}^{} exceeds 2^62", coeffs.len())));
            }
            t += frac_mul(c, pw as i64);
        }
        buckets[x.rem_euclid(modulus as i64) as usize].push(phase(t));
    }
    Ok(buckets.iter().map(|b| pairwise_sum_complex(b)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub n: u64,
    /// Denominator of the leading coefficient in the worst trial.
    pub q: u64,
    pub modulus: u64,
    /// `max_trials max_r |S_r| · Q / (N (ln N)^{-α})`.
    pub ratio: f64,
    pub seed: u64,
    /// The `q`-window `[(ln N)^β, N^d (ln N)^{-β}]` or the `Q` window was empty.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityParams {
    pub degree: u32,
    pub modulus: u64,
    pub alpha: f64,
    /// Upper exponent for `Q <= (ln N)^{α1}`.
    pub alpha1: f64,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
}

/// For random polynomials of the given degree whose leading coefficient is
/// `a/q` with `q` in the admissible window, records the worst normalized
/// progression sum per `N`.
pub fn regularity_scan(axis: &Axis, scales: &[u64], params: &RegularityParams, primes: &PrimeTable) -> Result<Vec<RegularityRow>> {
    if params.degree == 0 {
        return Err(Error::Domain("degree must be positive".into()));
    }
    let mut rows = Vec::with_capacity(scales.len());
    for (si, &n) in scales.iter().enumerate() {
        if params.modulus as f64 >= n as f64 {
            return Err(Error::Domain(format!("Q = {} is not below N = {n}", params.modulus)));
        }
        let ln = (n as f64).ln();
        let seed = params.seed.wrapping_add(si as u64);
        let q_lo = ln.powf(params.beta).ceil().max(2.0);
        let q_hi = ((n as f64).powi(params.degree as i32) * ln.powf(-params.beta)).floor().min(1e15);
        let q_window_empty = q_lo > q_hi;
        let modulus_ok = params.modulus as f64 <= ln.powf(params.alpha1);
        if q_window_empty || !modulus_ok {
            rows.push(RegularityRow {
                n,
                q: 0,
                modulus: params.modulus,
                ratio: f64::NAN,
                seed,
                skipped: true,
            });
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = (0.0, 0u64);
        for _ in 0..params.trials {
            let q = rng.gen_range(q_lo as u64..=q_hi as u64);
            let a = loop {
                let a = rng.gen_range(1..=q);
                if num_integer::gcd(a, q) == 1 {
                    break a;
                }
            };
            let mut coeffs: Vec<f64> = (1..params.degree).map(|_| rng.gen_range(0.0..1.0)).collect();
            coeffs.push(a as f64 / q as f64);
            let sums = progression_sums(axis, &coeffs, n, params.modulus, primes)?;
            let m = sums.iter().map(|s| s.norm()).fold(0.0, f64::max);
            let ratio = m * params.modulus as f64 / (n as f64 * ln.powf(-params.alpha));
            if ratio > worst.0 {
                worst = (ratio, q);
            }
        }
        rows.push(RegularityRow {
            n,
            q: worst.1,
            modulus: params.modulus,
            ratio: worst.0,
            seed,
            skipped: false,
        });
    }
    Ok(rows)
}

/// Seeded minor-arc frequencies: each component is `a/q + u` with
/// `q ∈ [q_min, q_max]`, `gcd(a, q) = 1` and `|u| <= 1/q^2`.
pub fn minor_arc_frequencies(count: usize, d: usize, q_min: u64, q_max: u64, seed: u64) -> Vec<(Vec<f64>, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q = rng.gen_range(q_min..=q_max);
            let xi = (0..d)
                .map(|_| {
                    let a = loop {
                        let a = rng.gen_range(1..q);
                        if num_integer::gcd(a, q) == 1 {
                            break a;
                        }
                    };
                    let u = rng.gen_range(-1.0..1.0) / (q as f64 * q as f64);
                    crate::numeric::torus(a as f64 / q as f64 + u)
                })
                .collect();
            (xi, q)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::sieve_primes;

    fn primes() -> PrimeTable {
        sieve_primes(1000).unwrap()
    }

    #[test]
    fn point_count() {
        let spec = ExpSumSpec {
            axes: vec![Axis::Integers],
            region: Region::Box {
                lo: vec![-3.0],
                hi: vec![3.0],
            },
            poly: vec![],
            amplitude: None,
            logweights: false,
        };
        let r = weyl_sum(&spec, 10, &primes()).unwrap();
        assert_eq!(r.sum, Complex64::new(7.0, 0.0));
        assert_eq!(r.points, 7);
    }

    #[test]
    fn alternating_sums() {
        let spec = ExpSumSpec {
            axes: vec![Axis::Naturals],
            region: Region::Box {
                lo: vec![1.0],
                hi: vec![4.0],
            },
            poly: vec![(vec![1], 0.5)],
            amplitude: None,
            logweights: false,
        };
        assert!(weyl_sum(&spec, 4, &primes()).unwrap().sum.norm() < 1e-15);

        let spec = ExpSumSpec {
            axes: vec![Axis::Primes],
            region: Region::Box {
                lo: vec![0.0],
                hi: vec![10.0],
            },
            poly: vec![(vec![1], 0.5)],
            amplitude: None,
            logweights: false,
        };
        assert!((weyl_sum(&spec, 10, &primes()).unwrap().sum - Complex64::new(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn region_outside_cube_rejected() {
        let spec = ExpSumSpec {
            axes: vec![Axis::Integers],
            region: Region::Box {
                lo: vec![-20.0],
                hi: vec![3.0],
            },
            poly: vec![],
            amplitude: None,
            logweights: false,
        };
        assert!(matches!(weyl_sum(&spec, 10, &primes()), Err(Error::Domain(_))));
    }

    #[test]
    fn progression_partition_is_exact() {
        let p = primes();
        let coeffs = [0.123, 0.4567];
        let full = progression_sums(&Axis::Integers, &coeffs, 200, 1, &p).unwrap()[0];
        let parts = progression_sums(&Axis::Integers, &coeffs, 200, 7, &p).unwrap();
        assert!((pairwise_sum_complex(&parts) - full).norm() < 1e-11);
    }

    #[test]
    fn regularity_gates() {
        let p = primes();
        let params = RegularityParams {
            degree: 2,
            modulus: 100,
            alpha: 1.0,
            alpha1: 10.0,
            beta: 0.5,
            trials: 3,
            seed: 1,
        };
        assert!(regularity_scan(&Axis::Integers, &[100], &params, &p).is_err());
        let params = RegularityParams {
            modulus: 1,
            ..params
        };
        let rows = regularity_scan(&Axis::Integers, &[100], &params, &p).unwrap();
        assert!(!rows[0].skipped && rows[0].ratio.is_finite());
    }

    #[test]
    fn amplitude_validation() {
        let mut spec = ExpSumSpec {
            axes: vec![Axis::Integers],
            region: Region::Box {
                lo: vec![-10.0],
                hi: vec![10.0],
            },
            poly: vec![],
            amplitude: Some(Arc::new(|x: &[f64]| (1.0 + x[0].abs()).ln().cos())),
            logweights: false,
        };
        spec.validate_amplitude(10, 1.0, 100, 2).unwrap();
        spec.amplitude = Some(Arc::new(|x: &[f64]| x[0]));
        assert!(spec.validate_amplitude(10, 100.0, 100, 2).is_err());
    }
}
