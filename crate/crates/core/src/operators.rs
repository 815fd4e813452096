//! Averaging and singular operators on finitely supported functions over `Z^{d0}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{enumerate_orbit, ConvexBody, Lift, OrbitShape, WeightedOrbit, DEFAULT_ORBIT_CAP};
use crate::numeric::{frac_mul, pairwise_sum, pairwise_sum_complex, phase, GaussRule};
use crate::numtheory::PrimeTable;

const SCATTER_CHUNK: usize = 64;

/// A finitely supported function `Z^{d0} → C`. Zero values are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFunction {
    d0: usize,
    values: BTreeMap<Vec<i64>, Complex64>,
}

impl SparseFunction {
    pub fn new(d0: usize) -> Self {
        Self {
            d0,
            values: BTreeMap::new(),
        }
    }

    pub fn delta(x: Vec<i64>) -> Self {
        let mut f = Self::new(x.len());
        f.add(x, Complex64::new(1.0, 0.0));
        f
    }

    pub fn from_entries(d0: usize, entries: impl IntoIterator<Item = (Vec<i64>, Complex64)>) -> Result<Self> {
        let mut f = Self::new(d0);
        for (x, v) in entries {
            if x.len() != d0 {
                return Err(Error::Domain(format!("point {x:?} is not in Z^{d0}")));
            }
            f.add(x, v);
        }
        Ok(f)
    }

    /// Random function with `size` points in `[-radius, radius]^{d0}` and
    /// values in the unit square.
    pub fn random(d0: usize, size: usize, radius: i64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Self::new(d0);
        while f.len() < size {
            let x: Vec<i64> = (0..d0).map(|_| rng.gen_range(-radius..=radius)).collect();
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.set(x, v);
        }
        f
    }

    pub fn d0(&self) -> usize {
        self.d0
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, x: &[i64]) -> Complex64 {
        self.values.get(x).copied().unwrap_or_default()
    }

    pub fn set(&mut self, x: Vec<i64>, v: Complex64) {
        if v == Complex64::default() {
            self.values.remove(&x);
        } else {
            self.values.insert(x, v);
        }
    }

    pub fn add(&mut self, x: Vec<i64>, v: Complex64) {
        let cur = self.get(&x);
        self.set(x, cur + v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.values.iter()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::new(self.d0);
        for (x, v) in self.iter() {
            out.set(x.clone(), v * c);
        }
        out
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: Complex64, other: &Self) -> Self {
        let mut out = self.clone();
        for (x, v) in other.iter() {
            out.add(x.clone(), v * c);
        }
        out
    }

    /// `x ↦ f(x - v)`.
    pub fn translate(&self, v: &[i64]) -> Self {
        let values = self
            .iter()
            .map(|(x, val)| (x.iter().zip(v).map(|(a, b)| a + b).collect(), *val))
            .collect();
        Self { d0: self.d0, values }
    }

    pub fn sum(&self) -> Complex64 {
        let vs: Vec<Complex64> = self.values.values().copied().collect();
        pairwise_sum_complex(&vs)
    }

    /// `ℓ^p` norm over the support; `p = ∞` gives the sup norm.
    pub fn norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.values().fold(0.0, |m, v| m.max(v.norm()));
        }
        let terms: Vec<f64> = self.values.values().map(|v| v.norm().powf(p)).collect();
        pairwise_sum(&terms).powf(1.0 / p)
    }

    /// `f̂(ξ) = Σ_x f(x) e(⟨ξ, x⟩)`, phases reduced exactly.
    pub fn fourier(&self, xi: &[f64]) -> Complex64 {
        let terms: Vec<Complex64> = self
            .iter()
            .map(|(x, v)| {
                let t: f64 = xi.iter().zip(x).map(|(&c, &xj)| frac_mul(c, xj)).sum();
                v * phase(t)
            })
            .collect();
        pairwise_sum_complex(&terms)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (x, v) in self.iter() {
            m = m.max((v - other.get(x)).norm());
        }
        for (x, v) in other.iter() {
            if !self.values.contains_key(x) {
                m = m.max(v.norm());
            }
        }
        m
    }
}

pub type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type KernelGrad = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A Calderón–Zygmund kernel on `R^k \ {0}`.
#[derive(Clone)]
pub enum CZKernel {
    /// `K(x) = 1/(2x)` on `R`.
    Hilbert,
    /// `K(x) = x_1 / ((k+1)‖x‖^{k+1})` on `R^k`, `k >= 2`.
    Riesz { k: usize },
    Custom {
        k: usize,
        eval: KernelFn,
        grad: KernelGrad,
    },
}

impl fmt::Debug for CZKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hilbert => write!(f, "Hilbert"),
            Self::Riesz { k } => write!(f, "Riesz {{ k: {k} }}"),
            Self::Custom { k, .. } => write!(f, "Custom {{ k: {k} }}"),
        }
    }
}

impl CZKernel {
    /// The built-in odd kernel for dimension `k`.
    pub fn builtin(k: usize) -> Self {
        if k == 1 {
            Self::Hilbert
        } else {
            Self::Riesz { k }
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Self::Hilbert => 1,
            Self::Riesz { k } | Self::Custom { k, .. } => *k,
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, Self::Custom { .. })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Hilbert => 0.5 / x[0],
            Self::Riesz { k } => {
                let r = norm2(x);
                x[0] / ((*k as f64 + 1.0) * r.powi(*k as i32 + 1))
            }
            Self::Custom { eval, .. } => eval(x),
        }
    }

    pub fn eval_lattice(&self, x: &[i64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        self.eval(&y)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Hilbert => vec![-0.5 / (x[0] * x[0])],
            Self::Riesz { k } => {
                let m = *k as f64 + 1.0;
                let r = norm2(x);
                let c = 1.0 / (m * r.powf(m));
                x.iter()
                    .enumerate()
                    .map(|(j, &xj)| {
                        let e = if j == 0 { 1.0 } else { 0.0 };
                        c * (e - m * x[0] * xj / (r * r))
                    })
                    .collect()
            }
            Self::Custom { grad, .. } => grad(x),
        }
    }

    /// Largest sampled value of `‖x‖^k |K(x)| + ‖x‖^{k+1} ‖∇K(x)‖` over `‖x‖ >= 1`.
    pub fn size_condition(&self, samples: usize, seed: u64) -> f64 {
        let k = self.k();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let dir: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r0 = norm2(&dir);
            if r0 == 0.0 {
                continue;
            }
            let radius = 10f64.powf(rng.gen_range(0.0..6.0));
            let x: Vec<f64> = dir.iter().map(|v| v / r0 * radius).collect();
            let r = norm2(&x);
            let val = r.powi(k as i32) * self.eval(&x).abs() + r.powi(k as i32 + 1) * norm2(&self.grad(&x));
            worst = worst.max(val);
        }
        worst
    }

    /// Largest `|∫_{B_λ \ B_λ'} K|` over random shells, by Gauss–Legendre
    /// quadrature on a box decomposition of the cube shell or polar
    /// coordinates for the disc.
    pub fn cancellation_condition(&self, body: &ConvexBody, pairs: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = GaussRule::new(16);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let inner = 10f64.powf(rng.gen_range(-1.0..2.0));
            let outer = inner * rng.gen_range(1.1..4.0);
            let v = shell_integral(body, inner, outer, &rule, 8, &|x| Complex64::new(self.eval(x), 0.0))?;
            worst = worst.max(v.norm());
        }
        Ok(worst)
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `∫_{B_outer \ B_inner} f` for the built-in bodies.
pub(crate) fn shell_integral(
    body: &ConvexBody,
    inner: f64,
    outer: f64,
    rule: &GaussRule,
    panels: usize,
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
) -> Result<Complex64> {
    use crate::lattice::BodyKind;
    let k = body.k();
    match body.kind() {
        BodyKind::Cube => {
            // 3^k - 1 boxes: each axis in {[-o,-i], [-i,i], [i,o]}, not all middle
            let segs = [(-outer, -inner), (-inner, inner), (inner, outer)];
            let mut parts = Vec::new();
            for code in 0..3usize.pow(k as u32) {
                let mut c = code;
                let mut ranges = Vec::with_capacity(k);
                let mut all_mid = true;
                for _ in 0..k {
                    let s = c % 3;
                    c /= 3;
                    all_mid &= s == 1;
                    ranges.push(segs[s]);
                }
                if !all_mid {
                    parts.push(box_integral(&ranges, rule, panels, f));
                }
            }
            Ok(pairwise_sum_complex(&parts))
        }
        BodyKind::Ball if k == 1 => Ok(box_integral(&[(-outer, -inner)], rule, panels, f)
            + box_integral(&[(inner, outer)], rule, panels, f)),
        BodyKind::Ball if k == 2 => {
            let polar = |u: &[f64]| {
                let (r, t) = (u[0], u[1]);
                f(&[r * t.cos(), r * t.sin()]) * r
            };
            Ok(box_integral(
                &[(inner, outer), (0.0, 2.0 * std::f64::consts::PI)],
                rule,
                panels,
                &polar,
            ))
        }
        _ => Err(Error::Domain(format!(
            "shell quadrature is available for cubes and balls with k <= 2, got {:?} with k = {k}",
            body.kind()
        ))),
    }
}

/// Tensor composite Gauss–Legendre over a box.
pub(crate) fn box_integral(
    ranges: &[(f64, f64)],
    rule: &GaussRule,
    panels: usize,
    f: &(dyn Fn(&[f64]) -> Complex64 + Sync),
) -> Complex64 {
    let axes: Vec<(Vec<f64>, Vec<f64>)> = ranges
        .iter()
        .map(|&(a, b)| rule.composite(a, b, panels))
        .collect();
    let k = ranges.len();
    let sizes: Vec<usize> = axes.iter().map(|a| a.0.len()).collect();
    let total: usize = sizes.iter().product();
    let terms: Vec<Complex64> = (0..total)
        .map(|idx| {
            let mut r = idx;
            let mut x = vec![0.0; k];
            let mut w = 1.0;
            for j in 0..k {
                let i = r % sizes[j];
                r /= sizes[j];
                x[j] = axes[j].0[i];
                w *= axes[j].1[i];
            }
            f(&x) * w
        })
        .collect();
    pairwise_sum_complex(&terms)
}

/// `L Q(n, p)` for every orbit point.
fn translations(orbit: &WeightedOrbit, lift: &Lift) -> Result<Vec<Vec<i64>>> {
    if lift.gamma != orbit.gamma {
        return Err(Error::Domain("lift and orbit use different Γ".into()));
    }
    (0..orbit.len()).map(|i| lift.apply(orbit.image(i))).collect()
}

/// `g(x) = Σ_i c_i f(x - t_i)`, parallel over fixed chunks of the sorted support
/// and merged in chunk order.
fn scatter(f: &SparseFunction, shifts: &[Vec<i64>], coeffs: &[f64], d0: usize) -> SparseFunction {
    let support: Vec<(&Vec<i64>, &Complex64)> = f.iter().collect();
    let partials: Vec<HashMap<Vec<i64>, Complex64>> = support
        .par_chunks(SCATTER_CHUNK)
        .map(|chunk| {
            let mut acc: HashMap<Vec<i64>, Complex64> = HashMap::new();
            for (y, v) in chunk {
                for (t, &c) in shifts.iter().zip(coeffs) {
                    let x: Vec<i64> = y.iter().zip(t).map(|(a, b)| a + b).collect();
                    *acc.entry(x).or_default() += *v * c;
                }
            }
            acc
        })
        .collect();
    let mut merged: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
    for part in partials {
        let mut entries: Vec<_> = part.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (x, v) in entries {
            *merged.entry(x).or_default() += v;
        }
    }
    merged.retain(|_, v| *v != Complex64::default());
    SparseFunction { d0, values: merged }
}

fn check_dims(f: &SparseFunction, lift: &Lift) -> Result<()> {
    if f.d0() != lift.d0() {
        return Err(Error::Domain(format!(
            "function lives on Z^{} but the lift maps into Z^{}",
            f.d0(),
            lift.d0()
        )));
    }
    Ok(())
}

/// Rejects a built-in kernel on a body that is not origin-symmetric; custom
/// bodies are probed on seeded points of `[-1, 1]^k`.
pub fn check_kernel_body(kernel: &CZKernel, body: &ConvexBody) -> Result<()> {
    if !kernel.is_builtin() || body.is_builtin() {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..512 {
        let x: Vec<f64> = (0..body.k()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        if body.contains(&x) != body.contains(&neg) {
            return Err(Error::Validation(format!(
                "built-in kernels need an origin-symmetric body; {x:?} and its negative disagree (use a custom kernel)"
            )));
        }
    }
    Ok(())
}

/// The weighted average `M_N f` or, with `weighted = false`, the plain average `A_N f`.
pub fn apply_average(f: &SparseFunction, orbit: &WeightedOrbit, lift: &Lift, weighted: bool) -> Result<SparseFunction> {
    check_dims(f, lift)?;
    if orbit.is_empty() {
        return Err(Error::ZeroNormalization(format!("orbit at N = {} is empty", orbit.n)));
    }
    let shifts = translations(orbit, lift)?;
    let coeffs: Vec<f64> = if weighted {
        let theta = orbit.theta();
        if theta == 0.0 {
            return Err(Error::ZeroNormalization(format!("ϑ_B({}) = 0", orbit.n)));
        }
        orbit.weights.iter().map(|w| w / theta).collect()
    } else {
        vec![1.0 / orbit.len() as f64; orbit.len()]
    };
    Ok(scatter(f, &shifts, &coeffs, lift.d0()))
}

/// `H_N f(x) = Σ f(x - L Q(n, p)) K(n, p) ∏ ln|p_j|` over a signed orbit.
pub fn apply_singular(f: &SparseFunction, kernel: &CZKernel, orbit: &WeightedOrbit, lift: &Lift) -> Result<SparseFunction> {
    check_dims(f, lift)?;
    if kernel.k() != orbit.k() {
        return Err(Error::Domain(format!(
            "kernel dimension {} differs from orbit dimension {}",
            kernel.k(),
            orbit.k()
        )));
    }
    if orbit.contains_origin() {
        return Err(Error::Domain("orbit contains the origin, where K is singular".into()));
    }
    let shifts = translations(orbit, lift)?;
    let coeffs: Vec<f64> = (0..orbit.len())
        .map(|i| kernel.eval_lattice(orbit.point(i)) * orbit.weights[i])
        .collect();
    Ok(scatter(f, &shifts, &coeffs, lift.d0()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: u64,
    /// `‖M_N f - A_N f‖_p / ‖f‖_p`, absent when the orbit is empty.
    pub relative_norm: Option<f64>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub p: f64,
    pub rows: Vec<ComparisonRow>,
    /// `max_N relative_norm · ln N`.
    pub c_fit: f64,
    /// Whether the constant fitted on the first half of the scales also bounds the second half.
    pub stable: bool,
}

pub fn compare_weighted_unweighted(
    f: &SparseFunction,
    lift: &Lift,
    body: &ConvexBody,
    shape: OrbitShape,
    scales: &[u64],
    primes: &PrimeTable,
    p: f64,
) -> Result<ComparisonReport> {
    if scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("scales must be strictly increasing".into()));
    }
    let fnorm = f.norm(p);
    let mut rows = Vec::with_capacity(scales.len());
    for &n in scales {
        let orbit = enumerate_orbit(body, n, shape, &lift.gamma, primes, DEFAULT_ORBIT_CAP)?;
        if orbit.is_empty() || fnorm == 0.0 {
            rows.push(ComparisonRow {
                n,
                relative_norm: None,
                skipped: true,
            });
            continue;
        }
        let m = apply_average(f, &orbit, lift, true)?;
        let a = apply_average(f, &orbit, lift, false)?;
        let diff = m.axpy(Complex64::new(-1.0, 0.0), &a);
        rows.push(ComparisonRow {
            n,
            relative_norm: Some(diff.norm(p) / fnorm),
            skipped: false,
        });
    }
    let scaled: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.relative_norm.map(|v| v * (r.n as f64).ln()))
        .collect();
    let c_fit = scaled.iter().copied().fold(0.0, f64::max);
    let half = scaled.len() / 2;
    let head = scaled[..half].iter().copied().fold(0.0, f64::max);
    let stable = half > 0 && scaled[half..].iter().all(|&v| v <= head * (1.0 + 1e-12));
    Ok(ComparisonReport { p, rows, c_fit, stable })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TelescopeKind {
    Average,
    Singular,
}

/// Everything needed to build the convolution kernels `κ_n` for `N1 <= n <= N2`.
#[derive(Debug, Clone)]
pub struct TelescopeSetup {
    pub body: ConvexBody,
    pub shape: OrbitShape,
    pub lift: Lift,
    pub kernel: Option<CZKernel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    pub kind: TelescopeKind,
    pub n1: u64,
    pub n2: u64,
    /// `‖Σ_{n=N1}^{N2-1} |κ_{n+1} - κ_n|‖_1`.
    pub lhs: f64,
    /// `C N1^{-k} (ϑ_B(N2) - ϑ_B(N1))`.
    pub rhs_bound: f64,
    /// `lhs / (N1^{-k} (ϑ_B(N2) - ϑ_B(N1)))`, the smallest admissible `C`.
    pub ratio: f64,
    pub theta_n1: f64,
    pub theta_n2: f64,
    /// Largest deviation between the direct telescoped sum and the closed form,
    /// over all orbit points.
    pub identity_error: f64,
}

/// Per-point telescoped sums against their closed forms.
#[derive(Debug, Clone)]
pub struct TelescopeTable {
    pub kind: TelescopeKind,
    pub n1: u64,
    pub n2: u64,
    pub points: Vec<Vec<i64>>,
    pub direct: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub theta_n1: f64,
    pub theta_n2: f64,
    pub k: usize,
}

impl TelescopeTable {
    pub fn lookup(&self, x: &[i64]) -> Option<(f64, f64)> {
        self.points
            .iter()
            .position(|p| p.as_slice() == x)
            .map(|i| (self.direct[i], self.closed_form[i]))
    }

    pub fn lhs(&self) -> f64 {
        pairwise_sum(&self.direct)
    }

    pub fn identity_error(&self) -> f64 {
        self.direct
            .iter()
            .zip(&self.closed_form)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates `Σ_{n=N1}^{N2-1} |κ_{n+1}(z) - κ_n(z)|` directly for every `z` in
/// the image of `B_{N2}` and pairs it with the closed form per orbit point.
///
/// The closed forms are stated per point `y`; they are compared at `z = L Q(y)`
/// and require `L Q` to be injective on the orbit, which is checked.
pub fn telescoping_table(kind: TelescopeKind, n1: u64, n2: u64, setup: &TelescopeSetup, primes: &PrimeTable) -> Result<TelescopeTable> {
    if n1 >= n2 {
        return Err(Error::Domain(format!("need N1 < N2, got N1 = {n1}, N2 = {n2}")));
    }
    if n1 == 0 {
        return Err(Error::Domain("N1 must be positive".into()));
    }
    if let Some(kern) = &setup.kernel {
        check_kernel_body(kern, &setup.body)?;
    }
    let orbit = enumerate_orbit(&setup.body, n2, setup.shape, &setup.lift.gamma, primes, DEFAULT_ORBIT_CAP)?;
    let entry: Vec<u64> = (0..orbit.len())
        .map(|i| {
            setup
                .body
                .entry_scale(orbit.point(i))
                .ok_or_else(|| Error::Validation(format!("no entry scale for {:?}", orbit.point(i))))
        })
        .collect::<Result<_>>()?;
    let span = (n2 - n1) as usize;
    // ϑ(n) for n in [N1, N2]
    let mut by_scale = vec![Vec::new(); span + 1];
    let mut base = Vec::new();
    for (i, &e) in entry.iter().enumerate() {
        if e <= n1 {
            base.push(orbit.weights[i]);
        } else {
            by_scale[(e - n1) as usize].push(orbit.weights[i]);
        }
    }
    let mut theta = Vec::with_capacity(span + 1);
    let mut acc = pairwise_sum(&base);
    theta.push(acc);
    for ws in by_scale.iter().skip(1) {
        acc += pairwise_sum(ws);
        theta.push(acc);
    }
    let kernel = match kind {
        TelescopeKind::Average => {
            if theta[0] == 0.0 {
                return Err(Error::ZeroNormalization(format!("ϑ_B({n1}) = 0")));
            }
            None
        }
        TelescopeKind::Singular => {
            let k = setup
                .kernel
                .clone()
                .ok_or_else(|| Error::Domain("singular telescoping needs a kernel".into()))?;
            if orbit.contains_origin() {
                return Err(Error::Domain("orbit contains the origin".into()));
            }
            Some(k)
        }
    };
    let mut images: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for i in 0..orbit.len() {
        images.entry(setup.lift.apply(orbit.image(i))?).or_default().push(i);
    }
    if images.len() != orbit.len() {
        return Err(Error::Validation("L Q is not injective on the orbit".into()));
    }
    let mut points = Vec::with_capacity(orbit.len());
    let mut direct = Vec::with_capacity(orbit.len());
    let mut closed = Vec::with_capacity(orbit.len());
    for i in 0..orbit.len() {
        let w = orbit.weights[i];
        let e = entry[i];
        // coefficient of this point in κ_n
        let coef = |n: u64| -> f64 {
            if e > n {
                return 0.0;
            }
            match &kernel {
                None => w / theta[(n - n1) as usize],
                Some(k) => k.eval_lattice(orbit.point(i)) * w,
            }
        };
        let mut terms = Vec::with_capacity(span);
        let mut prev = coef(n1);
        for n in n1..n2 {
            let next = coef(n + 1);
            terms.push((next - prev).abs());
            prev = next;
        }
        direct.push(pairwise_sum(&terms));
        let theta2 = theta[span];
        closed.push(match &kernel {
            None if e <= n1 => (1.0 / theta[0] - 1.0 / theta2) * w,
            None => 2.0 * w / theta[(e - n1) as usize] - w / theta2,
            Some(k) if e > n1 => k.eval_lattice(orbit.point(i)).abs() * w,
            Some(_) => 0.0,
        });
        points.push(orbit.point(i).to_vec());
    }
    Ok(TelescopeTable {
        kind,
        n1,
        n2,
        points,
        direct,
        closed_form: closed,
        theta_n1: theta[0],
        theta_n2: theta[span],
        k: orbit.k(),
    })
}

/// The `ℓ^1` telescoping bound with a frozen constant `c`.
pub fn telescoping_l1(kind: TelescopeKind, n1: u64, n2: u64, setup: &TelescopeSetup, primes: &PrimeTable, c: f64) -> Result<TelescopingReport> {
    let table = telescoping_table(kind, n1, n2, setup, primes)?;
    let lhs = table.lhs();
    let scale = (table.theta_n2 - table.theta_n1) / (n1 as f64).powi(table.k as i32);
    Ok(TelescopingReport {
        kind,
        n1,
        n2,
        lhs,
        rhs_bound: c * scale,
        ratio: if scale > 0.0 { lhs / scale } else { 0.0 },
        theta_n1: table.theta_n1,
        theta_n2: table.theta_n2,
        identity_error: table.identity_error(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_gamma;
    use crate::numtheory::sieve_primes;

    fn prime_orbit(n: u64, signed: bool) -> (WeightedOrbit, Lift) {
        let primes = sieve_primes(1000).unwrap();
        let g = build_gamma(1, 1).unwrap();
        let o = enumerate_orbit(&ConvexBody::interval(), n, OrbitShape::new(0, 1, signed), &g, &primes, 10_000).unwrap();
        (o, Lift::identity(&g))
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn builtin_kernel_needs_symmetric_body() {
        let k = CZKernel::builtin(1);
        let lopsided = ConvexBody::custom(1, Arc::new(|x: &[f64]| x[0] >= -0.5 && x[0] <= 1.0), 0.5, Some(1.5));
        let mirrored = ConvexBody::custom(1, Arc::new(|x: &[f64]| x[0].abs() <= 0.7), 0.7, Some(1.4));
        assert!(check_kernel_body(&k, &ConvexBody::interval()).is_ok());
        assert!(check_kernel_body(&k, &mirrored).is_ok());
        assert!(matches!(check_kernel_body(&k, &lopsided), Err(Error::Validation(_))));
    }

    #[test]
    fn weighted_average_of_delta() {
        let (o, l) = prime_orbit(10, false);
        let g = apply_average(&SparseFunction::delta(vec![0]), &o, &l, true).unwrap();
        assert!((g.get(&[2]).re - 2f64.ln() / 210f64.ln()).abs() < 1e-15);
        assert!((g.get(&[2]).re - 0.1296).abs() < 1e-4);
        assert_eq!(g.len(), 4);
        let u = apply_average(&SparseFunction::delta(vec![0]), &o, &l, false).unwrap();
        for x in [2, 3, 5, 7] {
            assert_eq!(u.get(&[x]), c(0.25));
        }
        assert!(apply_average(&SparseFunction::new(1), &o, &l, true).unwrap().is_empty());
    }

    #[test]
    fn empty_orbit_is_an_error() {
        let (o, l) = prime_orbit(1, false);
        let r = apply_average(&SparseFunction::delta(vec![0]), &o, &l, true);
        assert!(matches!(r, Err(Error::ZeroNormalization(_))));
    }

    #[test]
    fn singular_of_delta_is_antisymmetric() {
        let (o, l) = prime_orbit(10, true);
        let g = apply_singular(&SparseFunction::delta(vec![0]), &CZKernel::Hilbert, &o, &l).unwrap();
        for p in [2i64, 3, 5, 7] {
            let expect = (p as f64).ln() / (2.0 * p as f64);
            assert!((g.get(&[p]).re - expect).abs() < 1e-15);
            assert!((g.get(&[-p]).re + expect).abs() < 1e-15);
        }
        assert!(g.sum().norm() < 1e-15);
        let (o1, l1) = prime_orbit(1, true);
        assert!(apply_singular(&SparseFunction::delta(vec![0]), &CZKernel::Hilbert, &o1, &l1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn origin_in_singular_orbit_is_rejected() {
        let primes = sieve_primes(100).unwrap();
        let g = build_gamma(1, 1).unwrap();
        let o = enumerate_orbit(&ConvexBody::interval(), 5, OrbitShape::new(1, 0, true), &g, &primes, 100).unwrap();
        let r = apply_singular(&SparseFunction::delta(vec![0]), &CZKernel::Hilbert, &o, &Lift::identity(&g));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn builtin_kernels_meet_size_condition() {
        assert!(CZKernel::Hilbert.size_condition(10_000, 1) <= 1.0 + 1e-12);
        for k in 2..=4 {
            let v = CZKernel::Riesz { k }.size_condition(10_000, k as u64);
            assert!(v <= 1.0 + 1e-12, "k = {k}: {v}");
            assert!(v > 0.9);
        }
    }

    #[test]
    fn builtin_kernels_cancel_on_shells() {
        for (kernel, body) in [
            (CZKernel::Hilbert, ConvexBody::interval()),
            (CZKernel::Riesz { k: 2 }, ConvexBody::cube(2)),
            (CZKernel::Riesz { k: 2 }, ConvexBody::ball(2)),
        ] {
            assert!(kernel.cancellation_condition(&body, 20, 3).unwrap() < 1e-12);
        }
    }

    #[test]
    fn riesz_gradient_matches_finite_differences() {
        let k = CZKernel::Riesz { k: 3 };
        let x = [0.7, -1.3, 2.1];
        let g = k.grad(&x);
        for j in 0..3 {
            let mut a = x;
            let mut b = x;
            a[j] += 1e-6;
            b[j] -= 1e-6;
            let fd = (k.eval(&a) - k.eval(&b)) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn telescoping_average_example() {
        let primes = sieve_primes(100).unwrap();
        let g = build_gamma(1, 1).unwrap();
        let setup = TelescopeSetup {
            body: ConvexBody::interval(),
            shape: OrbitShape::new(0, 1, false),
            lift: Lift::identity(&g),
            kernel: None,
        };
        let t = telescoping_table(TelescopeKind::Average, 5, 10, &setup, &primes).unwrap();
        let (direct, closed) = t.lookup(&[2]).unwrap();
        let expect = (1.0 / 30f64.ln() - 1.0 / 210f64.ln()) * 2f64.ln();
        assert!((closed - expect).abs() < 1e-15);
        assert!((direct - expect).abs() < 1e-15);
        assert!((expect - 0.0742).abs() < 1e-4);
        assert!(t.identity_error() < 1e-15);
    }

    #[test]
    fn telescoping_singular_is_shell_mass() {
        let primes = sieve_primes(100).unwrap();
        let g = build_gamma(1, 1).unwrap();
        let setup = TelescopeSetup {
            body: ConvexBody::interval(),
            shape: OrbitShape::new(0, 1, true),
            lift: Lift::identity(&g),
            kernel: Some(CZKernel::Hilbert),
        };
        let r = telescoping_l1(TelescopeKind::Singular, 5, 20, &setup, &primes, 1.0).unwrap();
        let expect: f64 = [7.0f64, 11.0, 13.0, 17.0, 19.0].iter().map(|p| p.ln() / p).sum();
        assert!((r.lhs - expect).abs() < 1e-13);
        assert!(r.identity_error < 1e-15);
        assert!(telescoping_l1(TelescopeKind::Singular, 5, 5, &setup, &primes, 1.0).is_err());
    }

    #[test]
    fn comparison_without_primes_vanishes() {
        let primes = sieve_primes(100).unwrap();
        let g = build_gamma(1, 1).unwrap();
        let r = compare_weighted_unweighted(
            &SparseFunction::delta(vec![0]),
            &Lift::identity(&g),
            &ConvexBody::interval(),
            OrbitShape::new(1, 0, false),
            &[4, 8, 16],
            &primes,
            1.0,
        )
        .unwrap();
        assert!(r.rows.iter().all(|row| row.relative_norm == Some(0.0)));
        let r = compare_weighted_unweighted(
            &SparseFunction::delta(vec![0]),
            &Lift::identity(&g),
            &ConvexBody::interval(),
            OrbitShape::new(0, 1, false),
            &[1, 8, 16],
            &primes,
            1.0,
        )
        .unwrap();
        assert!(r.rows[0].skipped);
    }

    #[test]
    fn fourier_of_translate() {
        let f = SparseFunction::random(2, 5, 4, 9);
        let v = [3, -2];
        let xi = [0.137, 0.29];
        let lhs = f.translate(&v).fourier(&xi);
        let rhs = f.fourier(&xi) * phase(xi[0] * 3.0 - xi[1] * 2.0);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
