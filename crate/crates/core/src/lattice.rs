//! Multi-indices, the canonical polynomial map and its lift, convex bodies and
//! enumeration of weighted prime/lattice orbits.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::numtheory::PrimeTable;

pub const GAMMA_CAP: u64 = 1_000_000;
/// Largest magnitude allowed for a coordinate of `Q(n, p)`.
pub const IMAGE_BOUND: i128 = 1 << 62;
pub const DEFAULT_ORBIT_CAP: usize = 50_000_000;

/// The index set `Γ = {γ ∈ [0, degree]^k \ {0}}` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    k: usize,
    degree: u32,
    gammas: Vec<Vec<u32>>,
    orders: Vec<u32>,
}

impl MultiIndexSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Cardinality `d`.
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn gammas(&self) -> &[Vec<u32>] {
        &self.gammas
    }

    /// `|γ|` per entry, the diagonal of the dilation matrix `A`.
    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn position(&self, gamma: &[u32]) -> Option<usize> {
        self.gammas.binary_search_by(|g| g.as_slice().cmp(gamma)).ok()
    }

    /// Restricts to a subset of entries (kept in lexicographic order).
    ///
    /// Used for reduced structures such as `Γ = {1, 2}` inside `k = 1`.
    pub fn select(&self, keep: &[Vec<u32>]) -> Result<Self> {
        let mut gammas: Vec<Vec<u32>> = Vec::with_capacity(keep.len());
        for g in keep {
            if self.position(g).is_none() {
                return Err(Error::Validation(format!("{g:?} is not in Γ")));
            }
            gammas.push(g.clone());
        }
        gammas.sort();
        gammas.dedup();
        let orders = gammas.iter().map(|g| g.iter().sum()).collect();
        Ok(Self {
            k: self.k,
            degree: self.degree,
            gammas,
            orders,
        })
    }

    /// `Q(x) = (x^γ : γ ∈ Γ)` in exact integer arithmetic.
    pub fn image(&self, x: &[i64]) -> Result<Vec<i64>> {
        let mut out = Vec::with_capacity(self.gammas.len());
        self.image_into(x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn image_into(&self, x: &[i64], out: &mut Vec<i64>) -> Result<()> {
        debug_assert_eq!(x.len(), self.k);
        for g in &self.gammas {
            let mut v: i128 = 1;
            for (&xi, &e) in x.iter().zip(g) {
                for _ in 0..e {
                    v *= xi as i128;
                    if v.abs() > IMAGE_BOUND {
                        return Err(Error::Overflow(format!(
                            "monomial x^{g:?} at {x:?} exceeds 2^62"
                        )));
                    }
                }
            }
            out.push(v as i64);
        }
        Ok(())
    }

    /// `t^A v`.
    pub fn dilate(&self, t: f64, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.orders)
            .map(|(x, &o)| x * t.powi(o as i32))
            .collect()
    }

    /// `|t^A v|_∞`.
    pub fn dilated_sup(&self, t: f64, v: &[f64]) -> f64 {
        self.dilate(t, v).into_iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn build_gamma(k: usize, degree: u32) -> Result<MultiIndexSet> {
    if k == 0 || degree == 0 {
        return Err(Error::Domain(format!("need k >= 1 and degree >= 1, got ({k}, {degree})")));
    }
    let total = (degree as u128 + 1)
        .checked_pow(k as u32)
        .map(|v| v - 1)
        .unwrap_or(u128::MAX);
    if total > GAMMA_CAP as u128 {
        return Err(Error::Size {
            what: format!("Γ for k = {k}, degree = {degree}"),
            count: total,
            cap: GAMMA_CAP as u128,
        });
    }
    let mut gammas = Vec::with_capacity(total as usize);
    let mut cur = vec![0u32; k];
    loop {
        // odometer: last coordinate runs fastest, which is lexicographic order
        let mut j = k;
        loop {
            if j == 0 {
                let orders = gammas.iter().map(|g: &Vec<u32>| g.iter().sum()).collect();
                return Ok(MultiIndexSet {
                    k,
                    degree,
                    gammas,
                    orders,
                });
            }
            j -= 1;
            if cur[j] < degree {
                cur[j] += 1;
                for c in cur.iter_mut().skip(j + 1) {
                    *c = 0;
                }
                break;
            }
        }
        gammas.push(cur.clone());
    }
}

/// A polynomial map `P: Z^k → Z^{d0}` with integer coefficients and no constant terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialMap {
    k: usize,
    /// One list of `(exponent, coefficient)` terms per output coordinate.
    components: Vec<BTreeMap<Vec<u32>, i64>>,
    degree: u32,
}

impl PolynomialMap {
    /// `degree` defaults to the total degree of the map.
    pub fn new(k: usize, components: Vec<Vec<(Vec<u32>, i64)>>) -> Result<Self> {
        if k == 0 || components.is_empty() {
            return Err(Error::Domain("polynomial map needs k >= 1 and d0 >= 1".into()));
        }
        let mut comps = Vec::with_capacity(components.len());
        let mut degree = 0;
        for terms in components {
            let mut m: BTreeMap<Vec<u32>, i64> = BTreeMap::new();
            for (g, c) in terms {
                if g.len() != k {
                    return Err(Error::Validation(format!("exponent {g:?} has wrong arity")));
                }
                if g.iter().all(|&e| e == 0) && c != 0 {
                    return Err(Error::Validation("constant term present".into()));
                }
                *m.entry(g).or_insert(0) += c;
            }
            m.retain(|_, c| *c != 0);
            degree = degree.max(m.keys().map(|g| g.iter().sum::<u32>()).max().unwrap_or(0));
            comps.push(m);
        }
        Ok(Self {
            k,
            components: comps,
            degree: degree.max(1),
        })
    }

    /// Overrides the degree used to build `Γ` (must cover every exponent component).
    pub fn with_degree(mut self, degree: u32) -> Result<Self> {
        let needed = self.max_component_exponent();
        if degree < needed.max(1) {
            return Err(Error::Validation(format!(
                "degree {degree} does not cover exponent component {needed}"
            )));
        }
        self.degree = degree;
        Ok(self)
    }

    fn max_component_exponent(&self) -> u32 {
        self.components
            .iter()
            .flat_map(|m| m.keys())
            .flat_map(|g| g.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d0(&self) -> usize {
        self.components.len()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn evaluate(&self, x: &[i64]) -> Vec<i128> {
        self.components
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .map(|(g, &c)| {
                        let mono: i128 = x
                            .iter()
                            .zip(g)
                            .map(|(&xi, &e)| (xi as i128).pow(e))
                            .product();
                        c as i128 * mono
                    })
                    .sum()
            })
            .collect()
    }

    /// The identity map `Q` itself expressed over a given `Γ`.
    pub fn canonical(gamma: &MultiIndexSet) -> Self {
        let components = gamma
            .gammas()
            .iter()
            .map(|g| std::iter::once((g.clone(), 1i64)).collect())
            .collect();
        Self {
            k: gamma.k(),
            components,
            degree: gamma.degree(),
        }
    }
}

/// The linear map `L: Z^d → Z^{d0}` with `L ∘ Q = P`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lift {
    pub gamma: MultiIndexSet,
    /// `d0 × d`, row-major.
    pub matrix: Vec<Vec<i64>>,
}

impl Lift {
    pub fn identity(gamma: &MultiIndexSet) -> Self {
        let d = gamma.len();
        let matrix = (0..d)
            .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
            .collect();
        Self {
            gamma: gamma.clone(),
            matrix,
        }
    }

    pub fn d0(&self) -> usize {
        self.matrix.len()
    }

    pub fn apply(&self, v: &[i64]) -> Result<Vec<i64>> {
        self.matrix
            .iter()
            .map(|row| {
                let s: i128 = row.iter().zip(v).map(|(&c, &x)| c as i128 * x as i128).sum();
                i64::try_from(s).map_err(|_| Error::Overflow(format!("L·v = {s} overflows i64")))
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.len() == self.gamma.len()
            && self
                .matrix
                .iter()
                .enumerate()
                .all(|(i, row)| row.iter().enumerate().all(|(j, &c)| c == i64::from(i == j)))
    }
}

/// Builds `Γ` from `P.degree()` and reads `L` off by coefficient matching, then
/// checks `L Q(x) = P(x)` on random integer points in `[-10, 10]^k`.
pub fn lift_polynomial(p: &PolynomialMap) -> Result<Lift> {
    let gamma = build_gamma(p.k(), p.degree())?;
    let mut matrix = vec![vec![0i64; gamma.len()]; p.d0()];
    for (j, terms) in p.components.iter().enumerate() {
        for (g, &c) in terms {
            let pos = gamma
                .position(g)
                .ok_or_else(|| Error::Validation(format!("monomial {g:?} outside Γ")))?;
            matrix[j][pos] = c;
        }
    }
    let lift = Lift { gamma, matrix };
    verify_lift(p, &lift, 100, 0x5eed)?;
    Ok(lift)
}

pub fn verify_lift(p: &PolynomialMap, lift: &Lift, samples: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let x: Vec<i64> = (0..p.k()).map(|_| rng.gen_range(-10..=10)).collect();
        let q = lift.gamma.image(&x)?;
        let lhs: Vec<i128> = lift
            .matrix
            .iter()
            .map(|row| row.iter().zip(&q).map(|(&c, &v)| c as i128 * v as i128).sum())
            .collect();
        let rhs = p.evaluate(&x);
        if lhs != rhs {
            return Err(Error::Validation(format!(
                "lift identity fails at {x:?}: L Q = {lhs:?}, P = {rhs:?}"
            )));
        }
    }
    Ok(())
}

pub type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum BodyKind {
    /// `[-1, 1]^k`.
    Cube,
    /// Closed Euclidean unit ball.
    Ball,
    /// Caller-supplied membership for the unit body.
    Custom {
        predicate: Predicate,
        iota: f64,
        volume: Option<f64>,
    },
}

impl fmt::Debug for BodyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cube => write!(f, "Cube"),
            Self::Ball => write!(f, "Ball"),
            Self::Custom { iota, volume, .. } => f
                .debug_struct("Custom")
                .field("iota", iota)
                .field("volume", volume)
                .finish_non_exhaustive(),
        }
    }
}

/// Volume together with its Monte-Carlo standard error (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub value: f64,
    pub std_error: f64,
}

/// A bounded convex body `B ⊂ [-1, 1]^k` containing `[-ι, ι]^k`.
///
/// Built-in bodies are closed, so integer points on the boundary of `B_N` count.
#[derive(Debug, Clone)]
pub struct ConvexBody {
    kind: BodyKind,
    k: usize,
}

impl ConvexBody {
    pub fn cube(k: usize) -> Self {
        Self {
            kind: BodyKind::Cube,
            k,
        }
    }

    /// The interval `[-1, 1]`.
    pub fn interval() -> Self {
        Self::cube(1)
    }

    pub fn ball(k: usize) -> Self {
        Self {
            kind: BodyKind::Ball,
            k,
        }
    }

    pub fn custom(k: usize, predicate: Predicate, iota: f64, volume: Option<f64>) -> Self {
        Self {
            kind: BodyKind::Custom {
                predicate,
                iota,
                volume,
            },
            k,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, BodyKind::Custom { .. })
    }

    pub fn iota(&self) -> f64 {
        match &self.kind {
            BodyKind::Cube => 1.0,
            BodyKind::Ball => 1.0 / (self.k as f64).sqrt(),
            BodyKind::Custom { iota, .. } => *iota,
        }
    }

    /// Membership of `x` in the unit body.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            BodyKind::Cube => x.iter().all(|v| v.abs() <= 1.0),
            BodyKind::Ball => x.iter().map(|v| v * v).sum::<f64>() <= 1.0,
            BodyKind::Custom { predicate, .. } => predicate(x),
        }
    }

    /// `x ∈ B_λ ⇔ x/λ ∈ B`.
    pub fn contains_scaled(&self, x: &[f64], lambda: f64) -> bool {
        let y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
        self.contains(&y)
    }

    /// Exact membership of an integer point in `B_N`.
    pub fn contains_lattice(&self, x: &[i64], n: u64) -> bool {
        match &self.kind {
            BodyKind::Cube => x.iter().all(|v| v.unsigned_abs() <= n),
            BodyKind::Ball => {
                let s: u128 = x.iter().map(|&v| (v as i128 * v as i128) as u128).sum();
                s <= n as u128 * n as u128
            }
            BodyKind::Custom { .. } => {
                let y: Vec<f64> = x.iter().map(|&v| v as f64 / n as f64).collect();
                self.contains(&y)
            }
        }
    }

    /// Smallest `n >= 1` with `x ∈ B_n` (capped search for custom bodies).
    pub fn entry_scale(&self, x: &[i64]) -> Option<u64> {
        match &self.kind {
            BodyKind::Cube => Some(x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0).max(1)),
            BodyKind::Ball => {
                let s: u128 = x.iter().map(|&v| (v as i128 * v as i128) as u128).sum();
                let mut r = (s as f64).sqrt().ceil() as u128;
                while r > 0 && (r - 1) * (r - 1) >= s {
                    r -= 1;
                }
                while r * r < s {
                    r += 1;
                }
                Some((r as u64).max(1))
            }
            BodyKind::Custom { .. } => {
                let bound = x.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0).max(1);
                let lo = ((bound as f64) / self.iota().max(1e-12)).ceil() as u64 + 1;
                (1..=lo.max(bound)).find(|&n| self.contains_lattice(x, n))
            }
        }
    }

    /// Volume of the full body.
    pub fn volume(&self) -> Volume {
        match &self.kind {
            BodyKind::Cube => Volume {
                value: 2f64.powi(self.k as i32),
                std_error: 0.0,
            },
            BodyKind::Ball => Volume {
                value: unit_ball_volume(self.k),
                std_error: 0.0,
            },
            BodyKind::Custom { volume: Some(v), .. } => Volume {
                value: *v,
                std_error: 0.0,
            },
            BodyKind::Custom { .. } => self.monte_carlo_volume(false, 200_000, 0xb0d1),
        }
    }

    /// Volume of `B ∩ (0, ∞)^k`, the region swept by orbits over `N^{k'} × P^{k''}`.
    pub fn positive_volume(&self) -> Volume {
        match &self.kind {
            BodyKind::Cube | BodyKind::Ball => {
                let v = self.volume();
                Volume {
                    value: v.value / 2f64.powi(self.k as i32),
                    std_error: 0.0,
                }
            }
            BodyKind::Custom { .. } => self.monte_carlo_volume(true, 200_000, 0xb0d2),
        }
    }

    pub fn monte_carlo_volume(&self, positive: bool, samples: usize, seed: u64) -> Volume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo: f64 = if positive { 0.0 } else { -1.0 };
        let box_vol = (1.0 - lo).powi(self.k as i32);
        let mut hits = 0usize;
        let mut x = vec![0.0; self.k];
        for _ in 0..samples {
            for v in x.iter_mut() {
                *v = rng.gen_range(lo..1.0);
            }
            if self.contains(&x) {
                hits += 1;
            }
        }
        let p = hits as f64 / samples as f64;
        Volume {
            value: p * box_vol,
            std_error: box_vol * (p * (1.0 - p) / samples as f64).sqrt(),
        }
    }

    /// Checks `[-ι, ι]^k ⊆ B ⊆ [-1, 1]^k` on a grid over the boundary of both cubes.
    pub fn verify_inclusion(&self, per_axis: usize) -> Result<()> {
        let iota = self.iota();
        let grid: Vec<f64> = (0..=per_axis)
            .map(|i| -1.0 + 2.0 * i as f64 / per_axis as f64)
            .collect();
        let mut x = vec![0.0; self.k];
        let total = grid.len().pow(self.k as u32);
        for idx in 0..total {
            let mut r = idx;
            for v in x.iter_mut() {
                *v = grid[r % grid.len()];
                r /= grid.len();
            }
            let on_face = x.iter().any(|v| v.abs() == 1.0);
            if !on_face {
                continue;
            }
            let inner: Vec<f64> = x.iter().map(|v| v * iota * (1.0 - 1e-12)).collect();
            if !self.contains(&inner) {
                return Err(Error::Validation(format!("{inner:?} ∈ [-ι, ι]^k but not in B")));
            }
            let outer: Vec<f64> = x.iter().map(|v| v * (1.0 + 1e-9)).collect();
            if self.contains(&outer) {
                return Err(Error::Validation(format!("{outer:?} ∈ B but outside [-1, 1]^k")));
            }
        }
        Ok(())
    }
}

fn unit_ball_volume(k: usize) -> f64 {
    // V_k = 2π/k · V_{k-2}, V_0 = 1, V_1 = 2
    let mut v = [1.0, 2.0];
    if k < 2 {
        return v[k];
    }
    let mut cur = 0.0;
    for j in 2..=k {
        cur = 2.0 * PI / j as f64 * v[j % 2];
        v[j % 2] = cur;
    }
    cur
}

/// How the orbit ranges over each coordinate block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitShape {
    /// Number of integer coordinates `k'`.
    pub kprime: usize,
    /// Number of prime coordinates `k''`.
    pub kdoubleprime: usize,
    /// `Z^{k'} × (±P)^{k''}` instead of `N^{k'} × P^{k''}`.
    pub signed: bool,
}

impl OrbitShape {
    pub fn new(kprime: usize, kdoubleprime: usize, signed: bool) -> Self {
        Self {
            kprime,
            kdoubleprime,
            signed,
        }
    }

    pub fn k(&self) -> usize {
        self.kprime + self.kdoubleprime
    }

    /// Candidate values per axis at scale `n`.
    fn axes(&self, n: u64, primes: &PrimeTable) -> Vec<Vec<i64>> {
        let n_i = n as i64;
        let int_axis: Vec<i64> = if self.signed {
            (-n_i..=n_i).collect()
        } else {
            (1..=n_i).collect()
        };
        let prime_axis: Vec<i64> = if self.signed {
            primes.signed_up_to(n)
        } else {
            primes.primes_up_to(n).iter().map(|&p| p as i64).collect()
        };
        let mut axes = vec![int_axis; self.kprime];
        axes.extend(std::iter::repeat(prime_axis).take(self.kdoubleprime));
        axes
    }
}

/// Columnar storage of `{(n, p) ∈ B_N}` with log weights and `Q`-images.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOrbit {
    pub n: u64,
    pub shape: OrbitShape,
    pub gamma: MultiIndexSet,
    /// `k` coordinates per point.
    pub points: Vec<i64>,
    /// `∏ ln |p_j|` per point.
    pub weights: Vec<f64>,
    /// `d` coordinates of `Q(n, p)` per point.
    pub images: Vec<i64>,
}

impl WeightedOrbit {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn k(&self) -> usize {
        self.shape.k()
    }

    pub fn d(&self) -> usize {
        self.gamma.len()
    }

    pub fn point(&self, i: usize) -> &[i64] {
        let k = self.k();
        &self.points[i * k..(i + 1) * k]
    }

    pub fn image(&self, i: usize) -> &[i64] {
        let d = self.d();
        &self.images[i * d..(i + 1) * d]
    }

    /// `ϑ_B(N)`: pairwise sum of the weights.
    pub fn theta(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `π_B(N)`.
    pub fn count(&self) -> usize {
        self.len()
    }

    pub fn contains_origin(&self) -> bool {
        (0..self.len()).any(|i| self.point(i).iter().all(|&v| v == 0))
    }

    /// Sub-orbit of points satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[i64]) -> bool) -> Self {
        let mut out = Self {
            n: self.n,
            shape: self.shape,
            gamma: self.gamma.clone(),
            points: Vec::new(),
            weights: Vec::new(),
            images: Vec::new(),
        };
        for i in 0..self.len() {
            if keep(self.point(i)) {
                out.points.extend_from_slice(self.point(i));
                out.weights.push(self.weights[i]);
                out.images.extend_from_slice(self.image(i));
            }
        }
        out
    }
}

fn point_weight(x: &[i64], kprime: usize) -> f64 {
    x[kprime..]
        .iter()
        .map(|&p| (p.unsigned_abs() as f64).ln())
        .product()
}

/// Walks the product of `axes[1..]` for a fixed leading value, calling `visit`
/// on each point inside `B_N`.
fn walk_tail(
    axes: &[Vec<i64>],
    body: &ConvexBody,
    n: u64,
    x: &mut Vec<i64>,
    visit: &mut dyn FnMut(&[i64]) -> Result<()>,
) -> Result<()> {
    let depth = x.len();
    if depth == axes.len() {
        if body.contains_lattice(x, n) {
            visit(x)?;
        }
        return Ok(());
    }
    for &v in &axes[depth] {
        x.push(v);
        let r = walk_tail(axes, body, n, x, visit);
        x.pop();
        r?;
    }
    Ok(())
}

fn check_inputs(body: &ConvexBody, shape: &OrbitShape, primes: &PrimeTable, n: u64) -> Result<()> {
    if body.k() != shape.k() {
        return Err(Error::Domain(format!(
            "body dimension {} differs from k' + k'' = {}",
            body.k(),
            shape.k()
        )));
    }
    if shape.k() == 0 {
        return Err(Error::Domain("k = k' + k'' must be positive".into()));
    }
    if shape.kdoubleprime > 0 {
        primes.ensure_covers(n)?;
    }
    Ok(())
}

/// All `(n, p) ∈ B_N` with weights and images, enumerated in lexicographic
/// order of the axis values (parallel over the leading coordinate).
pub fn enumerate_orbit(
    body: &ConvexBody,
    n: u64,
    shape: OrbitShape,
    gamma: &MultiIndexSet,
    primes: &PrimeTable,
    cap: usize,
) -> Result<WeightedOrbit> {
    check_inputs(body, &shape, primes, n)?;
    if gamma.k() != shape.k() {
        return Err(Error::Domain("Γ arity differs from k".into()));
    }
    let axes = shape.axes(n, primes);
    let k = shape.k();
    let d = gamma.len();
    let chunks: Vec<Result<(Vec<i64>, Vec<f64>, Vec<i64>)>> = axes[0]
        .par_iter()
        .map(|&lead| {
            let mut pts = Vec::new();
            let mut ws = Vec::new();
            let mut ims = Vec::new();
            let mut x = vec![lead];
            walk_tail(&axes, body, n, &mut x, &mut |p| {
                if ws.len() >= cap {
                    return Err(Error::Size {
                        what: format!("orbit at N = {n}"),
                        count: ws.len() as u128 + 1,
                        cap: cap as u128,
                    });
                }
                pts.extend_from_slice(p);
                ws.push(point_weight(p, shape.kprime));
                gamma.image_into(p, &mut ims)?;
                Ok(())
            })?;
            Ok((pts, ws, ims))
        })
        .collect();
    let mut orbit = WeightedOrbit {
        n,
        shape,
        gamma: gamma.clone(),
        points: Vec::new(),
        weights: Vec::new(),
        images: Vec::new(),
    };
    for c in chunks {
        let (p, w, i) = c?;
        orbit.points.extend(p);
        orbit.weights.extend(w);
        orbit.images.extend(i);
    }
    if orbit.len() > cap {
        return Err(Error::Size {
            what: format!("orbit at N = {n}"),
            count: orbit.len() as u128,
            cap: cap as u128,
        });
    }
    debug_assert_eq!(orbit.points.len(), orbit.len() * k);
    debug_assert_eq!(orbit.images.len(), orbit.len() * d);
    Ok(orbit)
}

/// `(π_B(N), ϑ_B(N))` without storing the points.
pub fn counting(
    body: &ConvexBody,
    n: u64,
    shape: OrbitShape,
    primes: &PrimeTable,
) -> Result<(u64, f64)> {
    check_inputs(body, &shape, primes, n)?;
    let axes = shape.axes(n, primes);
    let partial: Vec<Result<(u64, f64)>> = axes[0]
        .par_iter()
        .map(|&lead| {
            let mut count = 0u64;
            let mut ws = Vec::new();
            let mut x = vec![lead];
            walk_tail(&axes, body, n, &mut x, &mut |p| {
                count += 1;
                ws.push(point_weight(p, shape.kprime));
                Ok(())
            })?;
            Ok((count, pairwise_sum(&ws)))
        })
        .collect();
    let mut count = 0;
    let mut sums = Vec::with_capacity(partial.len());
    for r in partial {
        let (c, s) = r?;
        count += c;
        sums.push(s);
    }
    Ok((count, pairwise_sum(&sums)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::sieve_primes;

    #[test]
    fn gamma_examples() {
        let g = build_gamma(1, 2).unwrap();
        assert_eq!(g.gammas(), &[vec![1], vec![2]]);
        let g = build_gamma(2, 1).unwrap();
        assert_eq!(g.gammas(), &[vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(g.orders(), &[1, 1, 2]);
        assert_eq!(build_gamma(2, 2).unwrap().len(), 8);
        assert!(matches!(build_gamma(20, 2), Err(Error::Size { .. })));
        assert!(build_gamma(0, 2).is_err());
    }

    #[test]
    fn lift_examples() {
        let p = PolynomialMap::new(1, vec![vec![(vec![2], 1)]]).unwrap();
        let l = lift_polynomial(&p).unwrap();
        assert_eq!(l.matrix, vec![vec![0, 1]]);

        let p = PolynomialMap::new(
            2,
            vec![
                vec![(vec![1, 0], 1), (vec![0, 1], 1)],
                vec![(vec![1, 1], 1)],
            ],
        )
        .unwrap()
        .with_degree(1)
        .unwrap();
        let l = lift_polynomial(&p).unwrap();
        assert_eq!(l.matrix, vec![vec![1, 1, 0], vec![0, 0, 1]]);

        let p = PolynomialMap::new(1, vec![vec![(vec![1], 3)]]).unwrap();
        let l = lift_polynomial(&p).unwrap();
        assert_eq!(l.matrix, vec![vec![3]]);
    }

    #[test]
    fn constant_term_rejected() {
        let r = PolynomialMap::new(1, vec![vec![(vec![0], 5)]]);
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn degree_override_must_cover_exponents() {
        let p = PolynomialMap::new(1, vec![vec![(vec![2], 1)]]).unwrap();
        assert!(p.with_degree(1).is_err());
    }

    #[test]
    fn body_inclusions() {
        for b in [ConvexBody::cube(2), ConvexBody::ball(2), ConvexBody::ball(3), ConvexBody::interval()] {
            b.verify_inclusion(16).unwrap();
        }
        assert!((ConvexBody::ball(2).volume().value - PI).abs() < 1e-12);
        assert!((ConvexBody::ball(3).volume().value - 4.0 * PI / 3.0).abs() < 1e-12);
        assert_eq!(ConvexBody::cube(3).positive_volume().value, 1.0);
    }

    #[test]
    fn custom_body_monte_carlo_volume() {
        let diamond: Predicate = Arc::new(|x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>() <= 1.0);
        let b = ConvexBody::custom(2, diamond, 0.5, None);
        let v = b.volume();
        assert!((v.value - 2.0).abs() < 5.0 * v.std_error + 1e-9, "{v:?}");
        assert!(v.std_error > 0.0);
        b.verify_inclusion(8).unwrap();
    }

    #[test]
    fn entry_scales() {
        let b = ConvexBody::ball(2);
        assert_eq!(b.entry_scale(&[3, 4]), Some(5));
        assert_eq!(b.entry_scale(&[3, 5]), Some(6));
        assert_eq!(ConvexBody::cube(2).entry_scale(&[-7, 2]), Some(7));
    }

    #[test]
    fn orbit_examples() {
        let primes = sieve_primes(100).unwrap();
        let g = build_gamma(1, 1).unwrap();
        let o = enumerate_orbit(&ConvexBody::interval(), 10, OrbitShape::new(0, 1, false), &g, &primes, 1000)
            .unwrap();
        assert_eq!(o.points, vec![2, 3, 5, 7]);
        assert!((o.theta() - 210f64.ln()).abs() < 1e-12);

        let o = enumerate_orbit(&ConvexBody::cube(1), 3, OrbitShape::new(1, 0, false), &g, &primes, 1000)
            .unwrap();
        assert_eq!(o.points, vec![1, 2, 3]);
        assert_eq!(o.weights, vec![1.0, 1.0, 1.0]);

        let o = enumerate_orbit(&ConvexBody::interval(), 10, OrbitShape::new(0, 1, true), &g, &primes, 1000)
            .unwrap();
        assert_eq!(o.points, vec![-7, -5, -3, -2, 2, 3, 5, 7]);
        assert_eq!(o.weights[0], 7f64.ln());
    }

    #[test]
    fn orbit_cap_reports_count() {
        let primes = sieve_primes(100).unwrap();
        let g = build_gamma(1, 1).unwrap();
        let r = enumerate_orbit(&ConvexBody::interval(), 50, OrbitShape::new(1, 0, false), &g, &primes, 10);
        assert!(matches!(r, Err(Error::Size { .. })));
    }

    #[test]
    fn counting_examples() {
        let primes = sieve_primes(100).unwrap();
        let (pi, th) = counting(&ConvexBody::interval(), 10, OrbitShape::new(0, 1, false), &primes).unwrap();
        assert_eq!(pi, 4);
        assert!((th - 5.3471).abs() < 1e-4);
        let (pi, _) = counting(&ConvexBody::cube(2), 10, OrbitShape::new(1, 1, false), &primes).unwrap();
        assert_eq!(pi, 40);
        let (pi, th) = counting(&ConvexBody::ball(2), 1, OrbitShape::new(1, 1, false), &primes).unwrap();
        assert_eq!((pi, th), (0, 0.0));
    }

    #[test]
    fn sieve_coverage_is_enforced() {
        let primes = sieve_primes(20).unwrap();
        let r = counting(&ConvexBody::interval(), 50, OrbitShape::new(0, 1, false), &primes);
        assert!(matches!(r, Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn image_overflow_is_reported() {
        let g = build_gamma(1, 3).unwrap();
        assert!(matches!(g.image(&[1 << 21]), Err(Error::Overflow(_))));
    }
}
