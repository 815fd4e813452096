//! Discrete multipliers, their continuous model integrals, Gaussian sums and
//! the major-arc approximation.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BodyKind, ConvexBody, MultiIndexSet, WeightedOrbit};
use crate::numeric::{frac_mul, pairwise_sum_complex, phase, torus, GaussRule, RootsOfUnity};
use crate::numtheory::{factorize, units};
use crate::operators::{check_kernel_body, shell_integral, CZKernel};

/// Largest `q^k` for which Gaussian sums are evaluated by direct summation.
pub const GAUSS_DIRECT_CAP: u128 = 100_000_000;

/// `ξ = a/q + θ` with `a ∈ A_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalFrequency {
    pub q: u64,
    pub a: Vec<u64>,
    pub theta: Vec<f64>,
}

impl RationalFrequency {
    /// Entries of `a` are taken in `[0, q]`; `gcd(q, a_1, …, a_d) = 1` is required.
    pub fn new(a: Vec<u64>, q: u64, theta: Vec<f64>) -> Result<Self> {
        check_units_vector(&a, q)?;
        if theta.len() != a.len() {
            return Err(Error::Domain("θ and a differ in length".into()));
        }
        Ok(Self { q, a, theta })
    }

    pub fn exact(a: Vec<u64>, q: u64) -> Result<Self> {
        let d = a.len();
        Self::new(a, q, vec![0.0; d])
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    /// Components reduced to `[0, 1)`.
    pub fn value(&self) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.theta)
            .map(|(&a, &t)| torus(a as f64 / self.q as f64 + t))
            .collect()
    }

    /// `max_γ |θ_γ| N^{|γ|}`.
    pub fn scale_l(&self, gamma: &MultiIndexSet, n: u64) -> f64 {
        self.theta
            .iter()
            .zip(gamma.orders())
            .map(|(t, &o)| t.abs() * (n as f64).powi(o as i32))
            .fold(0.0, f64::max)
    }
}

fn check_units_vector(a: &[u64], q: u64) -> Result<()> {
    if q == 0 {
        return Err(Error::Domain("q = 0".into()));
    }
    if let Some(v) = a.iter().find(|&&v| v > q) {
        return Err(Error::Domain(format!("a component {v} is outside [0, {q}]")));
    }
    let g = a.iter().fold(q, |g, &v| g.gcd(&v));
    if g != 1 {
        return Err(Error::Domain(format!("gcd(q, a) = {g} for a = {a:?}, q = {q}: a ∉ A_q")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierKind {
    DiscreteAverage,
    DiscreteSingular,
    ContinuousAverage,
    ContinuousSingular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSample {
    pub xi: Vec<f64>,
    pub value: Complex64,
    pub n: u64,
    pub kind: MultiplierKind,
}

fn orbit_phase(orbit: &WeightedOrbit, i: usize, xi: &[f64]) -> Complex64 {
    let t: f64 = xi.iter().zip(orbit.image(i)).map(|(&c, &v)| frac_mul(c, v)).sum();
    phase(t)
}

fn rational_phase(orbit: &WeightedOrbit, i: usize, freq: &RationalFrequency, roots: &RootsOfUnity) -> Complex64 {
    let q = freq.q as i128;
    let img = orbit.image(i);
    let r: i128 = freq
        .a
        .iter()
        .zip(img)
        .map(|(&a, &v)| (a as i128 * v.rem_euclid(q as i64) as i128) % q)
        .sum();
    let t: f64 = freq.theta.iter().zip(img).map(|(&c, &v)| frac_mul(c, v)).sum();
    roots.get(r) * phase(t)
}

fn check_xi(orbit: &WeightedOrbit, xi: &[f64]) -> Result<()> {
    if xi.len() != orbit.d() {
        return Err(Error::Domain(format!("ξ has {} components, d = {}", xi.len(), orbit.d())));
    }
    Ok(())
}

/// `𝔪_N(ξ)` for every `ξ` in `xis`.
pub fn m_hat(xis: &[Vec<f64>], orbit: &WeightedOrbit) -> Result<Vec<Complex64>> {
    let theta = orbit.theta();
    if orbit.is_empty() || theta == 0.0 {
        return Err(Error::ZeroNormalization(format!("ϑ_B({}) = 0", orbit.n)));
    }
    for xi in xis {
        check_xi(orbit, xi)?;
    }
    Ok(xis
        .par_iter()
        .map(|xi| {
            let terms: Vec<Complex64> = (0..orbit.len())
                .map(|i| orbit_phase(orbit, i, xi) * orbit.weights[i])
                .collect();
            pairwise_sum_complex(&terms) / theta
        })
        .collect())
}

/// `𝔪_N(a/q + θ)` with the `a/q` part of each phase taken from exact residues.
pub fn m_hat_rational(freq: &RationalFrequency, orbit: &WeightedOrbit) -> Result<Complex64> {
    let theta = orbit.theta();
    if orbit.is_empty() || theta == 0.0 {
        return Err(Error::ZeroNormalization(format!("ϑ_B({}) = 0", orbit.n)));
    }
    check_xi(orbit, &freq.theta)?;
    let roots = RootsOfUnity::new(freq.q);
    let terms: Vec<Complex64> = (0..orbit.len())
        .map(|i| rational_phase(orbit, i, freq, &roots) * orbit.weights[i])
        .collect();
    Ok(pairwise_sum_complex(&terms) / theta)
}

fn kernel_weights(orbit: &WeightedOrbit, kernel: &CZKernel) -> Result<Vec<f64>> {
    if kernel.k() != orbit.k() {
        return Err(Error::Domain("kernel and orbit dimensions differ".into()));
    }
    if orbit.contains_origin() {
        return Err(Error::Domain("orbit contains the origin, where K is singular".into()));
    }
    Ok((0..orbit.len())
        .map(|i| kernel.eval_lattice(orbit.point(i)) * orbit.weights[i])
        .collect())
}

/// `𝔥_N(ξ)` over a signed orbit.
pub fn h_hat(xis: &[Vec<f64>], orbit: &WeightedOrbit, kernel: &CZKernel) -> Result<Vec<Complex64>> {
    let kw = kernel_weights(orbit, kernel)?;
    for xi in xis {
        check_xi(orbit, xi)?;
    }
    Ok(xis
        .par_iter()
        .map(|xi| {
            let terms: Vec<Complex64> = (0..orbit.len()).map(|i| orbit_phase(orbit, i, xi) * kw[i]).collect();
            pairwise_sum_complex(&terms)
        })
        .collect())
}

pub fn h_hat_rational(freq: &RationalFrequency, orbit: &WeightedOrbit, kernel: &CZKernel) -> Result<Complex64> {
    let kw = kernel_weights(orbit, kernel)?;
    check_xi(orbit, &freq.theta)?;
    let roots = RootsOfUnity::new(freq.q);
    let terms: Vec<Complex64> = (0..orbit.len())
        .map(|i| rational_phase(orbit, i, freq, &roots) * kw[i])
        .collect();
    Ok(pairwise_sum_complex(&terms))
}

/// Region of integration for `Φ_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiDomain {
    /// All of `B`.
    Full,
    /// `B ∩ (0, ∞)^k`, matching orbits over positive integers and primes.
    PositiveOrthant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Panels per cycle of the phase along each axis.
    pub panels_per_cycle: f64,
    /// Required agreement between the two refinement levels.
    pub tol: f64,
    /// Quasi-Monte-Carlo points for custom bodies (coarse level; fine level doubles).
    pub qmc_points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 12,
            panels_per_cycle: 1.0,
            tol: 1e-10,
            qmc_points: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    /// `|fine - coarse|`.
    pub error: f64,
}

fn poly_phase(tau: &[f64], gamma: &MultiIndexSet, x: &[f64]) -> f64 {
    tau.iter()
        .zip(gamma.gammas())
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, g)| t * x.iter().zip(g).map(|(xi, &e)| xi.powi(e as i32)).product::<f64>())
        .sum()
}

/// `∫_a^b e(c t) dt`.
fn linear_phase_integral(c: f64, a: f64, b: f64) -> Complex64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    let z = 2.0 * PI * c * h;
    let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
    phase(c * m) * (2.0 * h * sinc)
}

struct PhiIntegrator<'a> {
    tau: &'a [f64],
    gamma: &'a MultiIndexSet,
    ball: bool,
    positive: bool,
    /// The last coordinate enters the phase linearly and is integrated exactly.
    analytic_last: bool,
    rules: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PhiIntegrator<'_> {
    fn new<'a>(
        tau: &'a [f64],
        gamma: &'a MultiIndexSet,
        ball: bool,
        positive: bool,
        spec: &QuadratureSpec,
        refine: usize,
    ) -> PhiIntegrator<'a> {
        let k = gamma.k();
        let analytic_last = gamma
            .gammas()
            .iter()
            .zip(tau)
            .all(|(g, &t)| t == 0.0 || g[k - 1] <= 1);
        let rule = GaussRule::new(spec.nodes);
        let quad_axes = if analytic_last { k - 1 } else { k };
        let rules = (0..quad_axes)
            .map(|j| {
                let omega: f64 = gamma
                    .gammas()
                    .iter()
                    .zip(tau)
                    .map(|(g, t)| t.abs() * g[j] as f64)
                    .sum();
                let len = match (ball, positive) {
                    (true, true) => FRAC_PI_2,
                    (true, false) => PI,
                    (false, true) => 1.0,
                    (false, false) => 2.0,
                };
                let panels = ((spec.panels_per_cycle * omega * len).ceil() as usize + 2) * refine;
                let (a, b) = match (ball, positive) {
                    (true, true) => (0.0, FRAC_PI_2),
                    (true, false) => (-FRAC_PI_2, FRAC_PI_2),
                    (false, true) => (0.0, 1.0),
                    (false, false) => (-1.0, 1.0),
                };
                rule.composite(a, b, panels)
            })
            .collect();
        PhiIntegrator {
            tau,
            gamma,
            ball,
            positive,
            analytic_last,
            rules,
        }
    }

    /// Integral over the remaining coordinates `x[j..]` given the prefix and
    /// the remaining radius (balls).
    fn integrate(&self, x: &mut Vec<f64>, radius: f64) -> Complex64 {
        let k = self.gamma.k();
        let j = x.len();
        let hi = if self.ball { radius } else { 1.0 };
        let lo = if self.positive { 0.0 } else { -hi };
        if j == k - 1 && self.analytic_last {
            // phase = A + B x_k
            x.push(0.0);
            let a = poly_phase(self.tau, self.gamma, x);
            x[j] = 1.0;
            let b = poly_phase(self.tau, self.gamma, x) - a;
            x.pop();
            return phase(a) * linear_phase_integral(b, lo, hi);
        }
        if j == k {
            return phase(poly_phase(self.tau, self.gamma, x));
        }
        let (nodes, weights) = &self.rules[j];
        let mut terms = Vec::with_capacity(nodes.len());
        for (&u, &w) in nodes.iter().zip(weights) {
            if self.ball {
                // x_j = radius · sin u, the remaining radius is radius · cos u
                let (s, c) = u.sin_cos();
                x.push(radius * s);
                terms.push(self.integrate(x, radius * c) * (w * radius * c));
            } else {
                x.push(u);
                terms.push(self.integrate(x, radius) * w);
            }
            x.pop();
        }
        pairwise_sum_complex(&terms)
    }
}

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const HALTON_BASES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn qmc_average(tau: &[f64], gamma: &MultiIndexSet, body: &ConvexBody, positive: bool, points: usize) -> Result<Complex64> {
    let k = gamma.k();
    if k > HALTON_BASES.len() {
        return Err(Error::Domain(format!("quasi-Monte-Carlo supports k <= {}", HALTON_BASES.len())));
    }
    let lo = if positive { 0.0 } else { -1.0 };
    let mut terms = Vec::new();
    let mut hits = 0usize;
    let mut x = vec![0.0; k];
    for i in 1..=points {
        for (j, v) in x.iter_mut().enumerate() {
            *v = lo + (1.0 - lo) * halton(i, HALTON_BASES[j]);
        }
        if body.contains(&x) {
            hits += 1;
            terms.push(phase(poly_phase(tau, gamma, &x)));
        }
    }
    if hits == 0 {
        return Err(Error::ZeroNormalization("no quasi-Monte-Carlo point fell inside B".into()));
    }
    Ok(pairwise_sum_complex(&terms) / hits as f64)
}

/// `Φ` as a function of `τ = N^A ξ`: the average of `e(⟨τ, Q(x)⟩)` over the domain.
pub fn phi_tau(tau: &[f64], body: &ConvexBody, gamma: &MultiIndexSet, domain: PhiDomain, spec: &QuadratureSpec) -> Result<QuadResult> {
    if body.k() != gamma.k() || tau.len() != gamma.len() {
        return Err(Error::Domain("τ, Γ and B have inconsistent dimensions".into()));
    }
    let positive = domain == PhiDomain::PositiveOrthant;
    let (coarse, fine) = match body.kind() {
        BodyKind::Cube | BodyKind::Ball => {
            let ball = matches!(body.kind(), BodyKind::Ball);
            let vol = if positive {
                body.positive_volume().value
            } else {
                body.volume().value
            };
            let run = |refine| {
                let integ = PhiIntegrator::new(tau, gamma, ball, positive, spec, refine);
                integ.integrate(&mut Vec::with_capacity(gamma.k()), 1.0) / vol
            };
            (run(1), run(2))
        }
        BodyKind::Custom { .. } => (
            qmc_average(tau, gamma, body, positive, spec.qmc_points)?,
            qmc_average(tau, gamma, body, positive, 2 * spec.qmc_points)?,
        ),
    };
    let error = (fine - coarse).norm();
    if error > spec.tol {
        return Err(Error::Quadrature {
            coarse_re: coarse.re,
            coarse_im: coarse.im,
            fine_re: fine.re,
            fine_im: fine.im,
            tol: spec.tol,
        });
    }
    Ok(QuadResult { value: fine, error })
}

/// `Φ_N(ξ)`.
pub fn phi_integral(xi: &[f64], body: &ConvexBody, gamma: &MultiIndexSet, n: f64, domain: PhiDomain, spec: &QuadratureSpec) -> Result<QuadResult> {
    let tau = gamma.dilate(n, xi);
    phi_tau(&tau, body, gamma, domain, spec)
}

/// `sin(2πξN)/(2πξN)`, the value of `Φ_N` for `B = [-1, 1]` and `Q(x) = x`.
pub fn phi_interval_closed_form(xi: f64, n: f64) -> f64 {
    let z = 2.0 * PI * xi * n;
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

fn shell_panels(tau: &[f64], gamma: &MultiIndexSet, ratio: f64, spec: &QuadratureSpec) -> usize {
    let omega: f64 = tau
        .iter()
        .zip(gamma.orders())
        .map(|(t, &o)| t.abs() * o as f64 * ratio.powi(o as i32))
        .sum();
    (spec.panels_per_cycle * omega * 2.0 * PI).ceil() as usize + 2
}

/// `(Ψ_{N'} - Ψ_N)(ξ)` expressed through `τ = N^A ξ` and `ratio = N'/N`:
/// `∫_{B_ratio \ B_1} e(⟨τ, Q(u)⟩) K(u) du`.
pub fn psi_difference_tau(
    tau: &[f64],
    ratio: f64,
    body: &ConvexBody,
    gamma: &MultiIndexSet,
    kernel: &CZKernel,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if ratio <= 1.0 {
        return Err(Error::Domain(format!("need N' > N, got ratio {ratio}")));
    }
    if body.k() != gamma.k() || kernel.k() != gamma.k() || tau.len() != gamma.len() {
        return Err(Error::Domain("τ, Γ, K and B have inconsistent dimensions".into()));
    }
    check_kernel_body(kernel, body)?;
    let rule = GaussRule::new(spec.nodes);
    let panels = shell_panels(tau, gamma, ratio, spec);
    let integrand = |x: &[f64]| phase(poly_phase(tau, gamma, x)) * kernel.eval(x);
    let coarse = shell_integral(body, 1.0, ratio, &rule, panels, &integrand)?;
    let fine = shell_integral(body, 1.0, ratio, &rule, 2 * panels, &integrand)?;
    let error = (fine - coarse).norm();
    if error > spec.tol {
        return Err(Error::Quadrature {
            coarse_re: coarse.re,
            coarse_im: coarse.im,
            fine_re: fine.re,
            fine_im: fine.im,
            tol: spec.tol,
        });
    }
    Ok(QuadResult { value: fine, error })
}

pub fn psi_difference(
    xi: &[f64],
    n: f64,
    n_prime: f64,
    body: &ConvexBody,
    gamma: &MultiIndexSet,
    kernel: &CZKernel,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let tau = gamma.dilate(n, xi);
    psi_difference_tau(&tau, n_prime / n, body, gamma, kernel, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalValue {
    /// Integral over `B_N \ B_ε`.
    pub at_eps: Complex64,
    /// Integral over `B_N \ B_{ε/2}`.
    pub at_half_eps: Complex64,
    /// Richardson extrapolation `2·at_half_eps - at_eps`.
    pub extrapolated: Complex64,
}

/// `Ψ_N(ξ)` as a principal value, excluding `B_ε` and extrapolating in `ε`.
pub fn psi_pv(
    xi: &[f64],
    n: f64,
    eps: f64,
    body: &ConvexBody,
    gamma: &MultiIndexSet,
    kernel: &CZKernel,
    spec: &QuadratureSpec,
) -> Result<PrincipalValue> {
    if !(eps > 0.0 && eps < n) {
        return Err(Error::Domain(format!("need 0 < ε < N, got ε = {eps}")));
    }
    let at = |e: f64| -> Result<Complex64> {
        let tau = gamma.dilate(e, xi);
        Ok(psi_difference_tau(&tau, n / e, body, gamma, kernel, spec)?.value)
    };
    let a = at(eps)?;
    let b = at(eps / 2.0)?;
    Ok(PrincipalValue {
        at_eps: a,
        at_half_eps: b,
        extrapolated: b * 2.0 - a,
    })
}

/// The coordinate structure `N_q^{k'} × A_q^{k''}` of a Gaussian sum over `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussStructure {
    pub kprime: usize,
    pub kdoubleprime: usize,
    pub gamma: MultiIndexSet,
}

impl GaussStructure {
    pub fn new(kprime: usize, kdoubleprime: usize, gamma: MultiIndexSet) -> Result<Self> {
        if kprime + kdoubleprime != gamma.k() {
            return Err(Error::Domain(format!(
                "k' + k'' = {} but Γ has arity {}",
                kprime + kdoubleprime,
                gamma.k()
            )));
        }
        Ok(Self {
            kprime,
            kdoubleprime,
            gamma,
        })
    }

    pub fn k(&self) -> usize {
        self.gamma.k()
    }

    pub fn d(&self) -> usize {
        self.gamma.len()
    }
}

fn gauss_direct_unchecked(a: &[u64], q: u64, s: &GaussStructure) -> Result<Complex64> {
    let k = s.k();
    let work = (q as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if work > GAUSS_DIRECT_CAP {
        return Err(Error::Size {
            what: format!("direct Gaussian sum at q = {q}"),
            count: work,
            cap: GAUSS_DIRECT_CAP,
        });
    }
    if q == 1 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let roots = RootsOfUnity::new(q);
    let unit_list = units(q)?;
    let full: Vec<u64> = (0..q).collect();
    let degree = s.gamma.gammas().iter().flatten().copied().max().unwrap_or(1) as usize;
    let qq = q as u128;
    // pow[v][e] = v^e mod q
    let pow: Vec<Vec<u128>> = (0..q)
        .map(|v| {
            let mut row = Vec::with_capacity(degree + 1);
            let mut cur = 1u128 % qq;
            for _ in 0..=degree {
                row.push(cur);
                cur = cur * v as u128 % qq;
            }
            row
        })
        .collect();
    let axes: Vec<&[u64]> = (0..k)
        .map(|j| if j < s.kprime { full.as_slice() } else { unit_list.as_slice() })
        .collect();
    let a_mod: Vec<u128> = a.iter().map(|&v| v as u128 % qq).collect();
    let lead = axes[0];
    let terms: Vec<Complex64> = lead
        .par_iter()
        .map(|&x0| {
            let mut idx = vec![0usize; k];
            let mut x = vec![0u64; k];
            x[0] = x0;
            let mut acc = Vec::new();
            loop {
                for j in 1..k {
                    x[j] = axes[j][idx[j]];
                }
                let mut r = 0u128;
                for (g, &av) in s.gamma.gammas().iter().zip(&a_mod) {
                    if av == 0 {
                        continue;
                    }
                    let mut m = av;
                    for (j, &e) in g.iter().enumerate() {
                        if e > 0 {
                            m = m * pow[x[j] as usize][e as usize] % qq;
                        }
                    }
                    r += m;
                }
                acc.push(roots.get((r % qq) as i128));
                // odometer over axes 1..k
                let mut j = k;
                loop {
                    j -= 1;
                    if j == 0 {
                        return pairwise_sum_complex(&acc);
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
    let norm = (q as f64).powi(s.kprime as i32) * (unit_list.len() as f64).powi(s.kdoubleprime as i32);
    Ok(pairwise_sum_complex(&terms) / norm)
}

fn check_gauss_input(a: &[u64], q: u64, s: &GaussStructure) -> Result<()> {
    if a.len() != s.d() {
        return Err(Error::Domain(format!("a has {} components, d = {}", a.len(), s.d())));
    }
    check_units_vector(a, q)
}

/// `G(a/q)` by direct summation over all residues.
pub fn gaussian_sum_direct(a: &[u64], q: u64, s: &GaussStructure) -> Result<Complex64> {
    check_gauss_input(a, q, s)?;
    gauss_direct_unchecked(a, q, s)
}

/// `G(a/q) = ∏_{p^e ∥ q} G(a'/p^e)` with `a'_γ = a_γ (q/p^e)^{|γ|-1} mod p^e`.
pub fn gaussian_sum_factorized(a: &[u64], q: u64, s: &GaussStructure) -> Result<Complex64> {
    check_gauss_input(a, q, s)?;
    let mut out = Complex64::new(1.0, 0.0);
    for (p, e) in factorize(q) {
        let qs = p.pow(e);
        let co = (q / qs) as u128 % qs as u128;
        let local: Vec<u64> = a
            .iter()
            .zip(s.gamma.orders())
            .map(|(&av, &o)| {
                let mut m = av as u128 % qs as u128;
                for _ in 1..o {
                    m = m * co % qs as u128;
                }
                m as u64
            })
            .collect();
        out *= gauss_direct_unchecked(&local, qs, s)?;
    }
    Ok(out)
}

/// `G(a/q)`: direct when `q^k` is within the cap, factorized otherwise.
pub fn gaussian_sum(a: &[u64], q: u64, s: &GaussStructure) -> Result<Complex64> {
    check_gauss_input(a, q, s)?;
    let work = (q as u128).checked_pow(s.k() as u32).unwrap_or(u128::MAX);
    if work <= GAUSS_DIRECT_CAP {
        gauss_direct_unchecked(a, q, s)
    } else {
        gaussian_sum_factorized(a, q, s)
    }
}

/// All `a ∈ A_q` (entries in `1..=q`) for a `d`-dimensional frequency.
pub fn units_vectors(q: u64, d: usize) -> Vec<Vec<u64>> {
    let total = (q as usize).pow(d as u32);
    (0..total)
        .filter_map(|mut idx| {
            let mut a = vec![0u64; d];
            for v in a.iter_mut().rev() {
                *v = (idx as u64 % q) + 1;
                idx /= q as usize;
            }
            let g = a.iter().fold(q, |g, &v| g.gcd(&v));
            (g == 1).then_some(a)
        })
        .collect()
}

/// `max_{a ∈ A_q} |G(a/q)|` with its maximizer.
pub fn gauss_max(q: u64, s: &GaussStructure) -> Result<(f64, Vec<u64>)> {
    let mut best = (-1.0, Vec::new());
    for a in units_vectors(q, s.d()) {
        let v = gaussian_sum(&a, q, s)?.norm();
        if v > best.0 + 1e-15 {
            best = (v, a);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MajorArcKind {
    Average,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorArcReport {
    pub kind: MajorArcKind,
    pub error: f64,
    pub q: u64,
    pub n: u64,
    pub n_prime: Option<u64>,
    /// `max_γ |θ_γ| N^{|γ|}`.
    pub l: f64,
    pub gauss: Complex64,
    pub discrete: Complex64,
    pub continuous: Complex64,
    /// `q <= (ln N)^{β'}`.
    pub within_hypothesis: bool,
    /// `L <= (ln N)^{β'}`.
    pub theta_admissible: bool,
}

fn gauss_structure_of(orbit: &WeightedOrbit) -> Result<GaussStructure> {
    GaussStructure::new(orbit.shape.kprime, orbit.shape.kdoubleprime, orbit.gamma.clone())
}

/// `|𝔪_N(a/q + θ) - G(a/q) Φ_N(θ)|`, with `Φ_N` taken over the positive orthant
/// of `B` to match the orbit.
pub fn major_arc_average(
    freq: &RationalFrequency,
    orbit: &WeightedOrbit,
    body: &ConvexBody,
    beta_prime: f64,
    spec: &QuadratureSpec,
) -> Result<MajorArcReport> {
    let s = gauss_structure_of(orbit)?;
    let g = gaussian_sum(&freq.a, freq.q, &s)?;
    let m = m_hat_rational(freq, orbit)?;
    let n = orbit.n;
    let phi = phi_integral(&freq.theta, body, &orbit.gamma, n as f64, PhiDomain::PositiveOrthant, spec)?.value;
    let gate = (n as f64).ln().powf(beta_prime);
    let l = freq.scale_l(&orbit.gamma, n);
    Ok(MajorArcReport {
        kind: MajorArcKind::Average,
        error: (m - g * phi).norm(),
        q: freq.q,
        n,
        n_prime: None,
        l,
        gauss: g,
        discrete: m,
        continuous: phi,
        within_hypothesis: freq.q as f64 <= gate,
        theta_admissible: l <= gate,
    })
}

/// `|(𝔥_{N'} - 𝔥_N)(ξ) - G(a/q)(Ψ_{N'} - Ψ_N)(θ)|` over signed orbits at `N` and `N'`.
pub fn major_arc_singular(
    freq: &RationalFrequency,
    orbit_n: &WeightedOrbit,
    orbit_n_prime: &WeightedOrbit,
    body: &ConvexBody,
    kernel: &CZKernel,
    beta_prime: f64,
    spec: &QuadratureSpec,
) -> Result<MajorArcReport> {
    let (n, np) = (orbit_n.n, orbit_n_prime.n);
    if !(n < np && np <= 2 * n) {
        return Err(Error::Domain(format!("need N < N' <= 2N, got N = {n}, N' = {np}")));
    }
    let s = gauss_structure_of(orbit_n)?;
    let g = gaussian_sum(&freq.a, freq.q, &s)?;
    let h = h_hat_rational(freq, orbit_n_prime, kernel)? - h_hat_rational(freq, orbit_n, kernel)?;
    let psi = psi_difference(&freq.theta, n as f64, np as f64, body, &orbit_n.gamma, kernel, spec)?.value;
    let gate = (n as f64).ln().powf(beta_prime);
    let l = freq.scale_l(&orbit_n.gamma, n);
    Ok(MajorArcReport {
        kind: MajorArcKind::Singular,
        error: (h - g * psi).norm(),
        q: freq.q,
        n,
        n_prime: Some(np),
        l,
        gauss: g,
        discrete: h,
        continuous: psi,
        within_hypothesis: freq.q as f64 <= gate,
        theta_admissible: l <= gate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub points: usize,
    /// `max |Φ_N| / min{1, |τ|^{-1/d}}`.
    pub c_decay: f64,
    /// `max |Φ_N - 1| / min{1, |τ|}`.
    pub c_near_one: f64,
    /// `max |Φ_N - Φ_{2N}| / min{|τ|, |τ|^{-1/d}}`.
    pub c_difference: f64,
    /// `max |Ψ_{2N} - Ψ_N| / min{|τ|, |τ|^{-1/d}}`, when a kernel is supplied.
    pub c_psi: Option<f64>,
    pub c_fit: f64,
    /// Points where some ratio exceeds the frozen constant.
    pub violations: usize,
    pub max_quadrature_error: f64,
}

fn envelope_ratio(value: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        value / bound
    } else if value <= 1e-14 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Checks the van der Corput envelopes of `Φ_N` (and of `Ψ` differences when
/// `kernel` is given) at every `ξ`, against the frozen constant `c_frozen`.
#[allow(clippy::too_many_arguments)]
pub fn envelope_check(
    xis: &[Vec<f64>],
    n: f64,
    body: &ConvexBody,
    gamma: &MultiIndexSet,
    kernel: Option<&CZKernel>,
    spec: &QuadratureSpec,
    c_frozen: f64,
) -> Result<EnvelopeReport> {
    let d = gamma.len() as f64;
    let rows: Vec<Result<[f64; 5]>> = xis
        .par_iter()
        .map(|xi| {
            let tau = gamma.dilate(n, xi);
            let t = tau.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let phi = phi_tau(&tau, body, gamma, PhiDomain::Full, spec)?;
            let tau2 = gamma.dilate(2.0 * n, xi);
            let phi2 = phi_tau(&tau2, body, gamma, PhiDomain::Full, spec)?;
            let inv = if t > 0.0 { t.powf(-1.0 / d) } else { f64::INFINITY };
            let r_decay = envelope_ratio(phi.value.norm(), inv.min(1.0));
            let r_one = envelope_ratio((phi.value - 1.0).norm(), t.min(1.0));
            let r_diff = envelope_ratio((phi.value - phi2.value).norm(), t.min(inv));
            let mut err = phi.error.max(phi2.error);
            let r_psi = match kernel {
                Some(kern) => {
                    let psi = psi_difference_tau(&tau, 2.0, body, gamma, kern, spec)?;
                    err = err.max(psi.error);
                    envelope_ratio(psi.value.norm(), t.min(inv))
                }
                None => -1.0,
            };
            Ok([r_decay, r_one, r_diff, r_psi, err])
        })
        .collect();
    let mut rep = EnvelopeReport {
        points: xis.len(),
        c_decay: 0.0,
        c_near_one: 0.0,
        c_difference: 0.0,
        c_psi: kernel.map(|_| 0.0),
        c_fit: 0.0,
        violations: 0,
        max_quadrature_error: 0.0,
    };
    for r in rows {
        let [a, b, c, p, e] = r?;
        rep.c_decay = rep.c_decay.max(a);
        rep.c_near_one = rep.c_near_one.max(b);
        rep.c_difference = rep.c_difference.max(c);
        if let Some(cp) = rep.c_psi.as_mut() {
            *cp = cp.max(p);
        }
        rep.max_quadrature_error = rep.max_quadrature_error.max(e);
        if a.max(b).max(c).max(p) > c_frozen {
            rep.violations += 1;
        }
    }
    rep.c_fit = rep
        .c_decay
        .max(rep.c_near_one)
        .max(rep.c_difference)
        .max(rep.c_psi.unwrap_or(0.0));
    Ok(rep)
}
