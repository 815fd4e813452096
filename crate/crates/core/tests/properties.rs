use num_complex::Complex64;
use proptest::prelude::*;
use rvl_core::expsums::prime_weyl_sum;
use rvl_core::lattice::{build_gamma, enumerate_orbit, ConvexBody, Lift, OrbitShape, WeightedOrbit, DEFAULT_ORBIT_CAP};
use rvl_core::multipliers::{h_hat, m_hat};
use rvl_core::numtheory::{sieve_primes, PrimeTable};
use rvl_core::operators::{apply_average, apply_singular, CZKernel, SparseFunction};
use std::sync::OnceLock;

fn primes() -> &'static PrimeTable {
    static T: OnceLock<PrimeTable> = OnceLock::new();
    T.get_or_init(|| sieve_primes(10_000).unwrap())
}

fn orbit(n: u64, signed: bool) -> (WeightedOrbit, Lift) {
    let gamma = build_gamma(1, 2).unwrap();
    let o = enumerate_orbit(&ConvexBody::interval(), n, OrbitShape::new(0, 1, signed), &gamma, primes(), DEFAULT_ORBIT_CAP).unwrap();
    (o, Lift::identity(&gamma))
}

fn sparse(seed: u64, size: usize) -> SparseFunction {
    SparseFunction::random(2, size, 40, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn average_is_linear(s1 in 0u64..1000, s2 in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, n in 2u64..60) {
        let (o, lift) = orbit(n, false);
        let (f, g) = (sparse(s1, 12), sparse(s2, 9));
        let (ca, cb) = (Complex64::new(a, 0.5), Complex64::new(b, -1.0));
        let lhs = apply_average(&f.scale(ca).axpy(cb, &g), &o, &lift, true).unwrap();
        let rhs = apply_average(&f, &o, &lift, true).unwrap().scale(ca)
            .axpy(cb, &apply_average(&g, &o, &lift, true).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn average_preserves_mass_and_contracts(seed in 0u64..1000, n in 2u64..80, weighted: bool) {
        let (o, lift) = orbit(n, false);
        let f = sparse(seed, 15);
        let m = apply_average(&f, &o, &lift, weighted).unwrap();
        prop_assert!((m.sum() - f.sum()).norm() < 1e-9 * (1.0 + f.norm(1.0)));
        prop_assert!(m.norm(f64::INFINITY) <= f.norm(f64::INFINITY) + 1e-12);
        prop_assert!(m.norm(1.0) <= f.norm(1.0) + 1e-9);
    }

    #[test]
    fn operators_commute_with_translation(seed in 0u64..1000, n in 2u64..50, v0 in -20i64..20, v1 in -20i64..20) {
        let (o, lift) = orbit(n, false);
        let f = sparse(seed, 10);
        let v = [v0, v1];
        let lhs = apply_average(&f.translate(&v), &o, &lift, true).unwrap();
        let rhs = apply_average(&f, &o, &lift, true).unwrap().translate(&v);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        let (so, slift) = orbit(n, true);
        let k = CZKernel::builtin(1);
        let lhs = apply_singular(&f.translate(&v), &k, &so, &slift).unwrap();
        let rhs = apply_singular(&f, &k, &so, &slift).unwrap().translate(&v);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn multiplier_conjugation(x0 in -1.0f64..1.0, x1 in -1.0f64..1.0, n in 2u64..200) {
        let (o, _) = orbit(n, false);
        let v = m_hat(&[vec![x0, x1], vec![-x0, -x1]], &o).unwrap();
        prop_assert!((v[0] - v[1].conj()).norm() < 1e-12);
        prop_assert!(v[0].norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn fourier_transform_of_average(seed in 0u64..1000, n in 2u64..60, x0 in 0.0f64..1.0, x1 in 0.0f64..1.0) {
        let (o, lift) = orbit(n, false);
        let f = sparse(seed, 8);
        let xi = vec![x0, x1];
        let lhs = apply_average(&f, &o, &lift, true).unwrap().fourier(&xi);
        let rhs = m_hat(&[xi.clone()], &o).unwrap()[0] * f.fourier(&xi);
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + f.norm(1.0)));
        let (so, slift) = orbit(n, true);
        let k = CZKernel::builtin(1);
        let lhs = apply_singular(&f, &k, &so, &slift).unwrap().fourier(&xi);
        let rhs = h_hat(&[xi.clone()], &so, &k).unwrap()[0] * f.fourier(&xi);
        prop_assert!((lhs - rhs).norm() < 1e-8 * (1.0 + f.norm(1.0)));
    }

    #[test]
    fn weyl_sum_matches_multiplier(x0 in 0.0f64..1.0, x1 in 0.0f64..1.0, n in 2u64..400) {
        let gamma = build_gamma(1, 2).unwrap();
        let shape = OrbitShape::new(0, 1, false);
        let (o, _) = orbit(n, false);
        let s = prime_weyl_sum(&[x0, x1], shape, &gamma, &ConvexBody::interval(), n, primes()).unwrap();
        let m = m_hat(&[vec![x0, x1]], &o).unwrap()[0] * o.theta();
        prop_assert!((s - m).norm() < 1e-9 * o.theta().max(1.0));
    }
}

#[test]
fn delta_average_spreads_over_orbit() {
    let (o, lift) = orbit(30, false);
    let m = apply_average(&SparseFunction::delta(vec![0, 0]), &o, &lift, true).unwrap();
    assert_eq!(m.len(), o.len());
    for i in 0..o.len() {
        let p = o.image(i);
        assert!((m.get(p).re - o.weights[i] / o.theta()).abs() < 1e-15);
    }
}
