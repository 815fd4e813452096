use num_integer::Integer;
use proptest::prelude::*;
use rvl_core::iw::{build_pn, eta, lower_inclusion, xi_partition, disjointness_check, IWParams, DEFAULT_SET_CAP};
use rvl_core::lattice::{
    build_gamma, counting, enumerate_orbit, lift_polynomial, ConvexBody, OrbitShape, PolynomialMap, DEFAULT_ORBIT_CAP,
};
use rvl_core::numtheory::{
    dirichlet_approx, factorize, moebius, ramanujan_average, ramanujan_closed_form, sieve_primes, theta_all_residues,
    theta_progression, totient,
};

/// Segmented sieve written independently of the library.
fn segmented_count(limit: u64) -> usize {
    let root = (limit as f64).sqrt() as usize + 1;
    let mut small = vec![true; root + 1];
    small[0] = false;
    small[1] = false;
    for i in 2..=root {
        if small[i] {
            let mut j = i * i;
            while j <= root {
                small[j] = false;
                j += i;
            }
        }
    }
    let base: Vec<u64> = (2..=root as u64).filter(|&i| small[i as usize]).collect();
    let seg = 1u64 << 15;
    let mut count = 0;
    let mut lo = 2u64;
    while lo <= limit {
        let hi = (lo + seg - 1).min(limit);
        let mut mark = vec![true; (hi - lo + 1) as usize];
        for &p in &base {
            if p * p > hi {
                break;
            }
            let start = (p * p).max(lo.div_ceil(p) * p);
            let mut m = start;
            while m <= hi {
                mark[(m - lo) as usize] = false;
                m += p;
            }
        }
        count += mark.iter().filter(|&&b| b).count();
        lo = hi + 1;
    }
    count
}

#[test]
fn sieve_against_segmented_oracle() {
    let t = sieve_primes(1_000_000).unwrap();
    assert_eq!(t.len(), 78_498);
    assert_eq!(segmented_count(1_000_000), 78_498);
    for x in [2u64, 3, 100, 7919, 65_536, 999_983] {
        assert_eq!(t.count_up_to(x), segmented_count(x), "x = {x}");
    }
}

#[test]
fn ramanujan_identity_small_moduli() {
    for q in 1..=120u64 {
        for a in 0..q as i64 {
            let lhs = ramanujan_average(a, q).unwrap();
            let rhs = ramanujan_closed_form(a, q).unwrap();
            assert!((lhs.re - rhs).abs() < 1e-12 && lhs.im.abs() < 1e-12, "a = {a}, q = {q}");
        }
    }
}

#[test]
fn totient_lower_bound() {
    for q in 1..=100_000u64 {
        assert!(totient(q).unwrap() as f64 >= 0.2 * (q as f64).powf(0.9), "q = {q}");
    }
}

#[test]
fn theta_residue_consistency() {
    let t = sieve_primes(50_000).unwrap();
    let x = 49_999.0;
    let total = theta_progression(&t, x, 1, 1).unwrap();
    for q in [2u64, 3, 10, 30, 97, 210] {
        let res = theta_all_residues(&t, x, q).unwrap();
        let units: f64 = (0..q).filter(|r| r.gcd(&q) == 1).map(|r| res[r as usize]).sum();
        let ramified: f64 = factorize(q).iter().map(|&(p, _)| (p as f64).ln()).sum();
        assert!((units + ramified - total).abs() < 1e-9 * total, "q = {q}");
    }
}

#[test]
fn dirichlet_examples() {
    let r = dirichlet_approx(0.1415926, 100).unwrap();
    assert_eq!((r.a, r.q), (1, 7));
    assert!((r.err - 0.0012647).abs() < 1e-6);
    let r = dirichlet_approx(0.0, 5).unwrap();
    assert_eq!((r.a, r.q), (1, 1));
}

#[test]
fn pi_and_theta_are_monotone() {
    let t = sieve_primes(5_000).unwrap();
    let shape = OrbitShape::new(1, 1, false);
    let body = ConvexBody::ball(2);
    let mut last = (0u64, 0.0f64);
    for n in 1..120 {
        let c = counting(&body, n, shape, &t).unwrap();
        assert!(c.0 >= last.0 && c.1 >= last.1, "N = {n}");
        last = c;
    }
}

#[test]
fn model_ergodic_averages_stabilize() {
    use rvl_core::lattice::Lift;
    use rvl_core::operators::{apply_average, SparseFunction};
    use rvl_core::variation::vr;
    use num_complex::Complex64;
    let t = sieve_primes(1 << 13).unwrap();
    let gamma = build_gamma(1, 1).unwrap();
    let lift = Lift::identity(&gamma);
    let f = SparseFunction::from_entries(
        1,
        (-64..=64).map(|x| (vec![x], Complex64::new(1.0, 0.0))),
    )
    .unwrap();
    let vals: Vec<Complex64> = (4..=13)
        .map(|e| {
            let o = enumerate_orbit(&ConvexBody::interval(), 1 << e, OrbitShape::new(0, 1, false), &gamma, &t, DEFAULT_ORBIT_CAP).unwrap();
            // M_N f(x) = Σ f(x - p)w/ϑ, so evaluate at a point inside the box shifted by the orbit
            apply_average(&f, &o, &lift, true).unwrap().get(&[0])
        })
        .collect();
    let v1 = vr(&vals, 1.0).unwrap();
    assert!(v1.is_finite() && v1 <= 1.0, "V_1 = {v1}");
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let tail = &diffs[diffs.len() - 4..];
    assert!(tail.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    assert!(tail[3] < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dirichlet_guarantee(xi in -3.0f64..3.0, qi in 0usize..3) {
        let big_q = [10u64, 100, 1000][qi];
        let r = dirichlet_approx(xi, big_q).unwrap();
        prop_assert!(r.q >= 1 && r.q <= big_q);
        prop_assert!(r.err <= 1.0 / (r.q as f64 * big_q as f64) + 1e-15);
    }

    #[test]
    fn moebius_is_multiplicative(a in 1u64..500, b in 1u64..500) {
        if a.gcd(&b) == 1 {
            prop_assert_eq!(moebius(a * b).unwrap(), moebius(a).unwrap() * moebius(b).unwrap());
            prop_assert_eq!(totient(a * b).unwrap(), totient(a).unwrap() * totient(b).unwrap());
        }
    }

    #[test]
    fn orbit_enumeration_is_scale_consistent(n in 1u64..60, kp in 0usize..2, signed: bool, ball: bool) {
        let t = sieve_primes(200).unwrap();
        let k = kp + 1;
        let body = if ball { ConvexBody::ball(k) } else { ConvexBody::cube(k) };
        let shape = OrbitShape::new(kp, 1, signed);
        let gamma = build_gamma(k, 2).unwrap();
        let a = enumerate_orbit(&body, n, shape, &gamma, &t, DEFAULT_ORBIT_CAP).unwrap();
        let b = enumerate_orbit(&body, n, shape, &gamma, &t, DEFAULT_ORBIT_CAP).unwrap();
        prop_assert_eq!(&a.points, &b.points);
        prop_assert_eq!(&a.images, &b.images);
        prop_assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
        let mut expected = 0usize;
        let lim = n as i64;
        for x0 in -lim..=lim {
            for x1 in -lim..=lim {
                let x: Vec<i64> = if k == 1 { vec![x1] } else { vec![x0, x1] };
                if k == 1 && x0 != 0 {
                    continue;
                }
                let last = x[k - 1];
                let prime_ok = if signed { t.is_prime(last.unsigned_abs()) } else { last > 0 && t.is_prime(last as u64) };
                let int_ok = signed || x[..k - 1].iter().all(|&v| v > 0);
                let xf: Vec<f64> = x.iter().map(|&v| v as f64 / n as f64).collect();
                if prime_ok && int_ok && body.contains(&xf) {
                    expected += 1;
                }
            }
        }
        prop_assert_eq!(a.len(), expected);
        for i in 0..a.len() {
            prop_assert!(body.contains_lattice(a.point(i), n));
            prop_assert_eq!(a.image(i).to_vec(), gamma.image(a.point(i)).unwrap());
        }
    }

    #[test]
    fn lift_reproduces_polynomial(c in proptest::collection::vec(-5i64..5, 6), x0 in -10i64..=10, x1 in -10i64..=10) {
        let p = PolynomialMap::new(2, vec![
            vec![(vec![1, 0], c[0]), (vec![1, 1], c[1]), (vec![0, 2], c[2])],
            vec![(vec![2, 0], c[3]), (vec![0, 1], c[4]), (vec![2, 1], c[5])],
        ]).unwrap();
        let lift = lift_polynomial(&p).unwrap();
        let q = lift.gamma.image(&[x0, x1]).unwrap();
        let lq = lift.apply(&q).unwrap();
        let direct = p.evaluate(&[x0, x1]);
        prop_assert_eq!(lq.iter().map(|&v| v as i128).collect::<Vec<_>>(), direct);
    }

    #[test]
    fn xi_partition_in_unit_interval(x in 0.0f64..1.0, n in 1u64..9) {
        let p = IWParams::new(1, 0.05, 0.5, &build_gamma(1, 1).unwrap()).unwrap();
        let v = xi_partition(&[x], n, None, &p, DEFAULT_SET_CAP).unwrap();
        prop_assert!(v >= 0.0);
        if disjointness_check(0, n.max(2) - 1, &p, DEFAULT_SET_CAP).is_ok() && p.level(n) <= 1 {
            prop_assert!(v <= 1.0 + 1e-12, "Ξ = {v}");
        }
        for s in 0..n.min(3) {
            if disjointness_check(s, n, &p, DEFAULT_SET_CAP).unwrap().disjoint {
                let v = xi_partition(&[x], n, Some(s), &p, DEFAULT_SET_CAP).unwrap();
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }
}

#[test]
fn xi_partition_refuses_oversized_levels() {
    let p = IWParams::new(1, 0.05, 0.5, &build_gamma(1, 1).unwrap()).unwrap();
    assert!(xi_partition(&[0.1], 11, None, &p, DEFAULT_SET_CAP).is_err());
}

#[test]
fn lower_inclusion_and_nesting() {
    for beta in 1..=3u32 {
        let mut n = 1u64;
        while (n as f64).powi(beta as i32) <= 1e4 {
            let s = build_pn(n, beta).unwrap();
            assert_eq!(lower_inclusion(&s), None, "n = {n}, β = {beta}");
            let next = build_pn(n + 1, beta).unwrap();
            for q in 1..=2000u64 {
                if s.contains(q) {
                    assert!(next.contains(q), "P_{n} ⊄ P_{} at q = {q}", n + 1);
                }
            }
            n += 1;
        }
    }
}

#[test]
fn eta_radial_scan() {
    for d in 1..=3usize {
        let lo = 1.0 / (32.0 * d as f64);
        let hi = 1.0 / (16.0 * d as f64);
        let mut prev = 1.0;
        let h = 0.2 / 1000.0;
        for i in 0..=1000 {
            let t = i as f64 * h;
            let mut x = vec![0.0; d];
            x[d - 1] = t;
            let v = eta(&x);
            if t <= lo {
                assert_eq!(v, 1.0);
            }
            if t >= hi {
                assert_eq!(v, 0.0);
            }
            assert!(v <= prev + 1e-15);
            assert!((prev - v) / h < 40.0 / (hi - lo), "steep step at t = {t}");
            prev = v;
        }
    }
}
