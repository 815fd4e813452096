use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;
use rvl_core::variation::{
    oscillation, pad_by_repetition, split_variation, vr, vr_bruteforce, vr_dyadic_bound, IndexedSequence,
};

fn complex_seq(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    vec((-5.0f64..5.0, -5.0f64..5.0), 1..=max_len)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn r_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(2.0), Just(2.5), Just(3.0), Just(10.0), 1.0f64..12.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dp_matches_bruteforce(a in complex_seq(12), r in r_value()) {
        let dp = vr(&a, r).unwrap();
        let bf = vr_bruteforce(&a, r).unwrap();
        prop_assert!((dp - bf).abs() <= 1e-12 * bf.max(1e-300), "dp {dp} bf {bf}");
    }

    #[test]
    fn monotone_in_r(a in complex_seq(40), r1 in 1.0f64..8.0, dr in 0.0f64..8.0) {
        prop_assert!(vr(&a, r1 + dr).unwrap() <= vr(&a, r1).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn minkowski_and_triangle(a in complex_seq(30), r in r_value()) {
        let lr: f64 = a.iter().map(|z| z.norm().powf(r)).sum::<f64>().powf(1.0 / r);
        prop_assert!(vr(&a, r).unwrap() <= 2.0 * lr * (1.0 + 1e-12));
        let b: Vec<Complex64> = a.iter().rev().map(|z| z * Complex64::new(0.3, -1.1)).collect();
        let s: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        prop_assert!(vr(&s, r).unwrap() <= (vr(&a, r).unwrap() + vr(&b, r).unwrap()) * (1.0 + 1e-12));
    }

    #[test]
    fn sup_bound(a in complex_seq(30), r in r_value(), j0 in 0usize..30) {
        let j0 = j0 % a.len();
        let sup = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(sup <= vr(&a, r).unwrap() + a[j0].norm() + 1e-12);
    }

    #[test]
    fn concatenation(a in complex_seq(40), r in r_value(), cuts in vec(0usize..40, 0..6)) {
        let n = a.len();
        let mut u: Vec<usize> = cuts.into_iter().map(|c| c % n).chain([0, n - 1]).collect();
        u.sort_unstable();
        u.dedup();
        if u.len() >= 2 {
            let k = (u.len() - 1) as f64;
            let blocks: f64 = u.windows(2).map(|w| vr(&a[w[0]..=w[1]], r).unwrap().powf(r)).sum();
            let rhs = k.powf(1.0 - 1.0 / r) * blocks.powf(1.0 / r);
            prop_assert!(vr(&a, r).unwrap() <= rhs * (1.0 + 1e-12) + 1e-12);
            let sup: f64 = blocks;
            prop_assert!(vr(&a, r).unwrap().powf(r) >= sup * (1.0 - 1e-9));
        }
    }

    #[test]
    fn dyadic_bound_holds(a in complex_seq(40), r in prop_oneof![Just(2.0), Just(3.0), 2.0f64..6.0]) {
        let padded = pad_by_repetition(&a);
        prop_assert!((padded.len() - 1).is_power_of_two());
        let (lhs, rhs) = vr_dyadic_bound(&padded, r).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        prop_assert!((lhs - vr(&a, r).unwrap()).abs() <= 1e-12 * (1.0 + lhs));
    }

    #[test]
    fn oscillation_holder(a in complex_seq(60), r in 2.0f64..8.0, picks in vec(0usize..60, 2..8)) {
        let seq = IndexedSequence::from_values(a.clone());
        let mut lac: Vec<i64> = picks.into_iter().map(|p| (p % a.len()) as i64).collect();
        lac.sort_unstable();
        lac.dedup();
        let lac: Vec<i64> = lac.iter().map(|&i| seq.indices()[i as usize]).collect();
        let j = (lac.len() - 1) as f64;
        let o = oscillation(&seq, &lac).unwrap();
        prop_assert!(o <= j.powf(0.5 - 1.0 / r) * vr(&a, r).unwrap() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn split_with_constant_two(steps in vec(-1.0f64..1.0, 2..300), r in 2.0f64..4.0) {
        let mut walk = Vec::with_capacity(steps.len());
        let mut acc = 0.0;
        for s in steps {
            acc += s;
            walk.push(acc);
        }
        let seq = IndexedSequence::new((1..=walk.len() as i64).collect(), walk.iter().map(|&x| Complex64::new(x, 0.0)).collect()).unwrap();
        let rep = split_variation(&seq, 0.5, r).unwrap();
        prop_assert!(rep.holds, "{rep:?}");
        prop_assert!(rep.scales.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn constant_sequence_has_no_variation() {
    let a = vec![Complex64::new(1.5, -2.0); 17];
    assert_eq!(vr(&a, 2.0).unwrap(), 0.0);
    let seq = IndexedSequence::new((1..=17).collect(), a).unwrap();
    let rep = split_variation(&seq, 0.5, 2.5).unwrap();
    assert_eq!((rep.long, rep.short, rep.total), (0.0, 0.0, 0.0));
}
