use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;

use uniformity::counting::{dual_function, enumerate_progressions, lambda, lambda_count, lambda_via_dual};
use uniformity::degree::{decompose, find_denominator};
use uniformity::gowers::{box_norm_pow, u2_pow_dft, u_norm_pow, u_norm_pow_exact, BoxSpec};
use uniformity::increment::rescale_set;
use uniformity::io::{parse_set, parse_signal, set_to_text, signal_to_json};
use uniformity::weights::mu;
use uniformity::{ProgressionInstance, Signal};

fn complex_signal(max_width: usize) -> impl Strategy<Value = Signal> {
    (
        -10i64..10,
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..max_width),
    )
        .prop_map(|(off, v)| Signal::new(off, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()))
}

fn ternary_signal(max_width: usize) -> impl Strategy<Value = Signal> {
    (-10i64..10, prop::collection::vec(-1i64..=1, 1..max_width)).prop_map(|(off, v)| Signal::from_ints(off, &v))
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norms_translation_and_conjugation_invariant(f in complex_signal(14), t in -50i64..50, s in 1u32..=3) {
        let base = u_norm_pow(&f, s).unwrap();
        prop_assert!(base >= -1e-9 * f.l2_sq().powi(1 << (s - 1)).max(1.0));
        let scale = base.abs().max(f.l2_sq().powi(2));
        prop_assert!(close(u_norm_pow(&f.shift(t), s).unwrap(), base, scale));
        prop_assert!(close(u_norm_pow(&f.conj(), s).unwrap(), base, scale));
    }

    #[test]
    fn u2_dft_matches_direct(f in complex_signal(60)) {
        let direct = u_norm_pow(&f, 2).unwrap();
        prop_assert!(close(u2_pow_dft(&f), direct, direct));
    }

    #[test]
    fn exact_path_agrees_with_float(f in ternary_signal(20), s in 1u32..=3) {
        let exact = u_norm_pow_exact(&f, s).unwrap().unwrap();
        prop_assert_eq!(exact as f64, u_norm_pow(&f, s).unwrap());
    }

    #[test]
    fn progression_box_is_real_nonnegative(f in complex_signal(12), s in 1u32..=3) {
        let w = f.width() as i64;
        let spec = BoxSpec::progressions(&vec![(1, (2 * w) as u64); s as usize]).unwrap();
        let shifted = f.shift(-(w - 1) - f.offset());
        let b = box_norm_pow(&shifted, &spec).unwrap();
        prop_assert!(b.re >= -1e-9 * f.l2_sq().powi(1 << s).max(1.0));
        prop_assert!(b.im.abs() <= 1e-9 * b.re.abs().max(1.0));
    }

    #[test]
    fn dual_identity(n in 1u64..60, q in 1u64..4, seed in any::<u64>()) {
        prop_assume!(q <= n);
        let inst = ProgressionInstance::new(n, q).unwrap();
        let mut rng = uniformity::rng::SplitMix64::new(seed);
        let fs: Vec<Signal> = (0..3).map(|_| Signal::new(1, (0..n).map(|_| rng.disk()).collect())).collect();
        let a = lambda(&fs[0], &fs[1], &fs[2], &inst);
        let b = lambda_via_dual(&fs[0], &fs[1], &fs[2], &inst);
        prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0));
        prop_assert!(dual_function(&fs[0], &fs[1], &inst).sup_norm() <= inst.m as f64 + 1e-9);
    }

    #[test]
    fn count_matches_enumeration(bits in prop::collection::vec(any::<bool>(), 1..80), q in 1u64..3) {
        let n = bits.len() as u64;
        prop_assume!(q <= n);
        let set: Vec<i64> = (1..=n as i64).filter(|&x| bits[x as usize - 1]).collect();
        let inst = ProgressionInstance::new(n, q).unwrap();
        prop_assert_eq!(lambda_count(&set, &inst), enumerate_progressions(&set, &inst).len() as u64);
    }

    #[test]
    fn weight_mass_and_symmetry(a in 1i64..12, b in 1i64..12, m in 1u64..300) {
        prop_assume!(a <= b);
        if let Ok(w) = mu(Ratio::new(a, b), m) {
            prop_assert_eq!(w.mass_summed(), w.mass_exact());
            for h in 0..=w.radius() {
                prop_assert_eq!(w.value_exact(h), w.value_exact(-h));
            }
            prop_assert_eq!(w.count(w.radius() + 1), 0);
        }
    }

    #[test]
    fn denominator_is_optimal(alpha in 0.0f64..1.0, tmax in 1u64..60, q in 1u64..4) {
        let fit = find_denominator(alpha, q, tmax, 0.0).unwrap();
        prop_assert!(fit.t >= 1 && fit.t <= tmax);
        let qq = (q * q) as f64;
        let dist = |t: u64| { let x = qq * alpha * t as f64; (x - x.round()).abs() };
        for t in 1..=tmax {
            prop_assert!(dist(t) >= fit.distance - 1e-12);
        }
    }

    #[test]
    fn decomposition_reconstructs(alpha in 0.0f64..1.0, t in 1u64..10, gamma in 0.01f64..0.5, c in 1.0f64..8.0) {
        let a = (alpha * t as f64).round() as i64;
        let r = decompose(alpha, a, t, gamma, c).unwrap();
        prop_assert!((0.0..1.0).contains(&r.theta));
        let back = r.reconstruct(gamma, c);
        let diff = back - alpha;
        prop_assert!((diff - diff.round()).abs() < 1e-9);
    }

    #[test]
    fn rescale_keeps_points_in_window(set in prop::collection::btree_set(1i64..500, 0..80), a in -5i64..50, step in 1u64..6, nprime in 1u64..60) {
        let set: Vec<i64> = set.into_iter().collect();
        let out = rescale_set(&set, a, step, nprime);
        prop_assert!(out.iter().all(|&j| j >= 1 && j <= nprime as i64));
        prop_assert!(out.windows(2).all(|w| w[0] < w[1]));
        for &j in &out {
            prop_assert!(set.binary_search(&(a + step as i64 * j)).is_ok());
        }
    }

    #[test]
    fn file_formats_round_trip(f in complex_signal(30), set in prop::collection::btree_set(-1000i64..1000, 0..50)) {
        prop_assert_eq!(parse_signal(&signal_to_json(&f)).unwrap(), f);
        let v: Vec<i64> = set.into_iter().collect();
        prop_assert_eq!(parse_set(&set_to_text(&v)).unwrap(), v);
    }
}
