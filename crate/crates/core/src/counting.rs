//! The counting operator for `x, x + y, x + q y^2`, its dual function, and
//! set fixtures.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::params::ProgressionInstance;
use crate::rng::SplitMix64;
use crate::signal::Signal;
use crate::sum::pairwise_c;

/// One configuration `x, x + y, x + q y^2` inside a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ProgressionWitness {
    pub x: i64,
    pub y: i64,
}

/// `sum_x sum_{y in [M]} f0(x) f1(x + y) f2(x + q y^2)`.
pub fn lambda(f0: &Signal, f1: &Signal, f2: &Signal, inst: &ProgressionInstance) -> Complex64 {
    let Some((lo, hi)) = f0.support() else {
        return Complex64::new(0.0, 0.0);
    };
    let q = inst.q as i64;
    let per_y: Vec<Complex64> = (1..=inst.m as i64)
        .into_par_iter()
        .map(|y| {
            let terms: Vec<Complex64> = (lo..=hi)
                .map(|x| f0.get(x) * f1.get(x + y) * f2.get(x + q * y * y))
                .collect();
            pairwise_c(&terms)
        })
        .collect();
    pairwise_c(&per_y)
}

/// Exact count `Lambda(1_A, 1_A, 1_A)` for a set.
pub fn lambda_count(set: &[i64], inst: &ProgressionInstance) -> u64 {
    let table = Membership::new(set);
    let q = inst.q as i64;
    (1..=inst.m as i64)
        .map(|y| {
            set.iter()
                .filter(|&&x| table.contains(x + y) && table.contains(x + q * y * y))
                .count() as u64
        })
        .sum()
}

/// Dense membership table over the hull of a set.
pub struct Membership {
    lo: i64,
    bits: Vec<bool>,
}

impl Membership {
    pub fn new(set: &[i64]) -> Membership {
        let (Some(&lo), Some(&hi)) = (set.iter().min(), set.iter().max()) else {
            return Membership {
                lo: 0,
                bits: Vec::new(),
            };
        };
        let mut bits = vec![false; (hi - lo + 1) as usize];
        for &x in set {
            bits[(x - lo) as usize] = true;
        }
        Membership { lo, bits }
    }

    pub fn contains(&self, x: i64) -> bool {
        let i = x - self.lo;
        i >= 0 && (i as usize) < self.bits.len() && self.bits[i as usize]
    }
}

/// Every `(x, y)` with `y` in `[M]` and `{x, x + y, x + q y^2}` inside `set`,
/// ordered by `y` then `x`.
pub fn enumerate_progressions(set: &[i64], inst: &ProgressionInstance) -> Vec<ProgressionWitness> {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let table = Membership::new(&sorted);
    let q = inst.q as i64;
    let mut out = Vec::new();
    for y in 1..=inst.m as i64 {
        for &x in &sorted {
            if table.contains(x + y) && table.contains(x + q * y * y) {
                out.push(ProgressionWitness { x, y });
            }
        }
    }
    out
}

/// First configuration found, if any; cheaper than a full enumeration.
pub fn find_progression(set: &[i64], inst: &ProgressionInstance) -> Option<ProgressionWitness> {
    let table = Membership::new(set);
    let q = inst.q as i64;
    (1..=inst.m as i64).find_map(|y| {
        set.iter()
            .find(|&&x| table.contains(x + y) && table.contains(x + q * y * y))
            .map(|&x| ProgressionWitness { x, y })
    })
}

/// `F(x) = (1/M) sum_{y in [M]} f0(x - q y^2) f1(x + y - q y^2)`.
pub fn dual_function(f0: &Signal, f1: &Signal, inst: &ProgressionInstance) -> Signal {
    let (Some((lo0, hi0)), Some((lo1, hi1))) = (f0.support(), f1.support()) else {
        return Signal::zero();
    };
    let q = inst.q as i64;
    let m = inst.m as i64;
    if m == 0 {
        return Signal::zero();
    }
    // x - q y^2 must hit supp f0 and x + y - q y^2 must hit supp f1 for some y.
    let lo = (lo0 + q).max(lo1 + q - m);
    let hi = (hi0 + q * m * m).min(hi1 + q * m * m - 1);
    if hi < lo {
        return Signal::zero();
    }
    let inv_m = 1.0 / m as f64;
    let values: Vec<Complex64> = (lo..=hi)
        .into_par_iter()
        .map(|x| {
            let terms: Vec<Complex64> = (1..=m)
                .map(|y| {
                    let s = x - q * y * y;
                    f0.get(s) * f1.get(s + y)
                })
                .collect();
            pairwise_c(&terms) * inv_m
        })
        .collect();
    Signal::new(lo, values)
}

/// `M * sum_x F(x) f2(x)`, the inner-product form of the counting operator.
pub fn lambda_via_dual(f0: &Signal, f1: &Signal, f2: &Signal, inst: &ProgressionInstance) -> Complex64 {
    let dual = dual_function(f0, f1, inst);
    dual.mul(f2).sum() * inst.m as f64
}

/// Scans `1..=N` and keeps `n` whenever the enlarged set stays free of
/// configurations.
pub fn greedy_free_set(inst: &ProgressionInstance) -> Vec<i64> {
    let n = inst.n as i64;
    let q = inst.q as i64;
    let mut member = vec![false; n as usize + 1];
    let mut out = Vec::new();
    let has = |member: &[bool], v: i64| v >= 1 && v <= n && member[v as usize];
    for cand in 1..=n {
        // Elements arrive in increasing order and q y^2 >= y, so a new
        // configuration must have `cand` as its largest point x + q y^2.
        let mut bad = false;
        for y in 1..=inst.m as i64 {
            let x = cand - q * y * y;
            if x < 1 {
                break;
            }
            let mid = x + y;
            if has(&member, x) && (mid == cand || has(&member, mid)) {
                bad = true;
                break;
            }
        }
        if !bad {
            member[cand as usize] = true;
            out.push(cand);
        }
    }
    out
}

/// Random subset of `[N]` with density `alpha_in` on `a + q q' [N']` and
/// `alpha_out` elsewhere.
///
/// Cells are visited in increasing order; each draws one `bernoulli` from a
/// `SplitMix64` seeded with `seed`.
#[allow(clippy::too_many_arguments)]
pub fn planted_increment_set(
    n: u64,
    q: u64,
    qprime: u64,
    a: i64,
    nprime: u64,
    alpha_in: f64,
    alpha_out: f64,
    seed: u64,
) -> Result<Vec<i64>> {
    let step = (q * qprime) as i64;
    if q == 0 || qprime == 0 || nprime == 0 {
        return invalid("q, q' and N' must be positive");
    }
    if a + step < 1 || a + step * nprime as i64 > n as i64 {
        return invalid(format!("progression {a} + {step}*[{nprime}] leaves [1, {n}]"));
    }
    if !(0.0..=1.0).contains(&alpha_out) || !(alpha_out..=1.0).contains(&alpha_in) {
        return invalid("need 0 <= alpha_out <= alpha_in <= 1");
    }
    let mut rng = SplitMix64::new(seed);
    let last = a + step * nprime as i64;
    let planted = |x: i64| x > a && x <= last && (x - a) % step == 0;
    Ok((1..=n as i64)
        .filter(|&x| rng.bernoulli(if planted(x) { alpha_in } else { alpha_out }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: u64, q: u64) -> ProgressionInstance {
        ProgressionInstance::new(n, q).unwrap()
    }

    fn random_signal(rng: &mut SplitMix64, lo: i64, hi: i64) -> Signal {
        Signal::new(lo, (lo..=hi).map(|_| rng.disk()).collect())
    }

    #[test]
    fn lambda_examples() {
        let f = Signal::interval(1, 9);
        assert_eq!(lambda(&f, &f, &f, &inst(9, 1)).re, 13.0);
        let one = Signal::interval(1, 1);
        assert_eq!(lambda(&one, &one, &one, &inst(9, 1)).re, 0.0);
        let g = Signal::interval(1, 8);
        assert_eq!(lambda(&g, &g, &g, &inst(8, 2)).re, 6.0);
    }

    #[test]
    fn enumeration_examples() {
        let all: Vec<i64> = (1..=9).collect();
        assert_eq!(enumerate_progressions(&all, &inst(9, 1)).len(), 13);
        assert_eq!(
            enumerate_progressions(&[1, 2], &inst(9, 1)),
            vec![ProgressionWitness { x: 1, y: 1 }]
        );
        assert!(enumerate_progressions(&[1], &inst(9, 1)).is_empty());
    }

    #[test]
    fn enumeration_matches_lambda() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..40 {
            let n = rng.range(5, 120) as u64;
            let q = rng.range(1, 4).min(n as i64) as u64;
            let set: Vec<i64> = (1..=n as i64).filter(|_| rng.bernoulli(0.4)).collect();
            let ins = inst(n, q);
            let ind = Signal::indicator(&set);
            let l = lambda(&ind, &ind, &ind, &ins);
            let w = enumerate_progressions(&set, &ins);
            assert_eq!(l.re as usize, w.len());
            assert_eq!(lambda_count(&set, &ins) as usize, w.len());
            assert_eq!(w.is_empty(), find_progression(&set, &ins).is_none());
        }
    }

    #[test]
    fn dual_examples() {
        let f = Signal::interval(1, 4);
        let ins = inst(4, 1);
        let dual = dual_function(&f, &f, &ins);
        assert_eq!(dual, Signal::interval(2, 6).scale(Complex64::new(0.5, 0.0)));
        assert_eq!(dual_function(&Signal::zero(), &f, &ins), Signal::zero());
        assert_eq!(lambda(&f, &f, &f, &ins).re, 3.0);
        assert_eq!(lambda_via_dual(&f, &f, &f, &ins).re, 3.0);
    }

    #[test]
    fn dual_identity_random_complex() {
        let mut rng = SplitMix64::new(32);
        for _ in 0..30 {
            let n = rng.range(10, 128) as u64;
            let q = rng.range(1, 4) as u64;
            let ins = inst(n, q);
            let f0 = random_signal(&mut rng, 1, n as i64);
            let f1 = random_signal(&mut rng, 1, n as i64);
            let f2 = random_signal(&mut rng, 1, n as i64);
            let a = lambda(&f0, &f1, &f2, &ins);
            let b = lambda_via_dual(&f0, &f1, &f2, &ins);
            assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0));
            assert!(a.norm() <= (n * ins.m) as f64);
            let dual = dual_function(&f0, &f1, &ins);
            assert!(dual.is_one_bounded());
            let (lo, hi) = dual.support().unwrap();
            assert!(lo >= 1 + q as i64 && hi <= n as i64 + (q * ins.m * ins.m) as i64);
        }
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_free_set(&inst(9, 1)), vec![1, 3, 6, 8]);
        assert_eq!(greedy_free_set(&inst(1, 1)), vec![1]);
        for (n, q) in [(200, 1), (500, 2), (300, 3)] {
            let s = greedy_free_set(&inst(n, q));
            assert!(enumerate_progressions(&s, &inst(n, q)).is_empty());
        }
    }

    #[test]
    fn greedy_is_maximal() {
        let ins = inst(150, 1);
        let s = greedy_free_set(&ins);
        for cand in 1..=150 {
            if !s.contains(&cand) {
                let mut t = s.clone();
                t.push(cand);
                assert!(!enumerate_progressions(&t, &ins).is_empty());
            }
        }
    }

    #[test]
    fn planted_examples() {
        assert_eq!(
            planted_increment_set(50, 1, 3, 2, 10, 1.0, 1.0, 9).unwrap(),
            (1..=50).collect::<Vec<_>>()
        );
        let exact = planted_increment_set(50, 2, 3, 1, 7, 1.0, 0.0, 9).unwrap();
        assert_eq!(exact, (1..=7).map(|j| 1 + 6 * j).collect::<Vec<_>>());
        assert!(planted_increment_set(50, 1, 3, 40, 10, 0.5, 0.1, 1).is_err());
        assert!(planted_increment_set(50, 1, 3, 2, 10, 0.1, 0.5, 1).is_err());
    }

    #[test]
    fn planted_density_concentrates() {
        let (nprime, alpha_in) = (400u64, 0.7);
        for seed in 0..50 {
            let set = planted_increment_set(5000, 1, 3, 17, nprime, alpha_in, 0.2, seed).unwrap();
            let hits = (1..=nprime as i64)
                .filter(|j| set.binary_search(&(17 + 3 * j)).is_ok())
                .count();
            let density = hits as f64 / nprime as f64;
            assert!(
                (density - alpha_in).abs() <= 2.0 * (alpha_in / nprime as f64).sqrt(),
                "seed {seed}: {density}"
            );
        }
    }
}
