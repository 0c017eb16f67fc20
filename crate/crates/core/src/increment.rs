//! Density-increment search on concrete sets and the iteration that drives it.
//!
//! A window is `a + s [N'] = {a + s, a + 2s, ..., a + N' s}` with `s = q q'`, and it
//! must lie inside `[1, N]`. For a fixed `s`, the counts of every window come
//! from one prefix sum along residue classes mod `s`.

use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::counting::{find_progression, Membership, ProgressionWitness};
use crate::degree::find_denominator;
use crate::error::{invalid, Result};
use crate::gowers::u2_inverse;
use crate::params::ProgressionInstance;
use crate::signal::Signal;

pub type Density = Ratio<u64>;

fn ser_density<S: Serializer>(r: &Density, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// `{n in [N'] : a + step n in A}`.
pub fn rescale_set(set: &[i64], a: i64, step: u64, nprime: u64) -> Vec<i64> {
    let member = Membership::new(set);
    (1..=nprime as i64)
        .filter(|&n| member.contains(a + step as i64 * n))
        .collect()
}

/// Budgets for [`find_increment`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchParams {
    pub qprime_max: u64,
    pub nprime_min: u64,
    pub nprime_max: u64,
    /// Oversampling of the frequency grid used for modulus hints.
    pub grid_factor: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            qprime_max: 8,
            nprime_min: N_FLOOR,
            nprime_max: u64::MAX,
            grid_factor: 8,
        }
    }
}

/// Densest window found.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Window {
    pub qprime: u64,
    pub a: i64,
    pub nprime: u64,
    pub count: u64,
    #[serde(serialize_with = "ser_density")]
    pub density: Density,
}

impl Window {
    /// Larger density wins; ties go to smaller `q'`, then `N'`, then `a`.
    fn beats(&self, other: &Window) -> bool {
        let lhs = self.count as u128 * other.nprime as u128;
        let rhs = other.count as u128 * self.nprime as u128;
        lhs > rhs || (lhs == rhs && (self.qprime, self.nprime, self.a) < (other.qprime, other.nprime, other.a))
    }

    pub fn points(&self, q: u64) -> impl Iterator<Item = i64> + '_ {
        let s = (q * self.qprime) as i64;
        (1..=self.nprime as i64).map(move |j| self.a + s * j)
    }
}

fn pick(best: Option<Window>, cand: Option<Window>) -> Option<Window> {
    match (best, cand) {
        (Some(b), Some(c)) => Some(if c.beats(&b) { c } else { b }),
        (b, c) => b.or(c),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementSearch {
    pub best: Window,
    /// Candidate moduli suggested by the Fourier peak of the balanced function.
    pub hints: Vec<u64>,
    pub windows_evaluated: u64,
}

/// `pre[x] = #{y in A : y <= x, y = x mod s}` for `x` in `[0, N]`.
fn residue_prefix(member: &[bool], s: usize) -> Vec<u32> {
    let n = member.len() - 1;
    let mut pre = vec![0u32; n + 1];
    for x in 1..=n {
        pre[x] = if x >= s { pre[x - s] } else { 0 } + member[x] as u32;
    }
    pre
}

/// Best window for step `s` and length `nprime`, or `None` if none fits.
fn best_for(pre: &[u32], n: i64, qprime: u64, s: i64, nprime: u64) -> (Option<Window>, u64) {
    let span = s * nprime as i64;
    let (alo, ahi) = (1 - s, n - span);
    if alo > ahi {
        return (None, 0);
    }
    let at = |x: i64| if x <= 0 { 0 } else { pre[x as usize] };
    let mut best: Option<(u32, i64)> = None;
    for a in alo..=ahi {
        let c = at(a + span) - at(a);
        if best.is_none_or(|(bc, _)| c > bc) {
            best = Some((c, a));
        }
    }
    let (count, a) = best.unwrap();
    let w = Window {
        qprime,
        a,
        nprime,
        count: count as u64,
        density: Ratio::new(count as u64, nprime),
    };
    (Some(w), (ahi - alo + 1) as u64)
}

/// `N'` values `min, 2 min, 4 min, ...` capped by (and including) `max`.
pub fn nprime_grid(min: u64, max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut v = min;
    while v < max {
        out.push(v);
        v = v.saturating_mul(2);
    }
    out.push(max);
    out
}

/// Searches `q' in [qprime_max]` and `N'` on a doubling grid (then `+-25%`
/// around the best) for the densest window `a + q q' [N'] subset [N]`.
pub fn find_increment(set: &[i64], inst: &ProgressionInstance, sp: &SearchParams) -> Result<IncrementSearch> {
    let n = inst.n as i64;
    if set.iter().any(|&x| x < 1 || x > n) {
        return invalid(format!("set is not contained in [1, {n}]"));
    }
    let nmax = sp.nprime_max.min(inst.n);
    if sp.qprime_max == 0 || sp.nprime_min == 0 || sp.nprime_min > nmax {
        return invalid(format!(
            "empty search space (qprime_max={}, nprime in [{}, {}])",
            sp.qprime_max, sp.nprime_min, nmax
        ));
    }
    let mut member = vec![false; inst.n as usize + 1];
    for &x in set {
        member[x as usize] = true;
    }
    let hints = modulus_hints(set, inst, sp);
    let order: Vec<u64> = hints
        .iter()
        .copied()
        .chain((1..=sp.qprime_max).filter(|qp| !hints.contains(qp)))
        .collect();
    let grid = nprime_grid(sp.nprime_min, nmax);

    let per_q: Vec<(Option<Window>, u64)> = order
        .par_iter()
        .map(|&qp| {
            let s = inst.q * qp;
            let pre = residue_prefix(&member, (s as usize).min(member.len()));
            grid.iter().fold((None, 0), |(best, evals), &np| {
                let (w, e) = best_for(&pre, n, qp, s as i64, np);
                (pick(best, w), evals + e)
            })
        })
        .collect();
    let mut evals: u64 = per_q.iter().map(|p| p.1).sum();
    let best = per_q.into_iter().fold(None, |b, (w, _)| pick(b, w));
    let Some(mut best) = best else {
        return invalid("no window a + q q' [N'] fits inside [1, N]");
    };

    // Refine N' around the winner.
    let s = inst.q * best.qprime;
    let pre = residue_prefix(&member, (s as usize).min(member.len()));
    let lo = (best.nprime * 3).div_ceil(4).max(sp.nprime_min);
    let hi = (best.nprime * 5 / 4).min(nmax);
    for np in lo..=hi {
        let (w, e) = best_for(&pre, n, best.qprime, s as i64, np);
        evals += e;
        if let Some(w) = w.filter(|w| w.beats(&best)) {
            best = w;
        }
    }
    Ok(IncrementSearch {
        best,
        hints,
        windows_evaluated: evals,
    })
}

/// Denominator of the dominant frequency of `1_A - alpha 1_[N]`, when it is
/// at most `qprime_max` and larger than 1.
fn modulus_hints(set: &[i64], inst: &ProgressionInstance, sp: &SearchParams) -> Vec<u64> {
    let alpha = set.len() as f64 / inst.n as f64;
    let member = Membership::new(set);
    let f = Signal::from_real(
        1,
        &(1..=inst.n as i64)
            .map(|x| member.contains(x) as u8 as f64 - alpha)
            .collect::<Vec<_>>(),
    );
    let Ok(peak) = u2_inverse(&f, sp.grid_factor.max(4)) else {
        return Vec::new();
    };
    match find_denominator(peak.beta, 1, sp.qprime_max, 0.5 / inst.n as f64) {
        Ok(fit) if fit.t > 1 => vec![fit.t],
        _ => Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Iteration

/// Stop below this `N_i`.
pub const N_FLOOR: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// A recorded increment step.
    Increment,
    ProgressionFound,
    /// `N_i` below [`N_FLOOR`], or `N_i / q_i < 1`.
    NTooSmall,
    DensityCapped,
    MaxSteps,
    /// The best window is no denser than the current set.
    NoIncrement,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Increment => "increment",
            Status::ProgressionFound => "progression_found",
            Status::NTooSmall => "N_too_small",
            Status::DensityCapped => "density_capped",
            Status::MaxSteps => "max_steps",
            Status::NoIncrement => "no_increment",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementStep {
    pub i: usize,
    pub n_i: u64,
    pub q_i: u64,
    #[serde(serialize_with = "ser_density")]
    pub alpha_i: Density,
    pub qprime: u64,
    pub a: i64,
    pub nprime: u64,
    #[serde(serialize_with = "ser_density")]
    pub alpha_new: Density,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncrementTrace {
    pub steps: Vec<IncrementStep>,
    pub status: Status,
    /// State at termination.
    pub n_final: u64,
    pub q_final: u64,
    #[serde(serialize_with = "ser_density")]
    pub alpha_final: Density,
    pub witness: Option<ProgressionWitness>,
    /// The set at termination, in its own coordinates.
    #[serde(skip)]
    pub final_set: Vec<i64>,
}

impl IncrementTrace {
    pub const CSV_HEADER: &'static str = "i,N_i,q_i,alpha_i,qprime,a,Nprime,alpha_new,status";

    /// One row per step plus a terminal row with the stopping status.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.i,
                s.n_i,
                s.q_i,
                s.alpha_i,
                s.qprime,
                s.a,
                s.nprime,
                s.alpha_new,
                Status::Increment
            ));
        }
        out.push_str(&format!(
            "{},{},{},{},,,,,{}\n",
            self.steps.len(),
            self.n_final,
            self.q_final,
            self.alpha_final,
            self.status
        ));
        out
    }
}

/// Alternates progression search and density increment until a stopping rule fires.
///
/// Each step replaces `(A, N, q)` by `(rescale_set(A, a, q q', N'), N', q^2 q')`.
/// Since the window satisfies `q q' N' <= N`, every progression of the new
/// instance maps to one of the old, so progression-freeness is preserved.
pub fn iterate_increment(set: &[i64], n: u64, max_steps: usize, sp: &SearchParams) -> Result<IncrementTrace> {
    if n == 0 {
        return invalid("N must be positive");
    }
    if set.iter().any(|&x| x < 1 || x as u64 > n) {
        return invalid(format!("set is not contained in [1, {n}]"));
    }
    let mut a_i: Vec<i64> = set.to_vec();
    a_i.sort_unstable();
    a_i.dedup();
    let (mut n_i, mut q_i) = (n, 1u64);
    let mut steps = Vec::new();
    let finish = |steps, status, n_i, q_i, a_i: Vec<i64>, witness| {
        Ok(IncrementTrace {
            steps,
            status,
            n_final: n_i,
            q_final: q_i,
            alpha_final: Ratio::new(a_i.len() as u64, n_i),
            witness,
            final_set: a_i,
        })
    };
    loop {
        let inst = match ProgressionInstance::new(n_i, q_i) {
            Ok(inst) if inst.m >= 1 => inst,
            _ => return finish(steps, Status::NTooSmall, n_i, q_i, a_i, None),
        };
        if let Some(w) = find_progression(&a_i, &inst) {
            return finish(steps, Status::ProgressionFound, n_i, q_i, a_i, Some(w));
        }
        if n_i < N_FLOOR {
            return finish(steps, Status::NTooSmall, n_i, q_i, a_i, None);
        }
        if a_i.len() as u64 == n_i {
            return finish(steps, Status::DensityCapped, n_i, q_i, a_i, None);
        }
        if steps.len() >= max_steps {
            return finish(steps, Status::MaxSteps, n_i, q_i, a_i, None);
        }
        let nmax = sp.nprime_max.min(inst.m);
        let local = SearchParams {
            nprime_max: nmax,
            nprime_min: sp.nprime_min.min(nmax),
            ..*sp
        };
        let alpha_i = Ratio::new(a_i.len() as u64, n_i);
        let found = find_increment(&a_i, &inst, &local)?.best;
        if found.density <= alpha_i {
            return finish(steps, Status::NoIncrement, n_i, q_i, a_i, None);
        }
        let next = rescale_set(&a_i, found.a, q_i * found.qprime, found.nprime);
        steps.push(IncrementStep {
            i: steps.len(),
            n_i,
            q_i,
            alpha_i,
            qprime: found.qprime,
            a: found.a,
            nprime: found.nprime,
            alpha_new: Ratio::new(next.len() as u64, found.nprime),
        });
        a_i = next;
        n_i = found.nprime;
        q_i = q_i * q_i * found.qprime;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{enumerate_progressions, greedy_free_set, planted_increment_set};
    use crate::rng::SplitMix64;

    #[test]
    fn rescale_examples() {
        let a: Vec<i64> = vec![2, 5, 7, 11, 30];
        assert_eq!(rescale_set(&a, 0, 1, 10), vec![2, 5, 7]);
        let evens: Vec<i64> = (1..=20).filter(|x| x % 2 == 0).collect();
        assert_eq!(rescale_set(&evens, 0, 2, 10), (1..=10).collect::<Vec<_>>());

        let mut rng = SplitMix64::new(71);
        let set: Vec<i64> = (1..=500).filter(|_| rng.bernoulli(0.4)).collect();
        let member = Membership::new(&set);
        let (a, step) = (rng.range(-10, 10), rng.range(1, 5) as u64);
        let r = rescale_set(&set, a, step, 100);
        let rm = Membership::new(&r);
        for _ in 0..100 {
            let n = rng.range(1, 100);
            assert_eq!(rm.contains(n), member.contains(a + step as i64 * n));
        }
    }

    fn naive_best(set: &[i64], n: i64, s: i64, np: i64) -> (u64, i64) {
        let member = Membership::new(set);
        let mut best = (0u64, 0i64);
        let mut first = true;
        for a in 1 - s..=n - s * np {
            let c = (1..=np).filter(|j| member.contains(a + s * j)).count() as u64;
            if first || c > best.0 {
                best = (c, a);
                first = false;
            }
        }
        best
    }

    #[test]
    fn sliding_window_matches_naive_scan() {
        let mut rng = SplitMix64::new(72);
        for _ in 0..20 {
            let n = rng.range(50, 400);
            let set: Vec<i64> = (1..=n).filter(|_| rng.bernoulli(0.5)).collect();
            let np = rng.range(1, 20) as u64;
            let q = rng.range(1, 3) as u64;
            let inst = ProgressionInstance::new(n as u64, q).unwrap();
            let sp = SearchParams {
                qprime_max: 1,
                nprime_min: np,
                nprime_max: np,
                grid_factor: 8,
            };
            let got = find_increment(&set, &inst, &sp).unwrap().best;
            let (c, a) = naive_best(&set, n, q as i64, np as i64);
            assert_eq!((got.count, got.a, got.nprime), (c, a, np));
        }
    }

    #[test]
    fn full_and_singleton_sets() {
        let inst = ProgressionInstance::new(200, 1).unwrap();
        let full: Vec<i64> = (1..=200).collect();
        let sp = SearchParams {
            qprime_max: 3,
            nprime_min: 4,
            nprime_max: 14,
            grid_factor: 8,
        };
        let w = find_increment(&full, &inst, &sp).unwrap().best;
        assert_eq!(w.density, Ratio::from_integer(1));
        assert_eq!((w.qprime, w.nprime), (1, 4));

        let one = find_increment(&[1], &inst, &SearchParams { nprime_min: 1, ..sp })
            .unwrap()
            .best;
        assert_eq!((one.density, one.nprime), (Ratio::from_integer(1), 1));
        assert!(one.points(1).any(|x| x == 1));
        let guarded = find_increment(&[1], &inst, &sp).unwrap().best;
        assert_eq!(guarded.density, Ratio::new(1, 4));

        assert!(find_increment(&[1], &inst, &SearchParams { nprime_min: 20, ..sp }).is_err());
    }

    #[test]
    fn recovers_planted_window() {
        let inst = ProgressionInstance::new(10_000, 1).unwrap();
        let set = planted_increment_set(10_000, 1, 3, 17, 90, 0.9, 0.3, 1).unwrap();
        let sp = SearchParams {
            qprime_max: 8,
            nprime_min: 16,
            nprime_max: 100,
            grid_factor: 8,
        };
        let w = find_increment(&set, &inst, &sp).unwrap().best;
        assert!(w.density >= Ratio::new(85, 100), "{w:?}");
        assert_eq!(w.qprime % 3, 0, "{w:?}");
        let plant: Vec<i64> = (1..=90).map(|j| 17 + 3 * j).collect();
        assert!(w.points(1).all(|x| plant.contains(&x)), "{w:?}");
        // alpha_new recount
        let member = Membership::new(&set);
        assert_eq!(w.points(1).filter(|&x| member.contains(x)).count() as u64, w.count);
    }

    fn check_trace(set: &[i64], trace: &IncrementTrace) {
        let mut a_i = set.to_vec();
        for s in &trace.steps {
            let inst = ProgressionInstance::new(s.n_i, s.q_i).unwrap();
            assert!(enumerate_progressions(&a_i, &inst).is_empty());
            assert_eq!(s.alpha_i, Ratio::new(a_i.len() as u64, s.n_i));
            let next = rescale_set(&a_i, s.a, s.q_i * s.qprime, s.nprime);
            assert_eq!(s.alpha_new, Ratio::new(next.len() as u64, s.nprime));
            assert!(s.alpha_new > s.alpha_i);
            // Transport: the rescaled set is progression-free for q_i^2 q'.
            if let Ok(next_inst) = ProgressionInstance::new(s.nprime, s.q_i * s.q_i * s.qprime) {
                assert!(enumerate_progressions(&next, &next_inst).is_empty());
            }
            a_i = next;
        }
        for w in trace.steps.windows(2) {
            assert_eq!(w[1].q_i, w[0].q_i * w[0].q_i * w[0].qprime);
            assert_eq!(w[1].n_i, w[0].nprime);
        }
        assert_eq!(a_i, trace.final_set);
    }

    #[test]
    fn iterate_small_greedy() {
        let inst = ProgressionInstance::new(9, 1).unwrap();
        let set = greedy_free_set(&inst);
        assert_eq!(set, vec![1, 3, 6, 8]);
        let trace = iterate_increment(&set, 9, 5, &SearchParams::default()).unwrap();
        assert_eq!(trace.status, Status::NTooSmall);
        assert!(trace.witness.is_none());
    }

    #[test]
    fn iterate_stops_on_progression() {
        let set: Vec<i64> = vec![5, 50, 6, 7, 300];
        let trace = iterate_increment(&set, 400, 5, &SearchParams::default()).unwrap();
        assert_eq!(trace.status, Status::ProgressionFound);
        let w = trace.witness.unwrap();
        let m = Membership::new(&set);
        assert!(m.contains(w.x) && m.contains(w.x + w.y) && m.contains(w.x + w.y * w.y));
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn iterate_greedy_free_sets() {
        for n in [500u64, 2000, 10_000] {
            let set = greedy_free_set(&ProgressionInstance::new(n, 1).unwrap());
            let trace = iterate_increment(&set, n, 10, &SearchParams::default()).unwrap();
            assert_ne!(trace.status, Status::ProgressionFound);
            check_trace(&set, &trace);
            let csv = trace.to_csv();
            assert!(csv.starts_with(IncrementTrace::CSV_HEADER));
            assert_eq!(csv.lines().count(), trace.steps.len() + 2);
        }
    }
}
