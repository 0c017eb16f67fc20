//! Degree lowering for dual functions: phase extraction from derivatives,
//! cube sets, denominator finding on major arcs, the Lemma-6.4-type bound and
//! the end-to-end `s = 3` pipeline.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::dual_function;
use crate::error::{invalid, Result};
use crate::fourier::{e, exp_sum, exp_sum_abs};
use crate::gowers::{
    check_budget, circle_dist, peak_frequency, u_norm_local_pow, u_norm_pow, wrap_unit, Frequency, OP_LIMIT,
};
use crate::params::ProgressionInstance;
use crate::signal::Signal;
use crate::sum::{pairwise, pairwise_c};
use crate::InequalityReport;

/// `phi(h)` and the correlation it achieves, for each `h`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseTable {
    pub q: u64,
    pub u: i64,
    pub entries: BTreeMap<Vec<i64>, Frequency>,
}

/// `x -> Delta_{q h_1, ..., q h_m} F(u + q x)`.
pub fn derivative_slice(f: &Signal, q: u64, u: i64, h: &[i64]) -> Signal {
    let shifts: Vec<i64> = h.iter().map(|&hi| hi * q as i64).collect();
    f.mult_derivatives(&shifts).subsample(u, q)
}

impl PhaseTable {
    pub fn get(&self, h: &[i64]) -> Option<f64> {
        self.entries.get(h).map(|fr| fr.beta)
    }

    /// Largest relative discrepancy between stored and recomputed correlations.
    pub fn recount_error(&self, f: &Signal) -> f64 {
        self.entries
            .iter()
            .map(|(h, fr)| {
                let g = derivative_slice(f, self.q, self.u, h);
                let c = exp_sum_abs(g.values(), fr.beta);
                (c - fr.correlation).abs() / c.max(1e-300)
            })
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }

    /// Same table with `shift` added to every phase.
    pub fn shifted(&self, shift: f64) -> PhaseTable {
        let mut t = self.clone();
        for fr in t.entries.values_mut() {
            fr.beta = wrap_unit(fr.beta + shift);
        }
        t
    }
}

/// Runs the `U^2` inverse on every derivative slice; zero slices get `(0, 0)`.
pub fn phase_map(f: &Signal, q: u64, u: i64, m: usize, hs: &[Vec<i64>], grid_factor: usize) -> Result<PhaseTable> {
    if q == 0 || m == 0 {
        return invalid("q and m must be positive");
    }
    if let Some(h) = hs.iter().find(|h| h.len() != m) {
        return invalid(format!("tuple {h:?} does not have length {m}"));
    }
    let freqs: Vec<Frequency> = hs
        .par_iter()
        .map(|h| peak_frequency(&derivative_slice(f, q, u, h), grid_factor))
        .collect();
    Ok(PhaseTable {
        q,
        u,
        entries: hs.iter().cloned().zip(freqs).collect(),
    })
}

// ---------------------------------------------------------------------------
// Cubes

/// `box_m(H)`: the `2m`-tuples `(k_10, ..., k_m0, k_11, ..., k_m1)` all of whose
/// vertices `(k_{1 w_1}, ..., k_{m w_m})` lie in `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeSet {
    pub m: usize,
    pub base: BTreeSet<Vec<i64>>,
}

/// Vertex `w` of the cube `k`, `w` read as bits (bit `i` selects `k_{i1}`).
pub fn cube_vertex(k: &[i64], m: usize, w: usize) -> Vec<i64> {
    (0..m).map(|i| k[i + m * ((w >> i) & 1)]).collect()
}

pub fn cube_set(base: BTreeSet<Vec<i64>>, m: usize) -> Result<CubeSet> {
    if m == 0 {
        return invalid("cube dimension must be positive");
    }
    if let Some(h) = base.iter().find(|h| h.len() != m) {
        return invalid(format!("tuple {h:?} does not have length {m}"));
    }
    Ok(CubeSet { m, base })
}

impl CubeSet {
    /// All cubes, in lexicographic order of `(k_10, k_11, k_20, k_21, ...)`.
    pub fn cubes(&self) -> Vec<Vec<i64>> {
        let m = self.m;
        let axes: Vec<Vec<i64>> = (0..m)
            .map(|i| {
                self.base
                    .iter()
                    .map(|h| h[i])
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut k = vec![0i64; 2 * m];
        self.extend(&axes, 0, &mut k, &mut out);
        out
    }

    fn extend(&self, axes: &[Vec<i64>], i: usize, k: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        let m = self.m;
        if i == m {
            if (0..1usize << m).all(|w| self.base.contains(&cube_vertex(k, m, w))) {
                out.push(k.clone());
            }
            return;
        }
        for &a in &axes[i] {
            for &b in &axes[i] {
                k[i] = a;
                k[i + m] = b;
                self.extend(axes, i + 1, k, out);
            }
        }
    }

    pub fn len(&self) -> usize {
        if self.m == 1 {
            self.base.len() * self.base.len()
        } else {
            self.cubes().len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

/// `sum_w (-1)^{|w|} phi(vertex w)` reduced to `[0, 1)`.
pub fn psi_combination(phi: &PhaseTable, k: &[i64]) -> Result<f64> {
    if k.is_empty() || !k.len().is_multiple_of(2) {
        return invalid("cube tuple must have even positive length");
    }
    let m = k.len() / 2;
    let mut total = 0.0;
    for w in 0..1usize << m {
        let v = cube_vertex(k, m, w);
        let Some(p) = phi.get(&v) else {
            return invalid(format!("phase table has no entry for {v:?}"));
        };
        if w.count_ones() % 2 == 0 {
            total += p;
        } else {
            total -= p;
        }
    }
    Ok(wrap_unit(total))
}

/// `E_{k in box_m(H)} |sum_x E_{y in [M]} Delta_{q(k_1 - k_0)} T_u f0(qx - qy^2)
/// Delta_{q(k_1 - k_0)} T_u f1(qx + y - qy^2) e(psi(k) x)|^2`.
pub fn lemma63_average(
    f0: &Signal,
    f1: &Signal,
    inst: &ProgressionInstance,
    u: i64,
    cubes: &CubeSet,
    phi: &PhaseTable,
) -> Result<f64> {
    let list = cubes.cubes();
    if list.is_empty() {
        return Ok(0.0);
    }
    let per_cube = (f0.width().max(f1.width()) as f64 / inst.q as f64 + inst.m as f64) * inst.m as f64;
    check_budget("cube average", list.len() as f64 * per_cube, OP_LIMIT)?;
    let (t0, t1) = (f0.shift(u), f1.shift(u));
    let m = cubes.m;
    let q = inst.q as i64;
    let big_m = inst.m as i64;
    let values: Vec<f64> = list
        .par_iter()
        .map(|k| -> Result<f64> {
            let psi = psi_combination(phi, k)?;
            let ds: Vec<i64> = (0..m).map(|i| q * (k[i + m] - k[i])).collect();
            let (g0, g1) = (t0.mult_derivatives(&ds), t1.mult_derivatives(&ds));
            let (Some((a0, b0)), false) = (g0.support(), g1.is_zero()) else {
                return Ok(0.0);
            };
            let xlo = (a0 + q).div_euclid(q);
            let xhi = (b0 + q * big_m * big_m).div_euclid(q) + 1;
            let s: Vec<Complex64> = (xlo..=xhi)
                .map(|x| {
                    let terms: Vec<Complex64> = (1..=big_m)
                        .map(|y| g0.get(q * x - q * y * y) * g1.get(q * x + y - q * y * y))
                        .collect();
                    pairwise_c(&terms) / big_m as f64
                })
                .collect();
            Ok((exp_sum(&s, psi) * e(psi * xlo as f64)).norm_sqr())
        })
        .collect::<Result<_>>()?;
    Ok(pairwise(&values) / values.len() as f64)
}

// ---------------------------------------------------------------------------
// Rational approximation

/// Result of [`find_denominator`]: `||q^2 t alpha|| = distance` with `a` the
/// nearest integer to `q^2 t alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DenominatorFit {
    pub t: u64,
    pub a: i64,
    pub distance: f64,
    pub meets_target: bool,
}

/// Exhaustive `argmin_{t in [Tmax]} ||q^2 t alpha||`, smallest `t` on ties.
pub fn find_denominator(alpha: f64, q: u64, tmax: u64, target_eps: f64) -> Result<DenominatorFit> {
    if tmax == 0 || q == 0 {
        return invalid("Tmax and q must be positive");
    }
    let base = (q as f64) * (q as f64) * wrap_unit(alpha);
    let mut best = (1u64, f64::INFINITY);
    for t in 1..=tmax {
        let d = circle_dist(base * t as f64);
        if d < best.1 {
            best = (t, d);
        }
    }
    let (t, distance) = best;
    Ok(DenominatorFit {
        t,
        a: (base * t as f64).round() as i64,
        distance,
        meets_target: distance <= target_eps,
    })
}

/// `alpha = a/t + k gamma/C + theta gamma/C (mod 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RationalApprox {
    pub a: i64,
    pub t: u64,
    pub k: i64,
    pub theta: f64,
}

impl RationalApprox {
    pub fn reconstruct(&self, gamma: f64, c: f64) -> f64 {
        self.a as f64 / self.t as f64 + (self.k as f64 + self.theta) * gamma / c
    }
}

/// Splits `beta = alpha - a/t` (taken in `[-1/2, 1/2)`) as `(k + theta) gamma / C` with
/// `k = floor(C beta / gamma)` and `theta in [0, 1)`; `|k| <= C` whenever `|beta| <= gamma`.
pub fn decompose(alpha: f64, a: i64, t: u64, gamma: f64, c: f64) -> Result<RationalApprox> {
    if t == 0 || gamma <= 0.0 || c < 1.0 {
        return invalid("decompose needs t >= 1, gamma > 0, C >= 1");
    }
    let beta = wrap_unit(alpha - a as f64 / t as f64 + 0.5) - 0.5;
    let scaled = c * beta / gamma;
    let k = scaled.floor();
    Ok(RationalApprox {
        a,
        t,
        k: k as i64,
        theta: scaled - k,
    })
}

// ---------------------------------------------------------------------------
// Phase-sum bound

/// Exponent convention for the `(N/q)` factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentMode {
    /// `m (1 - 2^{-m})`.
    Paper,
    /// `(m + 2)(1 - 2^{-m})`, the exponent the Cauchy-Schwarz argument yields.
    Derived,
}

impl ExponentMode {
    pub fn exponent(&self, m: usize) -> f64 {
        let root = 1.0 - 0.5f64.powi(m as i32);
        match self {
            ExponentMode::Paper => m as f64 * root,
            ExponentMode::Derived => (m as f64 + 2.0) * root,
        }
    }
}

/// A phase `phi(h)` on `[-radius, radius]^m`, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub m: usize,
    pub radius: i64,
    values: Vec<f64>,
}

impl PhaseGrid {
    pub fn from_fn(m: usize, radius: i64, f: impl Fn(&[i64]) -> f64) -> PhaseGrid {
        let side = (2 * radius + 1) as usize;
        let values = (0..side.pow(m as u32))
            .map(|idx| f(&Self::point(m, radius, idx)))
            .collect();
        PhaseGrid { m, radius, values }
    }

    pub fn constant(m: usize, radius: i64, v: f64) -> PhaseGrid {
        Self::from_fn(m, radius, |_| v)
    }

    fn point(m: usize, radius: i64, mut idx: usize) -> Vec<i64> {
        let side = (2 * radius + 1) as usize;
        (0..m)
            .map(|_| {
                let c = (idx % side) as i64 - radius;
                idx /= side;
                c
            })
            .collect()
    }

    pub fn get(&self, h: &[i64]) -> f64 {
        let side = 2 * self.radius + 1;
        let mut idx = 0i64;
        for &c in h.iter().rev() {
            if c.abs() > self.radius {
                return 0.0;
            }
            idx = idx * side + c + self.radius;
        }
        self.values[idx as usize]
    }

    /// Whether changing coordinate `i` never changes the value.
    pub fn independent_of(&self, i: usize) -> bool {
        let side = (2 * self.radius + 1) as usize;
        (0..self.values.len()).all(|idx| {
            let mut p = Self::point(self.m, self.radius, idx);
            let v = self.values[idx];
            (-self.radius..=self.radius).all(|c| {
                p[i] = c;
                self.get(&p) == v
            }) && side > 0
        })
    }
}

/// `sum_h |sum_x Delta_h g(x) e(sum_i phi_i(h) x)|^2 <= L^{exp} ||g||_{U^{m+1}}^2` for
/// `g(x) = f(qx)`, with `L` the length of the support interval of `g`.
pub fn lemma64_check(f: &Signal, q: u64, phis: &[PhaseGrid], mode: ExponentMode) -> Result<InequalityReport> {
    let m = phis.len();
    if !(1..=2).contains(&m) {
        return invalid("m must be 1 or 2");
    }
    for (i, p) in phis.iter().enumerate() {
        if p.m != m {
            return invalid(format!("phi_{} is defined on {} coordinates, expected {m}", i + 1, p.m));
        }
        if !p.independent_of(i) {
            return invalid(format!("phi_{} depends on h_{}", i + 1, i + 1));
        }
    }
    if q == 0 {
        return invalid("q must be positive");
    }
    let g = f.subsample(0, q);
    let Some((lo, hi)) = g.support() else {
        return Ok(InequalityReport::new(0.0, 0.0));
    };
    let len = (hi - lo + 1) as f64;
    let r = hi - lo;
    check_budget("phase sum", (2.0 * len).powi(m as i32) * len, OP_LIMIT)?;
    let hs: Vec<Vec<i64>> = if m == 1 {
        (-r..=r).map(|a| vec![a]).collect()
    } else {
        (-r..=r).flat_map(|a| (-r..=r).map(move |b| vec![a, b])).collect()
    };
    let terms: Vec<f64> = hs
        .par_iter()
        .map(|h| {
            let beta: f64 = phis.iter().map(|p| p.get(h)).sum();
            exp_sum_abs(g.mult_derivatives(h).values(), beta).powi(2)
        })
        .collect();
    let lhs = pairwise(&terms);
    let norm = u_norm_pow(&g, m as u32 + 1)?.max(0.0);
    let rhs = len.powf(mode.exponent(m)) * norm.powf(0.5f64.powi(m as i32));
    Ok(InequalityReport::new(lhs, rhs))
}

// ---------------------------------------------------------------------------
// s = 3 pipeline

/// Tunables for [`degree_lower_report`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// `h` enters `H` when its correlation squared is at least `gamma (N/q)^2`.
    pub gamma: f64,
    pub grid_factor: usize,
    /// Largest denominator tried for each `psi`.
    pub tmax: u64,
    /// Major-arc width is `arc_scale * q^3 / N`.
    pub arc_scale: f64,
    /// Number of sub-arcs `C`.
    pub c: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            gamma: 0.5,
            grid_factor: 8,
            tmax: 16,
            arc_scale: 1.0,
            c: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseEntry {
    pub h: i64,
    pub phi: f64,
    pub correlation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberCount {
    pub a: i64,
    pub t: u64,
    pub k: i64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeReport {
    pub n: u64,
    pub q: u64,
    pub m: u64,
    pub u: i64,
    pub thresholds: Thresholds,
    /// `||F||_{U^3(u+qZ)}^8`.
    pub u3_pow: f64,
    pub threshold: f64,
    pub h_set: Vec<PhaseEntry>,
    /// `sum_{h in H} correlation(h)^2`.
    pub h_mass: f64,
    pub cube_count: u64,
    pub histogram: Vec<FiberCount>,
    pub fiber: Option<FiberCount>,
    pub anchor: Option<i64>,
    pub final_set: Vec<i64>,
    pub phi1: Option<f64>,
    /// Phase-sum left-hand side over the final set with the fixed phase.
    pub final_mass: f64,
    /// The same sum with each `h` at its own optimal phase.
    pub final_mass_optimal: f64,
    /// `||F||_{U^2(u+qZ)}^4`.
    pub u2_pow: f64,
}

/// Traces the `s = 3` degree-lowering argument on the dual function of `(f0, f1)`.
pub fn degree_lower_report(
    f0: &Signal,
    f1: &Signal,
    inst: &ProgressionInstance,
    u: i64,
    th: Thresholds,
) -> Result<DegreeReport> {
    let q = inst.q;
    if u < 1 || u > q as i64 {
        return invalid(format!("residue u={u} must lie in [1, {q}]"));
    }
    if th.tmax == 0 || th.grid_factor == 0 || th.c < 1.0 || th.arc_scale <= 0.0 {
        return invalid("thresholds need tmax >= 1, grid_factor >= 1, C >= 1, arc_scale > 0");
    }
    let f = dual_function(f0, f1, inst);
    let slice = f.subsample(u, q);
    let width = slice.width() as f64;
    check_budget(
        "U^3 norm of the dual function",
        width * width * width.log2().max(1.0),
        OP_LIMIT,
    )?;
    let u3_pow = u_norm_local_pow(&f, 3, u, q)?;
    let u2_pow = u_norm_local_pow(&f, 2, u, q)?;

    let n_over_q = inst.n as f64 / q as f64;
    let threshold = th.gamma * n_over_q * n_over_q;
    let hmax = (inst.n / q) as i64;
    let hs: Vec<Vec<i64>> = (1..=hmax.min(slice.width() as i64)).map(|h| vec![h]).collect();
    let table = phase_map(&f, q, u, 1, &hs, th.grid_factor)?;
    let h_set: Vec<PhaseEntry> = table
        .entries
        .iter()
        .filter(|(_, fr)| fr.correlation * fr.correlation >= threshold && fr.correlation > 0.0)
        .map(|(h, fr)| PhaseEntry {
            h: h[0],
            phi: fr.beta,
            correlation: fr.correlation,
        })
        .collect();
    let h_mass = pairwise(&h_set.iter().map(|p| p.correlation * p.correlation).collect::<Vec<_>>());

    let cube_count = (h_set.len() * h_set.len()) as u64;
    check_budget("cube pigeonholing", cube_count as f64 * th.tmax as f64, OP_LIMIT)?;
    let q2 = (q * q) as f64;
    let arc = th.arc_scale * (q as f64).powi(3) / inst.n as f64;
    // One (a, t, k) label per cube (k0, k1), keyed in cube order.
    let labels: Vec<(i64, u64, i64)> = h_set
        .par_iter()
        .flat_map_iter(|p0| {
            h_set.iter().map(move |p1| {
                let psi = wrap_unit(p0.phi - p1.phi);
                let fit = find_denominator(psi, q, th.tmax, f64::INFINITY).expect("validated");
                let ra = decompose(q2 * psi, fit.a, fit.t, arc, th.c).expect("validated");
                (ra.a, ra.t, ra.k)
            })
        })
        .collect();
    let mut counts: BTreeMap<(i64, u64, i64), u64> = BTreeMap::new();
    for l in &labels {
        *counts.entry(*l).or_default() += 1;
    }
    let histogram: Vec<FiberCount> = counts
        .iter()
        .map(|(&(a, t, k), &count)| FiberCount { a, t, k, count })
        .collect();
    // Largest fiber; the first in key order on ties.
    let fiber = histogram.iter().fold(None::<&FiberCount>, |best, f| match best {
        Some(b) if b.count >= f.count => Some(b),
        _ => Some(f),
    });

    let mut report = DegreeReport {
        n: inst.n,
        q,
        m: inst.m,
        u,
        thresholds: th,
        u3_pow,
        threshold,
        h_set: h_set.clone(),
        h_mass,
        cube_count,
        histogram: histogram.clone(),
        fiber: fiber.cloned(),
        anchor: None,
        final_set: Vec::new(),
        phi1: None,
        final_mass: 0.0,
        final_mass_optimal: 0.0,
        u2_pow,
    };
    let Some(fiber) = fiber else { return Ok(report) };

    // Fix the k0 coordinate carrying the most cubes of the fiber.
    let key = (fiber.a, fiber.t, fiber.k);
    let n_h = h_set.len();
    let per_anchor: Vec<usize> = (0..n_h)
        .map(|i| labels[i * n_h..(i + 1) * n_h].iter().filter(|l| **l == key).count())
        .collect();
    let best = per_anchor
        .iter()
        .enumerate()
        .fold(0usize, |b, (i, &c)| if c > per_anchor[b] { i } else { b });
    let anchor = &h_set[best];
    let final_idx: Vec<usize> = (0..n_h).filter(|&j| labels[best * n_h + j] == key).collect();
    let shift = (fiber.a as f64 / fiber.t as f64 + fiber.k as f64 * arc / th.c) / q2;
    let phi1 = wrap_unit(anchor.phi - shift);

    let masses: Vec<(f64, f64)> = final_idx
        .par_iter()
        .map(|&j| {
            let p = &h_set[j];
            let g = derivative_slice(&f, q, u, &[p.h]);
            (exp_sum_abs(g.values(), phi1).powi(2), p.correlation * p.correlation)
        })
        .collect();
    report.anchor = Some(anchor.h);
    report.final_set = final_idx.iter().map(|&j| h_set[j].h).collect();
    report.phi1 = Some(phi1);
    report.final_mass = pairwise(&masses.iter().map(|m| m.0).collect::<Vec<_>>());
    report.final_mass_optimal = pairwise(&masses.iter().map(|m| m.1).collect::<Vec<_>>());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn phase_map_examples() {
        let f = Signal::interval(1, 50);
        let hs: Vec<Vec<i64>> = (1..6).map(|h| vec![h]).collect();
        let t = phase_map(&f, 1, 1, 1, &hs, 8).unwrap();
        for fr in t.entries.values() {
            assert_eq!(fr.beta, 0.0);
        }

        let theta = 0.013;
        let n = 200;
        let f = Signal::from_fn(1, n, |x| e(theta * (x * x) as f64));
        let t = phase_map(&f, 1, 1, 1, &hs, 8).unwrap();
        for (h, fr) in &t.entries {
            assert!(circle_dist(fr.beta + 2.0 * theta * h[0] as f64) < 1e-6, "{h:?} {fr:?}");
            assert!((fr.correlation - (n - h[0]) as f64).abs() < 1e-6);
        }
        assert!(t.recount_error(&f) < 1e-9);

        let t = phase_map(&Signal::interval(1, 3), 1, 1, 1, &[vec![10]], 8).unwrap();
        assert_eq!(
            t.entries[&vec![10]],
            Frequency {
                beta: 0.0,
                correlation: 0.0
            }
        );
    }

    #[test]
    fn phase_map_recount_random() {
        let mut rng = SplitMix64::new(61);
        let f = Signal::new(1, (0..120).map(|_| rng.disk()).collect());
        let hs: Vec<Vec<i64>> = (1..4).flat_map(|a| (1..4).map(move |b| vec![a, b])).collect();
        let t = phase_map(&f, 3, 2, 2, &hs, 8).unwrap();
        assert!(t.recount_error(&f) < 1e-9);
    }

    #[test]
    fn cube_examples() {
        let h: BTreeSet<Vec<i64>> = [vec![1], vec![2]].into_iter().collect();
        let c = cube_set(h, 1).unwrap();
        assert_eq!(c.cubes(), vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
        let c = cube_set([vec![1, 1]].into_iter().collect(), 2).unwrap();
        assert_eq!(c.cubes(), vec![vec![1, 1, 1, 1]]);
    }

    #[test]
    fn cube_count_and_lower_bound() {
        let mut rng = SplitMix64::new(62);
        let n = 6i64;
        for _ in 0..30 {
            let size = rng.range(1, 20) as usize;
            let mut h = BTreeSet::new();
            while h.len() < size {
                h.insert(vec![rng.range(1, n), rng.range(1, n)]);
            }
            let cs = cube_set(h.clone(), 2).unwrap();
            let cubes = cs.cubes();
            // Exhaustive recount over [n]^4.
            let mut brute = 0usize;
            for a in 1..=n {
                for b in 1..=n {
                    for c in 1..=n {
                        for d in 1..=n {
                            let k = [a, b, c, d];
                            if (0..4).all(|w| h.contains(&cube_vertex(&k, 2, w))) {
                                brute += 1;
                            }
                        }
                    }
                }
            }
            assert_eq!(cubes.len(), brute);
            for k in &cubes {
                assert!((0..4).all(|w| h.contains(&cube_vertex(k, 2, w))));
            }
            // |box_2(H)| >= |H|^4 / n^{m(2^m - 2)} with m = 2.
            let bound = (size as f64).powi(4) / (n as f64).powi(4);
            assert!(cubes.len() as f64 >= bound * (1.0 - 1e-12));
        }
    }

    fn table(entries: &[(Vec<i64>, f64)]) -> PhaseTable {
        PhaseTable {
            q: 1,
            u: 1,
            entries: entries
                .iter()
                .map(|(h, b)| {
                    (
                        h.clone(),
                        Frequency {
                            beta: *b,
                            correlation: 1.0,
                        },
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn psi_examples() {
        let t = table(&[(vec![1], 0.3), (vec![2], 0.1)]);
        assert!((psi_combination(&t, &[1, 2]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(psi_combination(&t, &[2, 2]).unwrap(), 0.0);
        assert!(psi_combination(&t, &[1, 3]).is_err());

        let mut rng = SplitMix64::new(63);
        let mut entries = Vec::new();
        for a in 1..=3 {
            for b in 1..=3 {
                entries.push((vec![a, b], rng.next_f64()));
            }
        }
        let t = table(&entries);
        let phi = |a: i64, b: i64| t.get(&[a, b]).unwrap();
        for _ in 0..20 {
            let k: Vec<i64> = (0..4).map(|_| rng.range(1, 3)).collect();
            let (k10, k20, k11, k21) = (k[0], k[1], k[2], k[3]);
            let direct = phi(k10, k20) - phi(k10, k21) - phi(k11, k20) + phi(k11, k21);
            let got = psi_combination(&t, &k).unwrap();
            assert!(circle_dist(got - direct) < 1e-12);
        }
        let flat = table(&entries.iter().map(|(h, _)| (h.clone(), 0.7)).collect::<Vec<_>>());
        assert!(circle_dist(psi_combination(&flat, &[1, 2, 3, 1]).unwrap()) < 1e-12);
        assert!(circle_dist(psi_combination(&t, &[2, 3, 2, 3]).unwrap()) < 1e-12);
    }

    /// Nested-loop evaluation of the cube average for `m = 1`.
    fn lemma63_direct(
        f0: &Signal,
        f1: &Signal,
        inst: &ProgressionInstance,
        u: i64,
        hs: &[i64],
        phi: &PhaseTable,
    ) -> f64 {
        let (q, m) = (inst.q as i64, inst.m as i64);
        let mut total = 0.0;
        for &k0 in hs {
            for &k1 in hs {
                let psi = phi.get(&[k0]).unwrap() - phi.get(&[k1]).unwrap();
                let d = q * (k1 - k0);
                let g = |f: &Signal, z: i64| f.get(z + u + d) * f.get(z + u).conj();
                let mut acc = Complex64::new(0.0, 0.0);
                for x in -200..400 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for y in 1..=m {
                        s += g(f0, q * x - q * y * y) * g(f1, q * x + y - q * y * y);
                    }
                    acc += s / m as f64 * e(psi * x as f64);
                }
                total += acc.norm_sqr();
            }
        }
        total / (hs.len() * hs.len()) as f64
    }

    #[test]
    fn lemma63_examples() {
        let inst = ProgressionInstance::new(64, 1).unwrap();
        let f = Signal::interval(1, 64);
        let hs: Vec<i64> = (1..=8).collect();
        let zero_phi = table(&hs.iter().map(|&h| (vec![h], 0.0)).collect::<Vec<_>>());
        let cubes = cube_set(hs.iter().map(|&h| vec![h]).collect(), 1).unwrap();
        let v = lemma63_average(&f, &f, &inst, 1, &cubes, &zero_phi).unwrap();
        assert!(v > 0.0);
        assert!((v - lemma63_direct(&f, &f, &inst, 1, &hs, &zero_phi)).abs() < 1e-9 * v);
        assert_eq!(
            lemma63_average(&Signal::zero(), &f, &inst, 1, &cubes, &zero_phi).unwrap(),
            0.0
        );

        let mut rng = SplitMix64::new(64);
        let inst = ProgressionInstance::new(60, 2).unwrap();
        let f0 = Signal::new(1, (0..60).map(|_| rng.disk()).collect());
        let f1 = Signal::new(1, (0..60).map(|_| rng.disk()).collect());
        let phi = table(&hs.iter().map(|&h| (vec![h], rng.next_f64())).collect::<Vec<_>>());
        let v = lemma63_average(&f0, &f1, &inst, 2, &cubes, &phi).unwrap();
        assert!((v - lemma63_direct(&f0, &f1, &inst, 2, &hs, &phi)).abs() < 1e-9 * v.max(1.0));
        let w = lemma63_average(&f0, &f1, &inst, 2, &cubes, &phi.shifted(0.37)).unwrap();
        assert!((v - w).abs() < 1e-9 * v.max(1.0));
    }

    #[test]
    fn denominator_examples() {
        let fit = find_denominator(0.25, 1, 10, 1e-9).unwrap();
        assert_eq!((fit.t, fit.a, fit.distance, fit.meets_target), (4, 1, 0.0, true));
        let fit = find_denominator(0.2499, 1, 10, 1e-9).unwrap();
        assert_eq!(fit.t, 4);
        assert!((fit.distance - 0.0004).abs() < 1e-12);
        let fit = find_denominator(2f64.sqrt() - 1.0, 1, 10, 0.1).unwrap();
        assert_eq!(fit.t, 5);
        assert!((fit.distance - 0.0711).abs() < 1e-4);
    }

    #[test]
    fn denominator_is_true_argmin() {
        let mut rng = SplitMix64::new(65);
        for _ in 0..200 {
            let alpha = rng.next_f64();
            let q = rng.range(1, 4) as u64;
            let tmax = rng.range(1, 40) as u64;
            let fit = find_denominator(alpha, q, tmax, 0.0).unwrap();
            let base = (q * q) as f64 * alpha;
            // Reverse scan keeping the smallest t among minima.
            let mut best = (0u64, f64::INFINITY);
            for t in (1..=tmax).rev() {
                let d = circle_dist(base * t as f64);
                if d <= best.1 {
                    best = (t, d);
                }
            }
            assert_eq!((fit.t, fit.distance), best);
        }
    }

    #[test]
    fn decompose_reconstructs() {
        let mut rng = SplitMix64::new(66);
        for _ in 0..500 {
            let t = rng.range(1, 12) as u64;
            let a = rng.range(0, t as i64 - 1);
            let gamma = 0.001 + 0.05 * rng.next_f64();
            let c = 1.0 + (rng.below(16)) as f64;
            let alpha = wrap_unit(a as f64 / t as f64 + gamma * (2.0 * rng.next_f64() - 1.0));
            let ra = decompose(alpha, a, t, gamma, c).unwrap();
            assert!((0.0..1.0).contains(&ra.theta));
            assert!(ra.k.unsigned_abs() as f64 <= c);
            assert!(circle_dist(ra.reconstruct(gamma, c) - alpha) < 1e-12);
        }
    }

    #[test]
    fn lemma64_examples() {
        let f = Signal::interval(1, 8);
        let phi = [PhaseGrid::constant(1, 7, 0.0)];
        let paper = lemma64_check(&f, 1, &phi, ExponentMode::Paper).unwrap();
        assert_eq!(paper.lhs, 344.0);
        assert!((paper.rhs - 52.46).abs() < 0.01 && !paper.holds);
        let derived = lemma64_check(&f, 1, &phi, ExponentMode::Derived).unwrap();
        assert!((derived.rhs - 419.7).abs() < 0.05 && derived.holds);

        for mode in [ExponentMode::Paper, ExponentMode::Derived] {
            let r = lemma64_check(&Signal::zero(), 1, &phi, mode).unwrap();
            assert_eq!((r.lhs, r.holds), (0.0, true));
        }
        let bad = [PhaseGrid::from_fn(1, 7, |h| h[0] as f64 * 0.1)];
        assert!(lemma64_check(&f, 1, &bad, ExponentMode::Derived).is_err());
    }

    #[test]
    fn lemma64_derived_holds_on_random_signs() {
        for seed in 0..100 {
            let mut rng = SplitMix64::new(seed);
            let f = Signal::from_ints(1, &(0..16).map(|_| rng.sign()).collect::<Vec<_>>());
            let phi = [PhaseGrid::constant(1, 15, rng.next_f64())];
            assert!(lemma64_check(&f, 1, &phi, ExponentMode::Derived).unwrap().holds);
            let (c1, c2) = (rng.next_f64(), rng.next_f64());
            let phis = [
                PhaseGrid::from_fn(2, 15, |h| c1 * h[1] as f64),
                PhaseGrid::from_fn(2, 15, |h| c2 * h[0] as f64),
            ];
            assert!(lemma64_check(&f, 1, &phis, ExponentMode::Derived).unwrap().holds);
        }
    }

    #[test]
    fn degree_report_constant_phase() {
        let inst = ProgressionInstance::new(100, 1).unwrap();
        let f = Signal::interval(1, 100);
        // The dual function of 1_[100] peaks at about 0.6 on average, so no h clears 0.5 (N/q)^2.
        let rep = degree_lower_report(&f, &f, &inst, 1, Thresholds::default()).unwrap();
        assert!(rep.h_set.is_empty() && rep.fiber.is_none() && rep.u2_pow > 0.0);

        let th = Thresholds {
            gamma: 0.25,
            ..Thresholds::default()
        };
        let rep = degree_lower_report(&f, &f, &inst, 1, th).unwrap();
        assert!(rep.h_set.len() > 10);
        assert!(rep
            .h_set
            .iter()
            .all(|p| p.phi == 0.0 && p.correlation.powi(2) >= 0.25 * 1e4));
        assert!(rep.histogram.iter().all(|b| b.t == 1 && b.a == 0 && b.k == 0));
        assert_eq!(rep.fiber.as_ref().unwrap().count, rep.cube_count);
        assert!(rep.u2_pow > 0.0 && rep.final_mass > 0.0);
        assert!((rep.final_mass - rep.final_mass_optimal).abs() < 1e-9 * rep.final_mass);

        let zero = degree_lower_report(&Signal::zero(), &f, &inst, 1, Thresholds::default()).unwrap();
        assert_eq!(
            (zero.u3_pow, zero.u2_pow, zero.h_mass, zero.cube_count),
            (0.0, 0.0, 0.0, 0)
        );
        assert!(zero.fiber.is_none());
    }

    #[test]
    fn degree_report_random_signs() {
        let inst = ProgressionInstance::new(100, 1).unwrap();
        for seed in 0..20 {
            let mut rng = SplitMix64::new(seed);
            let f = Signal::from_ints(1, &(0..100).map(|_| rng.sign()).collect::<Vec<_>>());
            let th = Thresholds {
                gamma: 0.01,
                ..Thresholds::default()
            };
            let rep = degree_lower_report(&f, &f, &inst, 1, th).unwrap();
            assert!(rep.u3_pow >= 0.0 && rep.u2_pow >= 0.0);
            assert!(rep.final_mass <= rep.final_mass_optimal * (1.0 + 1e-9) + 1e-9);
        }
    }
}
