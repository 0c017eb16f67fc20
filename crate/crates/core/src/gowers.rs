//! Gowers uniformity norms, box norms, inner products and the `U^2`
//! inverse theorem.
//!
//! All norm functions return the `2^s`-th (resp. `2^d`-th) power, never the
//! root, so that integer inputs produce integers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fourier::{self, autocorrelation, autocorrelation_int};
use crate::signal::Signal;
use crate::sum::{pairwise, pairwise_c};
use crate::InequalityReport;

/// Default operation budget for the feasibility guard.
pub const OP_LIMIT: f64 = 1e9;

/// Below this width the top-level recursion runs sequentially.
const PAR_MIN_WIDTH: usize = 24;

/// One differencing direction of a box norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Direction {
    /// `step * [len] = {step, 2 step, ..., len * step}`.
    Progression { step: i64, len: u64 },
    /// An explicit finite set.
    Set(Vec<i64>),
}

impl Direction {
    pub fn progression(step: i64, len: u64) -> Direction {
        Direction::Progression { step, len }
    }

    pub fn elements(&self) -> Vec<i64> {
        match self {
            Direction::Progression { step, len } => (1..=*len as i64).map(|j| step * j).collect(),
            Direction::Set(s) => s.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Direction::Progression { step, len } if *step == 0 && *len > 1 => {
                // A zero step collapses the progression to the multiset {0, ..., 0}; only the
                // single-element case is a genuine set.
                invalid("progression direction with step 0 must have len 1")
            }
            Direction::Progression { len: 0, .. } => invalid("empty direction set"),
            Direction::Set(s) if s.is_empty() => invalid("empty direction set"),
            _ => Ok(()),
        }
    }

    /// `(k, #{(h, h') in Q^2 : h - h' = k})` for `k >= 0`.
    fn nonnegative_difference_counts(&self) -> Vec<(i64, u64)> {
        match self {
            Direction::Progression { step, len } => (0..*len).map(|j| ((j as i64) * step.abs(), len - j)).collect(),
            Direction::Set(s) => {
                let mut set = s.clone();
                set.sort_unstable();
                set.dedup();
                let mut counts = std::collections::BTreeMap::new();
                for &a in &set {
                    for &b in &set {
                        if a >= b {
                            *counts.entry(a - b).or_insert(0u64) += 1;
                        }
                    }
                }
                counts.into_iter().collect()
            }
        }
    }
}

/// Direction sets `Q_1, ..., Q_d` of a Gowers box norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxSpec {
    pub directions: Vec<Direction>,
}

impl BoxSpec {
    pub fn new(directions: Vec<Direction>) -> Result<BoxSpec> {
        if directions.is_empty() {
            return invalid("box norm needs at least one direction");
        }
        for d in &directions {
            d.validate()?;
        }
        Ok(BoxSpec { directions })
    }

    pub fn progressions(dirs: &[(i64, u64)]) -> Result<BoxSpec> {
        BoxSpec::new(dirs.iter().map(|&(s, l)| Direction::progression(s, l)).collect())
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }
}

/// A point of the circle `T = R/Z` with the correlation it achieves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Frequency {
    pub beta: f64,
    pub correlation: f64,
}

/// Reduces to `[0, 1)`.
pub fn wrap_unit(beta: f64) -> f64 {
    let b = beta.rem_euclid(1.0);
    if b >= 1.0 {
        0.0
    } else {
        b
    }
}

/// Distance to the nearest integer, `||t||`.
pub fn circle_dist(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    r.min(1.0 - r)
}

/// Rough operation count for `u_norm_pow` at the given width.
pub fn u_norm_cost(width: usize, s: u32) -> f64 {
    let w = width.max(2) as f64;
    match s {
        0 | 1 => w,
        2 => w * w.log2().max(1.0),
        _ => w.powi(s as i32 - 2) * w * w.log2().max(1.0),
    }
}

pub fn check_budget(what: &str, estimate: f64, limit: f64) -> Result<()> {
    if estimate > limit {
        Err(Error::Infeasible {
            what: what.to_string(),
            estimate,
            limit,
        })
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// U^s norms

fn trim_int(v: Vec<i64>) -> Vec<i64> {
    let Some(a) = v.iter().position(|&x| x != 0) else {
        return Vec::new();
    };
    let b = v.iter().rposition(|&x| x != 0).unwrap();
    v[a..=b].to_vec()
}

fn trim_c(v: Vec<Complex64>) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let Some(a) = v.iter().position(|&x| x != zero) else {
        return Vec::new();
    };
    let b = v.iter().rposition(|&x| x != zero).unwrap();
    v[a..=b].to_vec()
}

/// `Delta_h` for `h >= 0` on a slice.
fn diff_int(v: &[i64], h: usize) -> Vec<i64> {
    if h >= v.len() {
        return Vec::new();
    }
    trim_int((0..v.len() - h).map(|i| v[i + h] * v[i]).collect())
}

fn diff_c(v: &[Complex64], h: usize) -> Vec<Complex64> {
    if h >= v.len() {
        return Vec::new();
    }
    trim_c((0..v.len() - h).map(|i| v[i + h] * v[i].conj()).collect())
}

fn upow_int(v: &[i64], s: u32, parallel: bool) -> i128 {
    if v.is_empty() {
        return 0;
    }
    match s {
        1 => {
            let t: i128 = v.iter().map(|&x| x as i128).sum();
            t * t
        }
        2 => autocorrelation_int(v)
            .into_iter()
            .map(|a| (a as i128) * (a as i128))
            .sum(),
        _ => {
            // ||Delta_{-h} f|| = ||Delta_h f||, so fold the negative lags.
            let term = |h: usize| upow_int(&diff_int(v, h), s - 1, false);
            let rest: i128 = if parallel && v.len() >= PAR_MIN_WIDTH {
                (1..v.len()).into_par_iter().map(term).sum()
            } else {
                (1..v.len()).map(term).sum()
            };
            term(0) + 2 * rest
        }
    }
}

fn upow_c(v: &[Complex64], s: u32, parallel: bool) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    match s {
        1 => pairwise_c(v).norm_sqr(),
        2 => {
            let sq: Vec<f64> = autocorrelation(v).iter().map(|a| a.norm_sqr()).collect();
            pairwise(&sq)
        }
        _ => {
            let term = |h: usize| upow_c(&diff_c(v, h), s - 1, false);
            let terms: Vec<f64> = if parallel && v.len() >= PAR_MIN_WIDTH {
                (1..v.len()).into_par_iter().map(term).collect()
            } else {
                (1..v.len()).map(term).collect()
            };
            term(0) + 2.0 * pairwise(&terms)
        }
    }
}

/// `||f||_{U^s}^{2^s}` in exact integer arithmetic; `None` unless `f` is
/// `{-1, 0, 1}`-valued.
pub fn u_norm_pow_exact(f: &Signal, s: u32) -> Result<Option<i128>> {
    if s == 0 {
        return invalid("U^s needs s >= 1");
    }
    Ok(f.to_ints().map(|v| upow_int(&v, s, true)))
}

/// `||f||_{U^s}^{2^s} = sum_{x, h_1..h_s} Delta_{h_1..h_s} f(x)`.
///
/// For `s = 1` this is `|sum f|^2`; `s = 2` uses the autocorrelation of `f`;
/// larger `s` recurse through `sum_h ||Delta_h f||_{U^{s-1}}^{2^{s-1}}` with `h`
/// restricted to differences of the support.
pub fn u_norm_pow(f: &Signal, s: u32) -> Result<f64> {
    if let Some(v) = u_norm_pow_exact(f, s)? {
        return Ok(v as f64);
    }
    Ok(upow_c(f.values(), s, true))
}

/// Same as [`u_norm_pow`] with the budget check applied first.
pub fn u_norm_pow_guarded(f: &Signal, s: u32, limit: f64) -> Result<f64> {
    check_budget(
        &format!("U^{s} norm at width {}", f.width()),
        u_norm_cost(f.width(), s),
        limit,
    )?;
    u_norm_pow(f, s)
}

/// `||f||_{U^2}^4` with the autocorrelation always taken through the DFT.
pub fn u2_pow_dft(f: &Signal) -> f64 {
    match f.to_ints() {
        Some(v) => fourier::autocorrelation_int_fft(&v)
            .into_iter()
            .map(|a| (a as i128) * (a as i128))
            .sum::<i128>() as f64,
        None => {
            let sq: Vec<f64> = fourier::autocorrelation_fft(f.values())
                .iter()
                .map(|a| a.norm_sqr())
                .collect();
            pairwise(&sq)
        }
    }
}

/// `||f 1_{u + qZ}||_{U^s}^{2^s}`, evaluated on the subsampled signal
/// `x -> f(u + q x)`.
pub fn u_norm_local_pow(f: &Signal, s: u32, u: i64, q: u64) -> Result<f64> {
    if q == 0 || u < 1 || u > q as i64 {
        return invalid(format!("residue u={u} must lie in [1, {q}]"));
    }
    u_norm_pow(&f.subsample(u, q), s)
}

// ---------------------------------------------------------------------------
// Box norms

/// `x -> sum_{h in Q} f(x + h)`.
fn direction_sum(f: &Signal, dir: &Direction) -> Signal {
    let Some((lo, hi)) = f.support() else {
        return Signal::zero();
    };
    match dir {
        Direction::Progression { step, len } if *step != 0 => {
            let (step, len) = (*step, *len as i64);
            let (qmin, qmax) = if step > 0 {
                (step, step * len)
            } else {
                (step * len, step)
            };
            let (xlo, xhi) = (lo - qmax, hi - qmin);
            let width = (xhi - xlo + 1) as usize;
            let mut out = vec![Complex64::new(0.0, 0.0); width];
            let a = step.unsigned_abs() as usize;
            // Walk each residue chain in the direction of `step` with a sliding window.
            for r in 0..a.min(width) {
                let idx: Vec<usize> = if step > 0 {
                    (r..width).step_by(a).collect()
                } else {
                    (r..width).step_by(a).rev().collect()
                };
                let Some(&first) = idx.first() else { continue };
                let x0 = xlo + first as i64;
                let mut acc: Complex64 = (1..=len).map(|j| f.get(x0 + j * step)).sum();
                out[first] = acc;
                for w in idx.windows(2) {
                    let x = xlo + w[0] as i64;
                    acc += f.get(x + (len + 1) * step) - f.get(x + step);
                    out[w[1]] = acc;
                }
            }
            Signal::new(xlo, out)
        }
        _ => {
            let q = dir.elements();
            let (qmin, qmax) = (*q.iter().min().unwrap(), *q.iter().max().unwrap());
            Signal::from_fn(lo - qmax, hi - qmin, |x| q.iter().map(|h| f.get(x + h)).sum())
        }
    }
}

fn box_rec(f: &Signal, dirs: &[Direction]) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    let (last, rest) = dirs.split_last().unwrap();
    if rest.is_empty() {
        let s = direction_sum(f, last);
        let sq: Vec<f64> = s.values().iter().map(|z| z.norm_sqr()).collect();
        return pairwise(&sq);
    }
    // The (k, -k) lags contribute complex conjugates.
    let terms: Vec<f64> = last
        .nonnegative_difference_counts()
        .into_iter()
        .map(|(k, cnt)| {
            let v = box_rec(&f.mult_derivative(k), rest);
            if k == 0 {
                cnt as f64 * v
            } else {
                2.0 * cnt as f64 * v
            }
        })
        .collect();
    pairwise(&terms)
}

/// `||f||_{box^d_{Q_1..Q_d}}^{2^d}`.
pub fn box_norm_pow(f: &Signal, spec: &BoxSpec) -> Result<Complex64> {
    BoxSpec::new(spec.directions.clone())?;
    Ok(Complex64::new(box_rec(f, &spec.directions), 0.0))
}

// ---------------------------------------------------------------------------
// Inner products

/// `x -> a(x) * conj(b(x + h))`.
fn cross(a: &Signal, b: &Signal, h: i64) -> Signal {
    a.mul(&b.shift(h).conj())
}

fn inner_rec(fs: &[Signal]) -> Complex64 {
    if fs.len() == 1 {
        return fs[0].sum();
    }
    let half = fs.len() / 2;
    let (lows, highs) = fs.split_at(half);
    // h ranges over lags where every pair (f_{w0}, f_{w1}(. + h)) overlaps.
    let mut hlo = i64::MIN;
    let mut hhi = i64::MAX;
    for (a, b) in lows.iter().zip(highs) {
        match (a.support(), b.support()) {
            (Some((alo, ahi)), Some((blo, bhi))) => {
                hlo = hlo.max(blo - ahi);
                hhi = hhi.min(bhi - alo);
            }
            _ => return Complex64::new(0.0, 0.0),
        }
    }
    if hlo > hhi {
        return Complex64::new(0.0, 0.0);
    }
    let terms: Vec<Complex64> = (hlo..=hhi)
        .map(|h| {
            let gs: Vec<Signal> = lows.iter().zip(highs).map(|(a, b)| cross(a, b, h)).collect();
            inner_rec(&gs)
        })
        .collect();
    pairwise_c(&terms)
}

/// `[f_w]_{U^s} = sum_{x, h} prod_w C^{|w|} f_w(x + w . h)`.
///
/// `fs[i]` is `f_w` with bit `j` of `i` equal to `w_{j+1}`.
pub fn gowers_inner(fs: &[Signal], s: u32) -> Result<Complex64> {
    if s == 0 {
        return invalid("U^s inner product needs s >= 1");
    }
    if fs.len() != 1usize << s {
        return invalid(format!(
            "U^{s} inner product needs {} signals, got {}",
            1usize << s,
            fs.len()
        ));
    }
    Ok(inner_rec(fs))
}

/// Gowers-Cauchy-Schwarz: `|[f_w]| <= prod_w ||f_w||_{U^s}`.
pub fn gcs_check(fs: &[Signal], s: u32) -> Result<InequalityReport> {
    let lhs = gowers_inner(fs, s)?.norm();
    let root = 1.0 / (1u64 << s) as f64;
    let mut rhs = 1.0;
    for f in fs {
        rhs *= u_norm_pow(f, s)?.max(0.0).powf(root);
    }
    Ok(InequalityReport::new(lhs, rhs))
}

// ---------------------------------------------------------------------------
// U^2 inverse

/// Ternary search for a local maximum of `g` on `[lo, hi]`.
pub(crate) fn ternary_max(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    while hi - lo >= tol {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
        if hi - lo < tol || (m1 == lo && m2 == hi) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, g(mid))
}

/// Index of the first entry within relative `1e-12` of the maximum.
pub(crate) fn first_argmax(values: &[f64]) -> usize {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cut = best - 1e-12 * best.abs();
    values.iter().position(|&v| v >= cut).unwrap_or(0)
}

/// Frequency `beta` maximizing `|sum_x f(x) e(beta x)|`.
///
/// Scans the grid `j / (grid_factor * width)`, takes the smallest grid point
/// achieving the maximum, then refines by ternary search on the neighbouring
/// grid cells until the bracket is narrower than `1e-12`. The refined point
/// is kept only if it improves on the grid value.
pub fn u2_inverse(f: &Signal, grid_factor: usize) -> Result<Frequency> {
    if f.is_zero() {
        return invalid("u2_inverse of the zero signal");
    }
    if grid_factor < 4 {
        return invalid("grid_factor must be at least 4");
    }
    Ok(peak_frequency(f, grid_factor))
}

pub(crate) fn peak_frequency(f: &Signal, grid_factor: usize) -> Frequency {
    let vals = f.values();
    if vals.is_empty() {
        return Frequency {
            beta: 0.0,
            correlation: 0.0,
        };
    }
    let grid = grid_factor.max(1) * vals.len();
    let mags = fourier::grid_magnitudes(vals, grid);
    let j = first_argmax(&mags);
    let beta0 = j as f64 / grid as f64;
    let grid_val = mags[j];
    let step = 1.0 / grid as f64;
    let (b, v) = ternary_max(|b| fourier::exp_sum_abs(vals, b), beta0 - step, beta0 + step, 1e-12);
    let (beta, correlation) = if v > grid_val * (1.0 + 1e-12) {
        (b, v)
    } else {
        (beta0, fourier::exp_sum_abs(vals, beta0))
    };
    Frequency {
        beta: wrap_unit(beta),
        correlation,
    }
}
