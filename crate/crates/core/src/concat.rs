//! Concatenation tools: the averaged two-direction box norm, a constructive
//! inverse for arithmetic box norms, gcd tail counts and the three-variable
//! box-norm correlation bound.

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fourier::{e, grid_transform_2d};
use crate::gowers::{check_budget, first_argmax, ternary_max, u_norm_cost, u_norm_local_pow, OP_LIMIT};
use crate::params::{Params, Rational};
use crate::signal::Signal;
use crate::sum::{pairwise, pairwise_c};
use crate::weights::{mu, triple_box_average, weighted_box_pow, AverageMode};
use crate::InequalityReport;

/// `||f||_b^4 = E_{a in [floor(delta1 M)]} sum_{x, h1, h2} mu(h1) mu(h2) Delta_{2q(a+b) h1, 2q a h2} f(x)`
/// with `mu = mu_{delta2, M}`.
pub fn b_norm_pow(f: &Signal, b: u64, params: &Params, delta1: Rational, delta2: Rational) -> Result<f64> {
    if b == 0 {
        return invalid("b must be positive");
    }
    let m = params.m();
    let outer = mu(delta1, m)?.h as i64;
    let w = mu(delta2, m)?;
    let q2 = 2 * params.q() as i64;
    let b = b as i64;
    let values: Vec<f64> = (1..=outer)
        .into_par_iter()
        .map(|a| weighted_box_pow(f, &[q2 * (a + b), q2 * a], &w))
        .collect::<Result<_>>()?;
    Ok(pairwise(&values) / outer as f64)
}

// ---------------------------------------------------------------------------
// Arithmetic box inverse

/// Factors for one residue class, in coordinates where `(c, d)` are coprime.
#[derive(Clone, Debug)]
struct ClassFactor {
    c: i64,
    d: i64,
    /// `d^{-1} mod c`.
    dinv: i64,
    ylo: i64,
    ltab: Vec<Complex64>,
    /// `R(z)` for `z = 1..=c`.
    rtab: Vec<Complex64>,
}

impl ClassFactor {
    /// `x = c g(x) + d h(x)` with `h(x) in [1, c]`.
    fn split(&self, x: i64) -> (i64, i64) {
        split(x, self.c, self.d, self.dinv)
    }

    fn l_at(&self, x: i64) -> Complex64 {
        let (y, _) = self.split(x);
        let i = y - self.ylo;
        if i < 0 || i >= self.ltab.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.ltab[i as usize]
        }
    }

    fn r_at(&self, x: i64) -> Complex64 {
        let (_, z) = self.split(x);
        self.rtab.get(z as usize - 1).copied().unwrap_or_default()
    }
}

fn split(x: i64, c: i64, d: i64, dinv: i64) -> (i64, i64) {
    let mut z = (x.rem_euclid(c) * dinv).rem_euclid(c);
    if z == 0 {
        z = c;
    }
    ((x - d * z) / c, z)
}

/// Result of [`invert_arithmetic_box`].
///
/// `l` and `r` are the factors restricted to the support window of `f`;
/// `r_period[x mod c]` gives `r` everywhere, and [`FactorPair::l_at`] evaluates `l`
/// off the window.
#[derive(Clone, Debug)]
pub struct FactorPair {
    pub l: Signal,
    pub r: Signal,
    pub c: u64,
    pub d: u64,
    pub correlation: f64,
    pub r_period: Vec<Complex64>,
    m: i64,
    classes: Vec<ClassFactor>,
}

impl FactorPair {
    /// Residue class `k` in `[0, m)` with `x = m x' - k`.
    fn class_of(&self, x: i64) -> (usize, i64) {
        let k = (-x).rem_euclid(self.m);
        (k as usize, (x + k) / self.m)
    }

    pub fn l_at(&self, x: i64) -> Complex64 {
        let (k, xp) = self.class_of(x);
        self.classes[k].l_at(xp)
    }

    pub fn r_at(&self, x: i64) -> Complex64 {
        self.r_period[x.rem_euclid(self.c as i64) as usize]
    }

    /// `#{x in supp f : l(x) != l(x + d z) for some z in [window]}`.
    pub fn exceptional_count(&self, f: &Signal, window: u64) -> u64 {
        let d = self.d as i64;
        f.values()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
            .filter(|(i, _)| {
                let x = f.offset() + *i as i64;
                let lx = self.l_at(x);
                (1..=window as i64).any(|z| self.l_at(x + d * z) != lx)
            })
            .count() as u64
    }

    pub fn metrics(&self, f: &Signal, window: u64) -> FactorMetrics {
        let exceptional = self.exceptional_count(f, window);
        let bound = window as f64 * f.width() as f64 / self.c as f64 + self.c as f64;
        FactorMetrics {
            c: self.c,
            d: self.d,
            gcd: self.m as u64,
            correlation: self.correlation,
            l2_sq: f.l2_sq(),
            window,
            exceptional,
            exceptional_bound: bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorMetrics {
    pub c: u64,
    pub d: u64,
    pub gcd: u64,
    pub correlation: f64,
    pub l2_sq: f64,
    pub window: u64,
    pub exceptional: u64,
    /// `window * width / c + c`; an upper bound for the count when `gcd(c, d) = 1`.
    pub exceptional_bound: f64,
}

/// Builds `l`, `r` with `r` exactly `c`-periodic and `|sum f l r|` large.
///
/// With `x = c y + d z`, `z in [c]`, and `F(y, z) = f(x)`, every nonzero cell
/// `(y', z')` is tried as the pivot in
/// `sum_{y,z} F(y,z) conj F(y,z') conj F(y',z) F(y',z') e(-gamma (y-y') - gamma' (z-z'))`,
/// maximized over a `grid_factor`-times oversampled frequency grid; the best pivot
/// is refined by coordinate ternary search. When `m = gcd(c, d) > 1` the classes
/// `x = m x' - k` are solved with `(c/m, d/m)` and phase-aligned.
pub fn invert_arithmetic_box(f: &Signal, c: u64, d: u64, grid_factor: usize) -> Result<FactorPair> {
    if c == 0 || d == 0 {
        return invalid("c and d must be positive");
    }
    if grid_factor == 0 {
        return invalid("grid_factor must be positive");
    }
    let m = c.gcd(&d) as i64;
    let (cp, dp) = (c as i64 / m, d as i64 / m);
    let scale = f.sup_norm().max(1.0);
    let mut classes: Vec<ClassFactor> = (0..m)
        .map(|k| {
            let fk = match f.support() {
                Some((lo, hi)) => {
                    let xlo = (lo + k).div_euclid(m);
                    let xhi = (hi + k).div_euclid(m) + 1;
                    Signal::from_fn(xlo, xhi, |x| f.get(m * x - k) / scale)
                }
                None => Signal::zero(),
            };
            solve_coprime(&fk, cp, dp, grid_factor)
        })
        .collect::<Result<_>>()?;

    // Phase-align the classes so their contributions add in modulus.
    for (k, class) in classes.iter_mut().enumerate() {
        let corr = class_correlation(f, class, m, k as i64);
        if corr.norm() > 0.0 {
            let phase = corr.conj() / corr.norm();
            for v in class.ltab.iter_mut() {
                *v *= phase;
            }
        }
    }

    let r_period: Vec<Complex64> = (0..c as i64)
        .map(|x| {
            let k = (-x).rem_euclid(m);
            classes[k as usize].r_at((x + k) / m)
        })
        .collect();
    let mut pair = FactorPair {
        l: Signal::zero(),
        r: Signal::zero(),
        c,
        d,
        correlation: 0.0,
        r_period,
        m,
        classes,
    };
    if let Some((lo, hi)) = f.support() {
        pair.l = Signal::from_fn(lo, hi, |x| pair.l_at(x));
        pair.r = Signal::from_fn(lo, hi, |x| pair.r_at(x));
        pair.correlation = factored_correlation(f, &pair.l, &pair.r);
    }
    Ok(pair)
}

/// `|sum_x f(x) l(x) r(x)|`.
pub fn factored_correlation(f: &Signal, l: &Signal, r: &Signal) -> f64 {
    let Some((lo, hi)) = f.support() else { return 0.0 };
    let terms: Vec<Complex64> = (lo..=hi).map(|x| f.get(x) * l.get(x) * r.get(x)).collect();
    pairwise_c(&terms).norm()
}

fn class_correlation(f: &Signal, class: &ClassFactor, m: i64, k: i64) -> Complex64 {
    let Some((lo, hi)) = f.support() else {
        return Complex64::new(0.0, 0.0);
    };
    let terms: Vec<Complex64> = (lo..=hi)
        .filter(|x| (-x).rem_euclid(m) == k)
        .map(|x| {
            let xp = (x + k) / m;
            f.get(x) * class.l_at(xp) * class.r_at(xp)
        })
        .collect();
    pairwise_c(&terms)
}

fn solve_coprime(f: &Signal, c: i64, d: i64, grid_factor: usize) -> Result<ClassFactor> {
    let dinv = if c == 1 { 0 } else { d.extended_gcd(&c).x.rem_euclid(c) };
    let zero = ClassFactor {
        c,
        d,
        dinv,
        ylo: 0,
        ltab: Vec::new(),
        rtab: vec![Complex64::new(0.0, 0.0); c as usize],
    };
    let Some((lo, hi)) = f.support() else { return Ok(zero) };

    let (mut ylo, mut yhi) = (i64::MAX, i64::MIN);
    for x in lo..=hi {
        let (y, _) = split(x, c, d, dinv);
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    let ny = (yhi - ylo + 1) as usize;
    let cu = c as usize;
    let mut table = vec![vec![Complex64::new(0.0, 0.0); cu]; ny];
    let mut cells = Vec::new();
    for x in lo..=hi {
        let v = f.get(x);
        let (y, z) = split(x, c, d, dinv);
        let (a, b) = ((y - ylo) as usize, (z - 1) as usize);
        table[a][b] = v;
        if v != Complex64::new(0.0, 0.0) {
            cells.push((a, b));
        }
    }

    let (g1, g2) = (grid_factor * ny, grid_factor * cu);
    let area = (g1 * g2) as f64;
    check_budget(
        "arithmetic box inverse",
        cells.len() as f64 * area * area.log2().max(1.0),
        OP_LIMIT,
    )?;

    let pivot_table = |(ap, bp): (usize, usize)| -> Vec<Vec<Complex64>> {
        (0..ny)
            .map(|a| {
                (0..cu)
                    .map(|b| table[a][b] * table[a][bp].conj() * table[ap][b].conj())
                    .collect()
            })
            .collect()
    };
    let scored: Vec<(f64, usize)> = cells
        .par_iter()
        .map(|&cell| {
            let out = grid_transform_2d(&pivot_table(cell), g1, g2);
            let mags: Vec<f64> = out.iter().map(|z| z.norm()).collect();
            let j = first_argmax(&mags);
            (mags[j] * table[cell.0][cell.1].norm(), j)
        })
        .collect();
    let values: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let best = first_argmax(&values);
    let (ap, bp) = cells[best];
    let (j1, j2) = (scored[best].1 / g2, scored[best].1 % g2);

    let g = pivot_table((ap, bp));
    let eval = |s1: f64, s2: f64| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, row) in g.iter().enumerate() {
            let mut inner = Complex64::new(0.0, 0.0);
            for (b, v) in row.iter().enumerate() {
                inner += v * e(s2 * b as f64);
            }
            acc += inner * e(s1 * a as f64);
        }
        acc.norm()
    };
    let (mut s1, mut s2) = (j1 as f64 / g1 as f64, j2 as f64 / g2 as f64);
    let base = eval(s1, s2);
    let (t1, _) = ternary_max(|t| eval(t, s2), s1 - 1.0 / g1 as f64, s1 + 1.0 / g1 as f64, 1e-12);
    let (t2, v) = ternary_max(|t| eval(t1, t), s2 - 1.0 / g2 as f64, s2 + 1.0 / g2 as f64, 1e-12);
    if v > base {
        s1 = t1;
        s2 = t2;
    }

    // L(y) = conj F(y, z') e(-gamma y), R(z) = conj F(y', z) e(-gamma' z) F(y', z') e(gamma y' + gamma' z'),
    // with (gamma, gamma') = (-s1, -s2) in the shifted coordinates (a, b).
    let pivot = table[ap][bp] * e(-s1 * ap as f64 - s2 * bp as f64);
    let ltab = (0..ny).map(|a| table[a][bp].conj() * e(s1 * a as f64)).collect();
    let rtab = (0..cu)
        .map(|b| table[ap][b].conj() * e(s2 * b as f64) * pivot)
        .collect();
    Ok(ClassFactor {
        ylo,
        ltab,
        rtab,
        ..zero
    })
}

/// Exact `#{(a, b) in [X]^2 : gcd(a, b) > Y} / X^2`.
pub fn gcd_tail_proportion(x: u64, y: u64) -> Result<Ratio<u64>> {
    if x == 0 || y == 0 {
        return invalid("X and Y must be positive");
    }
    let count: u64 = (1..=x)
        .into_par_iter()
        .map(|a| (1..=x).filter(|b| a.gcd(b) > y).count() as u64)
        .sum();
    Ok(Ratio::new(count, x * x))
}

// ---------------------------------------------------------------------------
// Three-variable box norm

/// A function on `[n1] x [n2] x [n3]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid3 {
    pub dims: [usize; 3],
    pub data: Vec<Complex64>,
}

impl Grid3 {
    pub fn new(dims: [usize; 3], data: Vec<Complex64>) -> Result<Grid3> {
        if dims.contains(&0) || data.len() != dims.iter().product::<usize>() {
            return invalid(format!(
                "grid of shape {dims:?} needs {} entries",
                dims.iter().product::<usize>()
            ));
        }
        Ok(Grid3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], f: impl Fn(usize, usize, usize) -> Complex64) -> Grid3 {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Grid3 { dims, data }
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    /// Whether the value never changes along coordinate `axis`.
    pub fn independent_of(&self, axis: usize) -> bool {
        let [n1, n2, n3] = self.dims;
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let base = match axis {
                        0 => self.at(0, j, k),
                        1 => self.at(i, 0, k),
                        _ => self.at(i, j, 0),
                    };
                    if self.at(i, j, k) != base {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn is_one_bounded(&self) -> bool {
        self.data.iter().all(|z| z.norm() <= 1.0 + 1e-12)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Box3Report {
    pub corr: f64,
    pub r#box: f64,
    pub holds: bool,
}

/// Normalized `||f||_{box(X1, X2, X3)}^8`, computed as
/// `E_{x2,x2',x3,x3'} |E_{x1} f(x1,x2,x3) conj f(x1,x2',x3) conj f(x1,x2,x3') f(x1,x2',x3')|^2`.
pub fn box3_norm_pow(f: &Grid3) -> f64 {
    let [n1, n2, n3] = f.dims;
    let terms: Vec<f64> = (0..n2 * n2)
        .into_par_iter()
        .flat_map_iter(|jj| {
            let (j, jp) = (jj / n2, jj % n2);
            (0..n3 * n3).map(move |kk| {
                let (k, kp) = (kk / n3, kk % n3);
                let inner: Vec<Complex64> = (0..n1)
                    .map(|i| f.at(i, j, k) * f.at(i, jp, k).conj() * f.at(i, j, kp).conj() * f.at(i, jp, kp))
                    .collect();
                (pairwise_c(&inner) / n1 as f64).norm_sqr()
            })
        })
        .collect();
    pairwise(&terms) / (n2 * n2 * n3 * n3) as f64
}

/// `|E f g1 g2 g3| <= ||f||_box` when `g_i` does not depend on `x_i` and all are 1-bounded.
pub fn box3_correlation_check(f: &Grid3, g: [&Grid3; 3]) -> Result<Box3Report> {
    for (i, gi) in g.iter().enumerate() {
        if gi.dims != f.dims {
            return invalid(format!("g{} has shape {:?}, f has {:?}", i + 1, gi.dims, f.dims));
        }
        if !gi.independent_of(i) {
            return invalid(format!("g{} depends on coordinate {}", i + 1, i + 1));
        }
        if !gi.is_one_bounded() {
            return invalid(format!("g{} is not 1-bounded", i + 1));
        }
    }
    if !f.is_one_bounded() {
        return invalid("f is not 1-bounded");
    }
    let prods: Vec<Complex64> = (0..f.data.len())
        .map(|i| f.data[i] * g[0].data[i] * g[1].data[i] * g[2].data[i])
        .collect();
    let corr = (pairwise_c(&prods) / f.data.len() as f64).norm();
    let bx = box3_norm_pow(f).max(0.0).powf(0.125);
    let rep = InequalityReport::new(corr, bx);
    Ok(Box3Report {
        corr,
        r#box: bx,
        holds: rep.holds,
    })
}

// ---------------------------------------------------------------------------
// Two-sided experiment

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcatReport {
    /// Triple box average over `a, b in [floor(delta2 M)]` with `mu_{delta3, M}`.
    pub lhs: f64,
    /// `E_{u in [q]} ||f 1_{u+qZ}||_{U^5}^{32}`.
    pub rhs: f64,
    pub n: u64,
    pub q: u64,
    pub m: u64,
    pub delta1: String,
    pub delta2: String,
    pub delta3: String,
    pub pairs_evaluated: u64,
    pub mode: &'static str,
}

pub fn concat_experiment(
    f: &Signal,
    params: &Params,
    delta1: Rational,
    delta2: Rational,
    delta3: Rational,
    mode: AverageMode,
) -> Result<ConcatReport> {
    crate::params::check_unit_interval("delta1", delta1)?;
    let q = params.q();
    let class_width = f.width().div_ceil(q as usize) + 1;
    check_budget(
        &format!("local U^5 norms at width {}", f.width()),
        q as f64 * u_norm_cost(class_width, 5),
        OP_LIMIT,
    )?;
    let avg = triple_box_average(f, params, delta2, delta3, mode)?;
    let locals: Vec<f64> = (1..=q as i64)
        .map(|u| u_norm_local_pow(f, 5, u, q))
        .collect::<Result<_>>()?;
    Ok(ConcatReport {
        lhs: avg.value,
        rhs: pairwise(&locals) / q as f64,
        n: params.n(),
        q,
        m: params.m(),
        delta1: delta1.to_string(),
        delta2: delta2.to_string(),
        delta3: delta3.to_string(),
        pairs_evaluated: avg.pairs_evaluated,
        mode: avg.mode,
    })
}
