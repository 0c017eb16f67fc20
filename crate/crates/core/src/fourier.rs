//! Autocorrelations and exponential sums.
//!
//! Conventions: `e(t) = exp(2 pi i t)` and `hat f(beta) = sum_x f(x) e(beta x)`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::signal::Signal;

/// Widths up to this size use the quadratic autocorrelation loop.
pub const DIRECT_AUTOCORR_MAX: usize = 48;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// `e(t)`.
pub fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * t)
}

/// Smallest power of two that is at least `2 * width - 1`, so circular and
/// linear autocorrelation agree.
pub fn autocorr_len(width: usize) -> usize {
    (2 * width.max(1) - 1).next_power_of_two()
}

/// `ac[k + W - 1] = sum_x f(x + k) conj(f(x))` for `k` in `-(W-1)..=W-1`,
/// via a zero-padded DFT.
pub fn autocorrelation_fft(values: &[Complex64]) -> Vec<Complex64> {
    let w = values.len();
    if w == 0 {
        return Vec::new();
    }
    let len = autocorr_len(w);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..w].copy_from_slice(values);
    plan(len, false).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    plan(len, true).process(&mut buf);
    let scale = 1.0 / len as f64;
    (0..2 * w - 1)
        .map(|i| {
            let k = i as i64 - (w as i64 - 1);
            buf[k.rem_euclid(len as i64) as usize] * scale
        })
        .collect()
}

pub fn autocorrelation_direct(values: &[Complex64]) -> Vec<Complex64> {
    let w = values.len();
    if w == 0 {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * w - 1];
    for k in 0..w {
        let mut acc = Complex64::new(0.0, 0.0);
        for x in 0..w - k {
            acc += values[x + k] * values[x].conj();
        }
        out[w - 1 + k] = acc;
        out[w - 1 - k] = acc.conj();
    }
    out
}

pub fn autocorrelation(values: &[Complex64]) -> Vec<Complex64> {
    if values.len() <= DIRECT_AUTOCORR_MAX {
        autocorrelation_direct(values)
    } else {
        autocorrelation_fft(values)
    }
}

/// Integer autocorrelation of a `{-1, 0, 1}`-valued sequence (real, so the
/// conjugate is the identity). Uses the DFT above the direct threshold and
/// rounds each lag, which is exact while the float error stays below 1/2.
pub fn autocorrelation_int(values: &[i64]) -> Vec<i64> {
    let w = values.len();
    if w == 0 {
        return Vec::new();
    }
    if w <= DIRECT_AUTOCORR_MAX {
        let mut out = vec![0i64; 2 * w - 1];
        for k in 0..w {
            let acc: i64 = (0..w - k).map(|x| values[x + k] * values[x]).sum();
            out[w - 1 + k] = acc;
            out[w - 1 - k] = acc;
        }
        out
    } else {
        autocorrelation_int_fft(values)
    }
}

/// DFT route for integer sequences regardless of width.
pub fn autocorrelation_int_fft(values: &[i64]) -> Vec<i64> {
    let cvals: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
    autocorrelation_fft(&cvals)
        .into_iter()
        .map(|z| z.re.round() as i64)
        .collect()
}

/// `|sum_k values[k] e(beta k)|`; the magnitude does not depend on where the
/// signal starts.
pub fn exp_sum_abs(values: &[Complex64], beta: f64) -> f64 {
    exp_sum(values, beta).norm()
}

pub fn exp_sum(values: &[Complex64], beta: f64) -> Complex64 {
    let step = e(beta);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, v) in values.iter().enumerate() {
        // Re-anchor the running phase periodically to bound drift.
        if k % 64 == 0 {
            phase = e(beta * k as f64);
        }
        acc += v * phase;
        phase *= step;
    }
    acc
}

/// `sum_x f(x) e(beta x)` with the true offset.
pub fn fourier_coefficient(f: &Signal, beta: f64) -> Complex64 {
    exp_sum(f.values(), beta) * e(beta * f.offset() as f64)
}

/// `|sum_k values[k] e(j k / grid)|` for `j = 0..grid`, `grid >= len`.
pub fn grid_magnitudes(values: &[Complex64], grid: usize) -> Vec<f64> {
    assert!(grid >= values.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); grid];
    buf[..values.len()].copy_from_slice(values);
    // The unnormalized inverse transform uses exp(+2 pi i jk / n).
    plan(grid, true).process(&mut buf);
    buf.iter().map(|z| z.norm()).collect()
}

/// Two-dimensional analogue: `out[j1 * g2 + j2] = sum_{a,b} t[a][b] e(j1 a / g1 + j2 b / g2)`.
pub fn grid_transform_2d(table: &[Vec<Complex64>], g1: usize, g2: usize) -> Vec<Complex64> {
    let rows = table.len();
    assert!(g1 >= rows);
    let mut buf = vec![Complex64::new(0.0, 0.0); g1 * g2];
    for (a, row) in table.iter().enumerate() {
        assert!(g2 >= row.len());
        buf[a * g2..a * g2 + row.len()].copy_from_slice(row);
    }
    let p2 = plan(g2, true);
    for a in 0..rows {
        p2.process(&mut buf[a * g2..(a + 1) * g2]);
    }
    let p1 = plan(g1, true);
    let mut col = vec![Complex64::new(0.0, 0.0); g1];
    for b in 0..g2 {
        for a in 0..g1 {
            col[a] = buf[a * g2 + b];
        }
        p1.process(&mut col);
        for a in 0..g1 {
            buf[a * g2 + b] = col[a];
        }
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn fft_and_direct_autocorrelation_agree() {
        let mut rng = SplitMix64::new(11);
        for w in [1usize, 2, 5, 17, 64, 100] {
            let v: Vec<Complex64> = (0..w).map(|_| rng.disk()).collect();
            let a = autocorrelation_fft(&v);
            let b = autocorrelation_direct(&v);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn integer_autocorrelation_is_exact() {
        let mut rng = SplitMix64::new(12);
        for w in [3usize, 49, 200, 1000] {
            let v: Vec<i64> = (0..w).map(|_| rng.ternary()).collect();
            let fft = autocorrelation_int_fft(&v);
            for k in 0..w {
                let direct: i64 = (0..w - k).map(|x| v[x + k] * v[x]).sum();
                assert_eq!(fft[w - 1 + k], direct);
            }
        }
    }

    #[test]
    fn grid_magnitudes_match_direct_sums() {
        let mut rng = SplitMix64::new(13);
        let v: Vec<Complex64> = (0..9).map(|_| rng.disk()).collect();
        let g = grid_magnitudes(&v, 36);
        for (j, m) in g.iter().enumerate() {
            assert!((m - exp_sum_abs(&v, j as f64 / 36.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn transform_2d_matches_direct() {
        let mut rng = SplitMix64::new(14);
        let t: Vec<Vec<Complex64>> = (0..3).map(|_| (0..4).map(|_| rng.disk()).collect()).collect();
        let (g1, g2) = (6, 8);
        let out = grid_transform_2d(&t, g1, g2);
        for j1 in 0..g1 {
            for j2 in 0..g2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, row) in t.iter().enumerate() {
                    for (b, v) in row.iter().enumerate() {
                        acc += v * e(j1 as f64 * a as f64 / g1 as f64 + j2 as f64 * b as f64 / g2 as f64);
                    }
                }
                assert!((acc - out[j1 * g2 + j2]).norm() < 1e-10);
            }
        }
    }
}
