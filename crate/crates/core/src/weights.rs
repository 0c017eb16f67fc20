//! Triangular difference weights, van der Corput's inequality, and the
//! averaged three-direction box-norm functional that controls the counting
//! operator.

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gowers::{box_norm_pow, BoxSpec, Direction};
use crate::params::{check_unit_interval, floor_scaled, Params, Rational};
use crate::rng::SplitMix64;
use crate::signal::Signal;
use crate::sum::{pairwise, pairwise_c};
use crate::InequalityReport;

/// Rational arithmetic for weight bookkeeping; wide enough for `delta^2`
/// with 15-digit decimal denominators.
pub type Wide = Ratio<i128>;

fn widen(r: Rational) -> Wide {
    Ratio::new(*r.numer() as i128, *r.denom() as i128)
}

/// `mu(h) = #{(h1, h2) in [H]^2 : h1 - h2 = h} / (delta^2 M)` with `H = floor(delta M)`,
/// i.e. `max(0, H - |h|) / (delta^2 M)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TriangularWeight {
    #[serde(serialize_with = "ser_ratio")]
    pub delta: Rational,
    pub m: u64,
    pub h: u64,
}

fn ser_ratio<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// Builds `mu_{delta, M}`; rejects weights with `floor(delta M) = 0`.
pub fn mu(delta: Rational, m: u64) -> Result<TriangularWeight> {
    check_unit_interval("delta", delta)?;
    if m == 0 {
        return invalid("M must be positive");
    }
    let h = floor_scaled(delta, m);
    if h == 0 {
        return Err(Error::DegenerateWeight {
            delta: delta.to_string(),
            m,
        });
    }
    Ok(TriangularWeight { delta, m, h })
}

impl TriangularWeight {
    /// `delta^2 M`.
    pub fn normalizer(&self) -> Wide {
        let d = widen(self.delta);
        d * d * Wide::from_integer(self.m as i128)
    }

    /// Unnormalized count `r_{[H]}(h) = max(0, H - |h|)`.
    pub fn count(&self, h: i64) -> u64 {
        (self.h as i64 - h.abs()).max(0) as u64
    }

    pub fn value_exact(&self, h: i64) -> Wide {
        Wide::from_integer(self.count(h) as i128) / self.normalizer()
    }

    pub fn value(&self, h: i64) -> f64 {
        self.count(h) as f64 / self.normalizer().to_f64().unwrap()
    }

    /// Largest `|h|` with nonzero weight.
    pub fn radius(&self) -> i64 {
        self.h as i64 - 1
    }

    /// `sum_h mu(h) = H^2 / (delta^2 M)`.
    pub fn mass_exact(&self) -> Wide {
        Wide::from_integer((self.h * self.h) as i128) / self.normalizer()
    }

    /// Mass by direct summation of the stored values.
    pub fn mass_summed(&self) -> Wide {
        (-self.radius()..=self.radius()).map(|h| self.value_exact(h)).sum()
    }

    pub fn l2_sq_exact(&self) -> Wide {
        let n = self.normalizer();
        (-self.radius()..=self.radius())
            .map(|h| {
                let v = Wide::from_integer(self.count(h) as i128);
                v * v
            })
            .sum::<Wide>()
            / (n * n)
    }

    /// `delta M` is an integer.
    pub fn is_integral(&self) -> bool {
        (self.delta * Rational::from_integer(self.m as i64)).is_integer()
    }

    /// Box-norm directions `step * [H]` whose power, divided by
    /// `normalizer^d`, equals the `mu`-weighted sum of `Delta_{step_i h_i}`.
    pub fn directions(&self, steps: &[i64]) -> Vec<Direction> {
        steps.iter().map(|&s| Direction::progression(s, self.h)).collect()
    }
}

/// `sum_{x, h_1..h_d} prod_i mu(h_i) Delta_{steps_1 h_1, ..., steps_d h_d} f(x)`,
/// evaluated as a box norm over `steps_i * [H]`.
pub fn weighted_box_pow(f: &Signal, steps: &[i64], w: &TriangularWeight) -> Result<f64> {
    if steps.contains(&0) {
        return invalid("weighted box directions need nonzero steps");
    }
    let spec = BoxSpec::new(w.directions(steps))?;
    let norm = w.normalizer().to_f64().unwrap().powi(steps.len() as i32);
    Ok(box_norm_pow(f, &spec)?.re / norm)
}

/// Van der Corput:
/// `|sum_{y in [M]} g(y)|^2 <= (M + H)/H^2 sum_h r_{[H]}(h) sum_{y in [M] cap ([M] - h)} g(y + h) conj g(y)`.
///
/// The report carries the real part of the right-hand side; the imaginary
/// part vanishes because the `h` and `-h` terms are conjugate.
pub fn vdc_check(g: &Signal, m: u64, h: u64) -> Result<InequalityReport> {
    if h == 0 || h >= m {
        return invalid(format!("van der Corput needs 0 < H < M (H={h}, M={m})"));
    }
    let m = m as i64;
    let hh = h as i64;
    let terms: Vec<Complex64> = (1..=m).map(|y| g.get(y)).collect();
    let lhs = pairwise_c(&terms).norm_sqr();
    let lags: Vec<Complex64> = (-(hh - 1)..=hh - 1)
        .map(|k| {
            let r = (hh - k.abs()) as f64;
            let (ylo, yhi) = (1.max(1 - k), m.min(m - k));
            let terms: Vec<Complex64> = (ylo..=yhi).map(|y| g.get(y + k) * g.get(y).conj()).collect();
            pairwise_c(&terms) * r
        })
        .collect();
    let rhs = pairwise_c(&lags) * ((m + hh) as f64 / (hh * hh) as f64);
    Ok(InequalityReport::new(lhs, rhs.re))
}

/// How the `(a, b)` average is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AverageMode {
    /// Every pair in `[A]^2`.
    Exact,
    /// `samples` pairs drawn uniformly (with replacement) from a
    /// `SplitMix64` seeded with `seed`: `a = 1 + below(A)`, then `b = 1 + below(A)`.
    MonteCarlo { samples: u64, seed: u64 },
}

/// `M` below which [`AverageMode::auto`] evaluates every pair.
pub const EXACT_MODE_MAX_M: u64 = 64;

impl AverageMode {
    pub fn auto(m: u64, seed: u64) -> AverageMode {
        if m < EXACT_MODE_MAX_M {
            AverageMode::Exact
        } else {
            AverageMode::MonteCarlo { samples: 256, seed }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AverageMode::Exact => "exact",
            AverageMode::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxAverage {
    pub value: f64,
    pub pairs_evaluated: u64,
    pub mode: &'static str,
}

pub(crate) fn pair_list(count: u64, mode: AverageMode) -> Vec<(i64, i64)> {
    match mode {
        AverageMode::Exact => (1..=count as i64)
            .flat_map(|a| (1..=count as i64).map(move |b| (a, b)))
            .collect(),
        AverageMode::MonteCarlo { samples, seed } => {
            let mut rng = SplitMix64::new(seed);
            (0..samples)
                .map(|_| {
                    let a = 1 + rng.below(count) as i64;
                    let b = 1 + rng.below(count) as i64;
                    (a, b)
                })
                .collect()
        }
    }
}

/// `E_{a, b in [floor(delta2 M)]} sum_{x, h} mu(h1) mu(h2) mu(h3)
/// Delta_{2q(a+b) h1, 2q b h2, 2q a h3} f(x)` with `mu = mu_{delta3, M}`.
pub fn triple_box_average(
    f: &Signal,
    params: &Params,
    delta2: Rational,
    delta3: Rational,
    mode: AverageMode,
) -> Result<BoxAverage> {
    let m = params.m();
    let outer = mu(delta2, m)?.h;
    let w = mu(delta3, m)?;
    let q2 = 2 * params.q() as i64;
    let pairs = pair_list(outer, mode);
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| weighted_box_pow(f, &[q2 * (a + b), q2 * b, q2 * a], &w))
        .collect::<Result<_>>()?;
    Ok(BoxAverage {
        value: pairwise(&values) / pairs.len() as f64,
        pairs_evaluated: pairs.len() as u64,
        mode: mode.name(),
    })
}
