//! Scale parameters shared by the counting, weight and concatenation code.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Exact rational parameter such as a `delta`.
pub type Rational = Ratio<i64>;

/// `M = floor(sqrt(N / q))`, computed as `isqrt(floor(N / q))`.
pub fn scale_m(n: u64, q: u64) -> u64 {
    (n / q).isqrt()
}

/// `(N, q, M)` for the pattern `x, x + y, x + q y^2` with `y` in `[M]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ProgressionInstance {
    pub n: u64,
    pub q: u64,
    pub m: u64,
}

impl ProgressionInstance {
    pub fn new(n: u64, q: u64) -> Result<Self> {
        if n == 0 || q == 0 {
            return invalid(format!("N and q must be positive (N={n}, q={q})"));
        }
        if q > n {
            return invalid(format!("q={q} exceeds N={n}"));
        }
        Ok(ProgressionInstance { n, q, m: scale_m(n, q) })
    }
}

impl fmt::Display for ProgressionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} q={} M={}", self.n, self.q, self.m)
    }
}

/// Parses `"3/8"`, `"0.125"` or `"1"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("cannot parse rational {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let a = i64::from_str(a.trim()).map_err(|_| bad())?;
        let b = i64::from_str(b.trim()).map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(a, b));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int: i64 = if int.is_empty() || int == "-" {
            0
        } else {
            i64::from_str(int).map_err(|_| bad())?
        };
        let den = 10i64.pow(frac.len() as u32);
        let num: i64 = if frac.is_empty() {
            0
        } else {
            i64::from_str(frac).map_err(|_| bad())?
        };
        let sign = if neg { -1 } else { 1 };
        return Ok(Ratio::new(int * den + sign * num, den));
    }
    i64::from_str(s).map(Ratio::from_integer).map_err(|_| bad())
}

/// `floor(delta * m)`.
pub fn floor_scaled(delta: Rational, m: u64) -> u64 {
    let v = (delta * Ratio::from_integer(m as i64)).floor().to_integer();
    v.max(0) as u64
}

pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A progression instance together with named rational parameters
/// (`delta1`..`delta6`, `gamma`, `eps`), each in `(0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub instance: ProgressionInstance,
    deltas: BTreeMap<String, Rational>,
}

pub const PARAM_NAMES: [&str; 9] = [
    "delta", "delta1", "delta2", "delta3", "delta4", "delta5", "delta6", "gamma", "eps",
];

impl Params {
    pub fn new(n: u64, q: u64) -> Result<Self> {
        Ok(Params {
            instance: ProgressionInstance::new(n, q)?,
            deltas: BTreeMap::new(),
        })
    }

    pub fn with(mut self, name: &str, value: Rational) -> Result<Self> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn set(&mut self, name: &str, value: Rational) -> Result<()> {
        if !PARAM_NAMES.contains(&name) {
            return invalid(format!("unknown parameter {name}"));
        }
        check_unit_interval(name, value)?;
        self.deltas.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Rational> {
        self.deltas.get(name).copied()
    }

    pub fn n(&self) -> u64 {
        self.instance.n
    }

    pub fn q(&self) -> u64 {
        self.instance.q
    }

    pub fn m(&self) -> u64 {
        self.instance.m
    }
}

pub(crate) fn check_unit_interval(name: &str, value: Rational) -> Result<()> {
    if value <= Rational::zero() || value > Rational::from_integer(1) {
        return invalid(format!("{name}={value} must lie in (0, 1]"));
    }
    Ok(())
}
