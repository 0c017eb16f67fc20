//! Finitely supported functions `Z -> C` and the shift/difference operators
//! the rest of the crate is built from.

use num_complex::Complex64;

use crate::sum::pairwise_c;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A finitely supported function on the integers, stored densely over its
/// support hull.
///
/// Values are kept canonical: leading and trailing zeros are trimmed on
/// construction, so two signals describing the same function compare equal.
/// When every stored value lies in `{-1, 0, 1}` the signal is flagged exact
/// and norm evaluation switches to integer accumulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    offset: i64,
    values: Vec<Complex64>,
    exact: bool,
}

impl Default for Signal {
    fn default() -> Self {
        Signal::zero()
    }
}

fn is_unit_integer(z: &Complex64) -> bool {
    z.im == 0.0 && (z.re == 0.0 || z.re == 1.0 || z.re == -1.0)
}

impl Signal {
    /// Builds `f` with `f(offset + i) = values[i]` and zero elsewhere.
    pub fn new(offset: i64, values: Vec<Complex64>) -> Signal {
        let Some(first) = values.iter().position(|z| *z != ZERO) else {
            return Signal::zero();
        };
        let last = values.iter().rposition(|z| *z != ZERO).unwrap();
        let values = if first == 0 && last + 1 == values.len() {
            values
        } else {
            values[first..=last].to_vec()
        };
        let exact = values.iter().all(is_unit_integer);
        Signal {
            offset: offset + first as i64,
            values,
            exact,
        }
    }

    pub fn from_real(offset: i64, values: &[f64]) -> Signal {
        Signal::new(offset, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_ints(offset: i64, values: &[i64]) -> Signal {
        Signal::new(offset, values.iter().map(|&v| Complex64::new(v as f64, 0.0)).collect())
    }

    /// Samples `f` on `lo..=hi`.
    pub fn from_fn(lo: i64, hi: i64, f: impl Fn(i64) -> Complex64) -> Signal {
        if hi < lo {
            return Signal::zero();
        }
        Signal::new(lo, (lo..=hi).map(f).collect())
    }

    pub fn zero() -> Signal {
        Signal {
            offset: 0,
            values: Vec::new(),
            exact: true,
        }
    }

    /// Indicator of `{lo, ..., hi}`.
    pub fn interval(lo: i64, hi: i64) -> Signal {
        if hi < lo {
            return Signal::zero();
        }
        Signal::new(lo, vec![Complex64::new(1.0, 0.0); (hi - lo + 1) as usize])
    }

    /// Indicator of a finite set.
    pub fn indicator(set: &[i64]) -> Signal {
        let (Some(&lo), Some(&hi)) = (set.iter().min(), set.iter().max()) else {
            return Signal::zero();
        };
        let mut values = vec![ZERO; (hi - lo + 1) as usize];
        for &x in set {
            values[(x - lo) as usize] = Complex64::new(1.0, 0.0);
        }
        Signal::new(lo, values)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of stored cells, i.e. the width of the support hull.
    pub fn width(&self) -> usize {
        self.values.len()
    }

    /// `(min, max)` of the support hull, `None` for the zero signal.
    pub fn support(&self) -> Option<(i64, i64)> {
        if self.values.is_empty() {
            None
        } else {
            Some((self.offset, self.offset + self.values.len() as i64 - 1))
        }
    }

    pub fn get(&self, x: i64) -> Complex64 {
        let i = x - self.offset;
        if i < 0 || i >= self.values.len() as i64 {
            ZERO
        } else {
            self.values[i as usize]
        }
    }

    /// Integer values when the signal is exact.
    pub fn to_ints(&self) -> Option<Vec<i64>> {
        self.exact.then(|| self.values.iter().map(|z| z.re as i64).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_one_bounded(&self) -> bool {
        self.sup_norm() <= 1.0 + 1e-12
    }

    pub fn sum(&self) -> Complex64 {
        pairwise_c(&self.values)
    }

    /// `sum_x |f(x)|^2`.
    pub fn l2_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `x -> f(x + h)`.
    pub fn shift(&self, h: i64) -> Signal {
        Signal {
            offset: self.offset - h,
            values: self.values.clone(),
            exact: self.exact,
        }
    }

    pub fn conj(&self) -> Signal {
        Signal {
            offset: self.offset,
            values: self.values.iter().map(|z| z.conj()).collect(),
            exact: self.exact,
        }
    }

    pub fn scale(&self, c: Complex64) -> Signal {
        Signal::new(self.offset, self.values.iter().map(|z| z * c).collect())
    }

    pub fn map(&self, f: impl Fn(i64, Complex64) -> Complex64) -> Signal {
        Signal::new(
            self.offset,
            self.values
                .iter()
                .enumerate()
                .map(|(i, &z)| f(self.offset + i as i64, z))
                .collect(),
        )
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Signal) -> Signal {
        match (self.support(), other.support()) {
            (Some((a, b)), Some((c, d))) => {
                let lo = a.max(c);
                let hi = b.min(d);
                Signal::from_fn(lo, hi, |x| self.get(x) * other.get(x))
            }
            _ => Signal::zero(),
        }
    }

    pub fn add(&self, other: &Signal) -> Signal {
        match (self.support(), other.support()) {
            (None, _) => other.clone(),
            (_, None) => self.clone(),
            (Some((a, b)), Some((c, d))) => Signal::from_fn(a.min(c), b.max(d), |x| self.get(x) + other.get(x)),
        }
    }

    /// Multiplicative derivative `x -> f(x + h) * conj(f(x))`.
    pub fn mult_derivative(&self, h: i64) -> Signal {
        self.asym_derivative(h, 0)
    }

    /// Iterated derivative `Delta_{h_1, ..., h_k} f`.
    pub fn mult_derivatives(&self, hs: &[i64]) -> Signal {
        hs.iter().fold(self.clone(), |g, &h| g.mult_derivative(h))
    }

    /// `x -> f(x + h) * conj(f(x + hp))`.
    pub fn asym_derivative(&self, h: i64, hp: i64) -> Signal {
        let Some((lo, hi)) = self.support() else {
            return Signal::zero();
        };
        let start = (lo - h).max(lo - hp);
        let end = (hi - h).min(hi - hp);
        if end < start {
            return Signal::zero();
        }
        let vals = &self.values;
        let a = (start + h - lo) as usize;
        let b = (start + hp - lo) as usize;
        let n = (end - start + 1) as usize;
        let values = (0..n).map(|i| vals[a + i] * vals[b + i].conj()).collect();
        Signal::new(start, values)
    }

    /// `x -> f(u + q x)`.
    pub fn subsample(&self, u: i64, q: u64) -> Signal {
        assert!(q > 0, "subsample modulus must be positive");
        let q = q as i64;
        let Some((lo, hi)) = self.support() else {
            return Signal::zero();
        };
        let start = (lo - u).div_euclid(q) + i64::from((lo - u).rem_euclid(q) != 0);
        let end = (hi - u).div_euclid(q);
        Signal::from_fn(start, end, |x| self.get(u + q * x))
    }

    /// `f * 1_{u + qZ}`.
    pub fn restrict_residue(&self, u: i64, q: u64) -> Signal {
        let q = q as i64;
        self.map(|x, z| if (x - u).rem_euclid(q) == 0 { z } else { ZERO })
    }

    /// Largest pointwise distance to `other`.
    pub fn max_abs_diff(&self, other: &Signal) -> f64 {
        let (a, b) = match (self.support(), other.support()) {
            (None, None) => return 0.0,
            (Some(s), None) | (None, Some(s)) => s,
            (Some((a, b)), Some((c, d))) => (a.min(c), b.max(d)),
        };
        (a..=b).map(|x| (self.get(x) - other.get(x)).norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_signal(rng: &mut SplitMix64, width: usize) -> Signal {
        let lo = rng.range(-10, 10);
        Signal::new(lo, (0..width).map(|_| rng.disk()).collect())
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn equality_ignores_padding() {
        let a = Signal::from_real(0, &[0.0, 1.0, 2.0, 0.0, 0.0]);
        let b = Signal::from_real(1, &[1.0, 2.0]);
        assert_eq!(a, b);
        assert_eq!(Signal::from_real(5, &[0.0, 0.0]), Signal::zero());
    }

    #[test]
    fn exact_flag_tracks_values() {
        assert!(Signal::from_ints(0, &[1, -1, 0, 1]).is_exact());
        assert!(!Signal::from_real(0, &[0.5]).is_exact());
        assert!(!Signal::new(0, vec![Complex64::new(0.0, 1.0)]).is_exact());
    }

    #[test]
    fn shift_examples() {
        let f = Signal::interval(1, 3);
        assert_eq!(f.shift(0), f);
        let g = f.shift(1);
        for x in -3..6 {
            let expected = if (0..=2).contains(&x) { 1.0 } else { 0.0 };
            assert_eq!(g.get(x), c(expected));
        }
        assert!(g.is_exact());
        let mut rng = SplitMix64::new(3);
        let f = random_signal(&mut rng, 12);
        assert_eq!(f.shift(5).shift(-7), f.shift(-2));
    }

    #[test]
    fn mult_derivative_examples() {
        let mut rng = SplitMix64::new(4);
        let f = random_signal(&mut rng, 9);
        let d0 = f.mult_derivative(0);
        assert!(d0.max_abs_diff(&f.map(|_, z| c(z.norm_sqr()))) < 1e-15);

        let ind = Signal::interval(1, 2);
        assert_eq!(ind.mult_derivative(1), Signal::interval(1, 1));

        let a = f.mult_derivative(2).mult_derivative(-3);
        let b = f.mult_derivative(-3).mult_derivative(2);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn asym_derivative_examples() {
        let mut rng = SplitMix64::new(5);
        let f = random_signal(&mut rng, 11);
        let sq = f.map(|_, z| c(z.norm_sqr()));
        assert!(f.asym_derivative(4, 4).max_abs_diff(&sq.shift(4)) < 1e-15);
        assert_eq!(Signal::interval(1, 2).asym_derivative(0, 1), Signal::interval(1, 1));
        let lhs = f.asym_derivative(3, -2);
        let rhs = f.asym_derivative(-2, 3).conj();
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn subsample_examples() {
        let mut rng = SplitMix64::new(6);
        let f = random_signal(&mut rng, 10);
        assert_eq!(f.subsample(1, 1), f.shift(1));
        assert_eq!(Signal::interval(1, 5).subsample(1, 2), Signal::interval(0, 2));
        assert_eq!(Signal::zero().subsample(2, 3), Signal::zero());
        // Negative offsets exercise the rounding of the index range.
        let g = Signal::from_ints(-7, &[1, 1, -1, 0, 1, 1, 1, -1, 1]);
        for (u, q) in [(1, 3), (2, 3), (3, 3), (1, 4), (4, 4)] {
            let s = g.subsample(u, q);
            for x in -10..10 {
                assert_eq!(s.get(x), g.get(u + q as i64 * x));
            }
        }
    }

    #[test]
    fn derivative_support_is_contained() {
        let mut rng = SplitMix64::new(8);
        for _ in 0..50 {
            let f = random_signal(&mut rng, 15);
            let h = rng.range(-20, 20);
            let d = f.mult_derivative(h);
            if let (Some((a, b)), Some((lo, hi))) = (d.support(), f.support()) {
                assert!(a >= lo.max(lo - h) && b <= hi.min(hi - h));
            }
        }
    }
}
