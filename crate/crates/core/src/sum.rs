use num_complex::Complex64;

const LEAF: usize = 32;

/// Pairwise summation with a fixed split point, so the result only depends
/// on the order of `xs`.
pub(crate) fn pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

pub(crate) fn pairwise_c(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_c(&xs[..mid]) + pairwise_c(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise(&xs), 499500.0);
    }
}
