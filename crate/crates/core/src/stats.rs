//! Order-independent Monte Carlo aggregation.
//!
//! Trial results are always collected into a vector indexed by trial number
//! before reduction, and reductions use pairwise summation over that fixed
//! order, so a parallel run reproduces a serial one bit-for-bit.

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().fold(0.0, |a, &b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (n − 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Mean and standard error in one pass over the data.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), standard_error(xs))
}

pub fn is_strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

pub fn is_strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

/// True when more than half of the series satisfy `pred`.
pub fn majority<F: Fn(&[f64]) -> bool>(series: &[Vec<f64>], pred: F) -> bool {
    let votes = series.iter().filter(|s| pred(s)).count();
    2 * votes > series.len()
}
