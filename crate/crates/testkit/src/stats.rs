//! Small statistics helpers, definitional versions.

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divide by n, not n - 1).
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Relevance gain for rank position `pos` (0-based) out of `n` items:
/// quintile buckets graded 4 down to 0.
pub fn quintile_gain(pos: usize, n: usize) -> f64 {
    assert!(pos < n);
    (4 - pos * 5 / n) as f64
}
