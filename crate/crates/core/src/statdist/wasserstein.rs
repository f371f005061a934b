use crate::error::{Error, Result};

/// First-order Wasserstein distance between two empirical distributions on
/// the line: the integral over `u` in `[0, 1]` of the gap between the two
/// empirical quantile functions.
pub fn wasserstein_1d(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::data("wasserstein_1d needs non-empty samples"));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as u128, b.len() as u128);
    // Quantile breakpoints i/n and j/m compared exactly as i*m vs j*n.
    let (mut i, mut j) = (0usize, 0usize);
    let mut at = 0u128; // current position scaled by n*m
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let end_a = (i as u128 + 1) * m;
        let end_b = (j as u128 + 1) * n;
        let end = end_a.min(end_b);
        total += (end - at) as f64 * (a[i] - b[j]).abs();
        at = end;
        if end_a == end {
            i += 1;
        }
        if end_b == end {
            j += 1;
        }
    }
    Ok(total / (n * m) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        assert_eq!(wasserstein_1d(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn point_masses() {
        assert_eq!(wasserstein_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn unequal_sizes() {
        // Quantiles: a = 0 on [0, 1/2), 1 on [1/2, 1]; b = 0 on [0, 1/3), 1/2, 1 on [2/3, 1].
        let d = wasserstein_1d(&[0.0, 1.0], &[0.0, 0.5, 1.0]).unwrap();
        let expected = (1.0 / 6.0) * 0.5 + (1.0 / 6.0) * 0.5;
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }
}
