//! Sample statistics shared by the first-order and frequency families.

pub const LOG_EPS: f64 = f64::EPSILON;

pub fn log2_safe(p: f64) -> f64 {
    (p + LOG_EPS).log2()
}

/// Linear-interpolation percentile of an ascending slice.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population central moment of order `k`.
pub fn central_moment(values: &[f64], mu: f64, k: i32) -> f64 {
    values.iter().map(|&v| (v - mu).powi(k)).sum::<f64>() / values.len() as f64
}

/// Skewness and kurtosis (non-excess); both 0 for a flat sample.
pub fn shape_moments(values: &[f64], mu: f64) -> (f64, f64) {
    let m2 = central_moment(values, mu, 2);
    if m2 <= 0.0 {
        return (0.0, 0.0);
    }
    let m3 = central_moment(values, mu, 3);
    let m4 = central_moment(values, mu, 4);
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// Entropy (bits) and uniformity of a histogram of counts.
pub fn histogram_entropy_uniformity(counts: &[usize]) -> (f64, f64) {
    let total: usize = counts.iter().sum();
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    for &c in counts.iter().filter(|&&c| c > 0) {
        let p = c as f64 / total as f64;
        entropy -= p * log2_safe(p);
        uniformity += p * p;
    }
    (entropy, uniformity)
}

/// Counts over `n_bins` equal-width bins spanning `[min, max]`.
pub fn equal_width_histogram(values: &[f64], n_bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        let b = if hi > lo {
            (((v - lo) / (hi - lo) * n_bins as f64).floor() as usize).min(n_bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    counts
}
