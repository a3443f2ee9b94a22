use super::quantize::{quantize, DEFAULT_BINS};
use super::stats::{
    histogram_entropy_uniformity, mean, percentile_sorted, shape_moments, sorted,
};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};

pub const NAMES: [&str; 18] = [
    "Energy",
    "Total Energy",
    "Entropy",
    "Minimum",
    "10th Percentile",
    "90th Percentile",
    "Maximum",
    "Mean",
    "Median",
    "Interquartile Range",
    "Range",
    "Mean Absolute Deviation",
    "Robust Mean Absolute Deviation",
    "Root Mean Squared",
    "Skewness",
    "Kurtosis",
    "Variance",
    "Uniformity",
];

/// Unit pixel area at desk scale, so Total Energy equals Energy.
pub const PIXEL_AREA: f64 = 1.0;

/// Intensity statistics of the masked pixels; entropy and uniformity use the
/// 32-bin quantized histogram.
pub fn first_order(img: &Image, mask: &Mask) -> Result<[f64; 18]> {
    let x: Vec<f64> = img
        .pixels()
        .iter()
        .zip(mask.bits())
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if x.is_empty() {
        return Err(Error::Degenerate("empty mask".into()));
    }
    let q = quantize(img, mask, DEFAULT_BINS)?;
    let mut counts = vec![0usize; DEFAULT_BINS];
    for &l in q.levels().iter().filter(|&&l| l > 0) {
        counts[l - 1] += 1;
    }
    let (entropy, uniformity) = histogram_entropy_uniformity(&counts);

    let n = x.len() as f64;
    let s = sorted(&x);
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let mu = mean(&x);
    let p10 = percentile_sorted(&s, 10.0);
    let p90 = percentile_sorted(&s, 90.0);
    let mad = x.iter().map(|v| (v - mu).abs()).sum::<f64>() / n;
    let robust: Vec<f64> = x.iter().copied().filter(|&v| v >= p10 && v <= p90).collect();
    let robust_mu = mean(&robust);
    let rmad = robust.iter().map(|v| (v - robust_mu).abs()).sum::<f64>() / robust.len() as f64;
    let variance = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    let (skew, kurt) = shape_moments(&x, mu);
    let (min, max) = (s[0], s[s.len() - 1]);
    Ok([
        energy,
        energy * PIXEL_AREA,
        entropy,
        min,
        p10,
        p90,
        max,
        mu,
        percentile_sorted(&s, 50.0),
        percentile_sorted(&s, 75.0) - percentile_sorted(&s, 25.0),
        max - min,
        mad,
        rmad,
        (energy / n).sqrt(),
        skew,
        kurt,
        variance,
        uniformity,
    ])
}
