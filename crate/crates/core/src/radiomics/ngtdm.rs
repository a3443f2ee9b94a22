use super::quantize::QuantizedImage;
use crate::error::{Error, Result};

pub const NAMES: [&str; 5] = ["Coarseness", "Contrast", "Busyness", "Complexity", "Strength"];

pub const COARSENESS_CAP: f64 = 1e6;

/// Per-level pixel counts `n_i` and absolute differences `s_i` from the mean
/// of the masked 8-neighbours; pixels without a masked neighbour are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneDifferences {
    pub n: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn ngtdm_matrix(q: &QuantizedImage) -> ToneDifferences {
    let ng = q.n_bins();
    let mut n = vec![0.0; ng];
    let mut s = vec![0.0; ng];
    for y in 0..q.height() as isize {
        for x in 0..q.width() as isize {
            let Some(l) = q.level(y, x) else { continue };
            let mut sum = 0.0;
            let mut count = 0usize;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if (dy, dx) == (0, 0) {
                        continue;
                    }
                    if let Some(v) = q.level(y + dy, x + dx) {
                        sum += v as f64;
                        count += 1;
                    }
                }
            }
            if count > 0 {
                n[l - 1] += 1.0;
                s[l - 1] += (l as f64 - sum / count as f64).abs();
            }
        }
    }
    ToneDifferences { n, s }
}

pub fn ngtdm_features(q: &QuantizedImage) -> Result<[f64; 5]> {
    let ToneDifferences { n, s } = ngtdm_matrix(q);
    let nvp: f64 = n.iter().sum();
    if nvp == 0.0 {
        return Err(Error::Degenerate("no pixel has a masked neighbour".into()));
    }
    let p: Vec<f64> = n.iter().map(|c| c / nvp).collect();
    let active: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let ngp = active.len() as f64;
    let lv = |i: usize| (i + 1) as f64;

    let ps: f64 = active.iter().map(|&i| p[i] * s[i]).sum();
    let s_total: f64 = s.iter().sum();
    let coarseness = if ps == 0.0 { COARSENESS_CAP } else { (1.0 / ps).min(COARSENESS_CAP) };

    let mut pair_contrast = 0.0;
    let mut busy_den = 0.0;
    let mut complexity = 0.0;
    let mut strength_num = 0.0;
    for &i in &active {
        for &j in &active {
            let d = lv(i) - lv(j);
            pair_contrast += p[i] * p[j] * d * d;
            busy_den += (lv(i) * p[i] - lv(j) * p[j]).abs();
            complexity += d.abs() * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j]);
            strength_num += (p[i] + p[j]) * d * d;
        }
    }
    let contrast = if ngp > 1.0 {
        pair_contrast / (ngp * (ngp - 1.0)) * s_total / nvp
    } else {
        0.0
    };
    let busyness = if busy_den == 0.0 { 0.0 } else { ps / busy_den };
    let strength = if s_total == 0.0 { 0.0 } else { strength_num / s_total };
    Ok([coarseness, contrast, busyness, complexity / nvp, strength])
}
