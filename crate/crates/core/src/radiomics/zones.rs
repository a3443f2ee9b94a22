//! Level/size matrix families: size zones, run lengths and dependence.

use super::quantize::QuantizedImage;
use super::stats::log2_safe;
use super::DIRECTIONS;
use crate::error::{Error, Result};
use crate::image::{components, Connectivity};

pub const GLSZM_NAMES: [&str; 16] = [
    "Small Area Emphasis",
    "Large Area Emphasis",
    "Gray Level Non-Uniformity",
    "Gray Level Non-Uniformity Normalized",
    "Size Zone Non-Uniformity",
    "Size Zone Non-Uniformity Normalized",
    "Zone Percentage",
    "Gray Level Variance",
    "Zone Variance",
    "Zone Entropy",
    "Low Gray Level Zone Emphasis",
    "High Gray Level Zone Emphasis",
    "Small Area Low Gray Level Emphasis",
    "Small Area High Gray Level Emphasis",
    "Large Area Low Gray Level Emphasis",
    "Large Area High Gray Level Emphasis",
];

pub const GLRLM_NAMES: [&str; 16] = [
    "Short Run Emphasis",
    "Long Run Emphasis",
    "Gray Level Non-Uniformity",
    "Gray Level Non-Uniformity Normalized",
    "Run Length Non-Uniformity",
    "Run Length Non-Uniformity Normalized",
    "Run Percentage",
    "Gray Level Variance",
    "Run Variance",
    "Run Entropy",
    "Low Gray Level Run Emphasis",
    "High Gray Level Run Emphasis",
    "Short Run Low Gray Level Emphasis",
    "Short Run High Gray Level Emphasis",
    "Long Run Low Gray Level Emphasis",
    "Long Run High Gray Level Emphasis",
];

pub const GLDM_NAMES: [&str; 14] = [
    "Small Dependence Emphasis",
    "Large Dependence Emphasis",
    "Gray Level Non-Uniformity",
    "Dependence Non-Uniformity",
    "Dependence Non-Uniformity Normalized",
    "Gray Level Variance",
    "Dependence Variance",
    "Dependence Entropy",
    "Low Gray Level Emphasis",
    "High Gray Level Emphasis",
    "Small Dependence Low Gray Level Emphasis",
    "Small Dependence High Gray Level Emphasis",
    "Large Dependence Low Gray Level Emphasis",
    "Large Dependence High Gray Level Emphasis",
];

/// Counts `P(i, j)` of entries with gray level `i` and size `j`, both 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSizeMatrix {
    pub n_levels: usize,
    pub max_size: usize,
    /// Row-major `n_levels × max_size`; entry `(i-1, j-1)`.
    pub counts: Vec<f64>,
    /// Pixels in the region, the denominator of the percentage feature.
    pub n_pixels: usize,
}

impl LevelSizeMatrix {
    pub fn from_entries(n_levels: usize, entries: &[(usize, usize)], n_pixels: usize) -> Self {
        let max_size = entries.iter().map(|e| e.1).max().unwrap_or(1);
        let mut counts = vec![0.0; n_levels * max_size];
        for &(l, s) in entries {
            counts[(l - 1) * max_size + (s - 1)] += 1.0;
        }
        LevelSizeMatrix {
            n_levels,
            max_size,
            counts,
            n_pixels,
        }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// The matrix divided by its total.
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total();
        self.counts.iter().map(|c| c / t).collect()
    }

    /// The sixteen emphasis/non-uniformity/variance/entropy quantities in the
    /// zone-matrix order.
    pub fn features(&self) -> [f64; 16] {
        let (ng, ns) = (self.n_levels, self.max_size);
        let n = self.total();
        let p = self.normalized();
        let mut by_level = vec![0.0; ng];
        let mut by_size = vec![0.0; ns];
        for i in 0..ng {
            for j in 0..ns {
                by_level[i] += self.counts[i * ns + j];
                by_size[j] += self.counts[i * ns + j];
            }
        }
        let mut mu_i = 0.0;
        let mut mu_j = 0.0;
        for i in 0..ng {
            for j in 0..ns {
                mu_i += (i + 1) as f64 * p[i * ns + j];
                mu_j += (j + 1) as f64 * p[i * ns + j];
            }
        }
        let mut f = [0.0; 16];
        for i in 0..ng {
            for j in 0..ns {
                let v = p[i * ns + j];
                if v == 0.0 {
                    continue;
                }
                let (a, b) = (((i + 1) as f64).powi(2), ((j + 1) as f64).powi(2));
                f[0] += v / b;
                f[1] += v * b;
                f[7] += v * ((i + 1) as f64 - mu_i).powi(2);
                f[8] += v * ((j + 1) as f64 - mu_j).powi(2);
                f[9] -= v * log2_safe(v);
                f[10] += v / a;
                f[11] += v * a;
                f[12] += v / (a * b);
                f[13] += v * a / b;
                f[14] += v * b / a;
                f[15] += v * a * b;
            }
        }
        let gln: f64 = by_level.iter().map(|c| c * c).sum();
        let sn: f64 = by_size.iter().map(|c| c * c).sum();
        f[2] = gln / n;
        f[3] = gln / (n * n);
        f[4] = sn / n;
        f[5] = sn / (n * n);
        f[6] = n / self.n_pixels as f64;
        f
    }
}

/// Zones of equal level under 8-connectivity.
pub fn glszm_matrix(q: &QuantizedImage) -> LevelSizeMatrix {
    let lv = q.levels();
    let (labels, sizes) = components(
        q.height(),
        q.width(),
        Connectivity::Eight,
        |i| lv[i] > 0,
        |a, b| lv[a] == lv[b],
    );
    let mut zone_level = vec![0; sizes.len()];
    for (i, &l) in labels.iter().enumerate() {
        if l != usize::MAX {
            zone_level[l] = lv[i];
        }
    }
    let entries: Vec<(usize, usize)> = zone_level.into_iter().zip(sizes).collect();
    LevelSizeMatrix::from_entries(q.n_bins(), &entries, q.voxel_count())
}

pub fn glszm_features(q: &QuantizedImage) -> Result<[f64; 16]> {
    Ok(glszm_matrix(q).features())
}

/// Maximal runs of equal level along `(dy, dx)`.
pub fn glrlm_matrix(q: &QuantizedImage, (dy, dx): (isize, isize)) -> LevelSizeMatrix {
    let mut entries = Vec::new();
    for y in 0..q.height() as isize {
        for x in 0..q.width() as isize {
            let Some(l) = q.level(y, x) else { continue };
            if q.level(y - dy, x - dx) == Some(l) {
                continue;
            }
            let mut len = 1;
            while q.level(y + dy * len as isize, x + dx * len as isize) == Some(l) {
                len += 1;
            }
            entries.push((l, len));
        }
    }
    LevelSizeMatrix::from_entries(q.n_bins(), &entries, q.voxel_count())
}

/// Run-length features averaged over the four directions.
pub fn glrlm_features(q: &QuantizedImage) -> Result<[f64; 16]> {
    let mut acc = [0.0; 16];
    for &dir in &DIRECTIONS {
        let f = glrlm_matrix(q, dir).features();
        acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
    }
    acc.iter_mut().for_each(|a| *a /= DIRECTIONS.len() as f64);
    Ok(acc)
}

/// Dependence of each pixel: itself plus every 8-neighbour in the region
/// with the same level.
pub fn gldm_matrix(q: &QuantizedImage) -> LevelSizeMatrix {
    let mut entries = Vec::new();
    for y in 0..q.height() as isize {
        for x in 0..q.width() as isize {
            let Some(l) = q.level(y, x) else { continue };
            let mut dep = 1;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if (dy, dx) != (0, 0) && q.level(y + dy, x + dx) == Some(l) {
                        dep += 1;
                    }
                }
            }
            entries.push((l, dep));
        }
    }
    LevelSizeMatrix::from_entries(q.n_bins(), &entries, q.voxel_count())
}

pub fn gldm_features(q: &QuantizedImage) -> Result<[f64; 14]> {
    let m = gldm_matrix(q);
    if m.total() == 0.0 {
        return Err(Error::Degenerate("empty dependence matrix".into()));
    }
    let f = m.features();
    Ok([
        f[0], f[1], f[2], f[4], f[5], f[7], f[8], f[9], f[10], f[11], f[12], f[13], f[14], f[15],
    ])
}
