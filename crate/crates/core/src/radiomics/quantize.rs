use crate::error::{Error, Result};
use crate::image::{Image, Mask};

pub const DEFAULT_BINS: usize = 32;

/// Gray levels `1..=n_bins` inside the mask, 0 outside.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedImage {
    height: usize,
    width: usize,
    levels: Vec<usize>,
    n_bins: usize,
}

impl QuantizedImage {
    /// Builds directly from levels; 0 marks pixels outside the region.
    pub fn from_levels(height: usize, width: usize, levels: Vec<usize>, n_bins: usize) -> Result<Self> {
        if levels.len() != height * width || height == 0 || width == 0 {
            return Err(Error::InvalidArgument("level grid does not match extents".into()));
        }
        if levels.iter().any(|&l| l > n_bins) {
            return Err(Error::InvalidArgument(format!("level above n_bins = {n_bins}")));
        }
        if levels.iter().all(|&l| l == 0) {
            return Err(Error::Degenerate("empty region".into()));
        }
        Ok(QuantizedImage {
            height,
            width,
            levels,
            n_bins,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Level at `(y, x)`, or `None` outside the region or the image.
    pub fn level(&self, y: isize, x: isize) -> Option<usize> {
        if y < 0 || x < 0 || y >= self.height as isize || x >= self.width as isize {
            return None;
        }
        match self.levels[y as usize * self.width + x as usize] {
            0 => None,
            l => Some(l),
        }
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn voxel_count(&self) -> usize {
        self.levels.iter().filter(|&&l| l > 0).count()
    }
}

/// Equal-width bins over the `[min, max]` of the masked pixels; the maximum
/// falls in the top bin and a constant region is all level 1.
pub fn quantize(img: &Image, mask: &Mask, n_bins: usize) -> Result<QuantizedImage> {
    if (img.height(), img.width()) != (mask.height(), mask.width()) {
        return Err(Error::shape(
            "quantize",
            &[img.height(), img.width()],
            &[mask.height(), mask.width()],
        ));
    }
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be positive".into()));
    }
    let inside: Vec<f64> = img
        .pixels()
        .iter()
        .zip(mask.bits())
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    if inside.is_empty() {
        return Err(Error::Degenerate("empty mask".into()));
    }
    if inside.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantize input".into()));
    }
    let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels = img
        .pixels()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| {
            if !m {
                0
            } else if hi == lo {
                1
            } else {
                (((v - lo) / (hi - lo) * n_bins as f64).floor() as usize + 1).min(n_bins)
            }
        })
        .collect();
    QuantizedImage::from_levels(img.height(), img.width(), levels, n_bins)
}
