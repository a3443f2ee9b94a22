//! View-image preprocessing: Otsu segmentation with label removal,
//! aspect-preserving resize with zero padding, fold-level intensity
//! normalisation and temporal stacking of screenings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{components, Connectivity, Image, Mask};
use crate::tensor::Tensor;
use crate::view::View;

pub const DEFAULT_OTSU_LEVELS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage {
    pub pixels: Image,
    pub view: View,
    /// 0 is the most recent screening.
    pub screening_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub threshold: f64,
    pub mask: Mask,
    /// Input with everything outside `mask` zeroed.
    pub image: Image,
}

/// Otsu threshold over `n_levels` equal-width bins of the min–max range,
/// followed by keeping only the largest 4-connected foreground component.
///
/// A pixel is foreground when its bin lies above the winning split; the
/// reported `threshold` is the upper edge of the last background bin.
/// Among equal between-class variances the lowest split wins.
pub fn otsu_segment(img: &Image, n_levels: usize) -> Result<Segmentation> {
    if n_levels < 2 {
        return Err(Error::InvalidArgument("otsu needs at least 2 levels".into()));
    }
    let px = img.pixels();
    if px.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("otsu input".into()));
    }
    let lo = px.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return Err(Error::Degenerate("otsu on a constant image".into()));
    }
    let range = hi - lo;
    let bin_of = |v: f64| (((v - lo) / range * n_levels as f64) as usize).min(n_levels - 1);
    let bins: Vec<usize> = px.iter().map(|&v| bin_of(v)).collect();
    let mut hist = vec![0u64; n_levels];
    for &b in &bins {
        hist[b] += 1;
    }
    let total = px.len() as f64;
    let total_moment: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best: Option<(usize, f64)> = None;
    let (mut w0, mut m0) = (0.0, 0.0);
    for (k, &count) in hist.iter().enumerate().take(n_levels - 1) {
        w0 += count as f64;
        m0 += k as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = m0 / w0;
        let mu1 = (total_moment - m0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if best.map_or(true, |(_, b)| between > b) {
            best = Some((k, between));
        }
    }
    let (split, _) = best.ok_or_else(|| Error::Degenerate("otsu found no valid split".into()))?;
    let threshold = lo + (split + 1) as f64 * range / n_levels as f64;

    let (h, w) = (img.height(), img.width());
    let fg: Vec<bool> = bins.iter().map(|&b| b > split).collect();
    let (labels, sizes) = components(h, w, Connectivity::Four, |i| fg[i], |_, _| true);
    // first component in raster order wins ties
    let keep = sizes
        .iter()
        .enumerate()
        .fold(None::<(usize, usize)>, |acc, (id, &s)| match acc {
            Some((_, best)) if best >= s => acc,
            _ => Some((id, s)),
        })
        .map(|(id, _)| id)
        .expect("a non-empty foreground");
    let mask = Mask::new(h, w, labels.iter().map(|&l| l == keep).collect())?;
    let image = img.masked(&mask);
    Ok(Segmentation {
        threshold,
        mask,
        image,
    })
}

/// Bilinear resize (half-pixel centres, edge clamped).
pub fn resize_bilinear(img: &Image, out_h: usize, out_w: usize) -> Image {
    let (h, w) = (img.height(), img.width());
    if (h, w) == (out_h, out_w) {
        return img.clone();
    }
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let coord = |o: usize, s: f64, n: usize| {
        let c = ((o as f64 + 0.5) * s - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = c.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, c - i0 as f64)
    };
    Image::from_fn(out_h, out_w, |y, x| {
        let (y0, y1, fy) = coord(y, sy, h);
        let (x0, x1, fx) = coord(x, sx, w);
        let top = img.get(y0, x0) + (img.get(y0, x1) - img.get(y0, x0)) * fx;
        let bottom = img.get(y1, x0) + (img.get(y1, x1) - img.get(y1, x0)) * fx;
        top + (bottom - top) * fy
    })
}

/// Extent of the resized content before padding, `(rows, cols)`.
pub fn resized_extent(h: usize, w: usize, target: usize) -> (usize, usize) {
    let long = h.max(w) as f64;
    let fit = |d: usize| ((d as f64 * target as f64 / long).round() as usize).clamp(1, target);
    if h >= w {
        (target, fit(w))
    } else {
        (fit(h), target)
    }
}

/// Resize so the longer side equals `target`, then zero-pad the shorter side
/// symmetrically (odd remainder on the trailing side).
pub fn resize_pad(img: &Image, target: usize) -> Image {
    let (rh, rw) = resized_extent(img.height(), img.width(), target);
    let content = resize_bilinear(img, rh, rw);
    let (oy, ox) = ((target - rh) / 2, (target - rw) / 2);
    Image::from_fn(target, target, |y, x| {
        if y >= oy && y < oy + rh && x >= ox && x < ox + rw {
            content.get(y - oy, x - ox)
        } else {
            0.0
        }
    })
}

/// [`resize_pad`] applied to a mask, re-binarised at 0.5.
pub fn resize_pad_mask(mask: &Mask, target: usize) -> Mask {
    Mask::from_image(&resize_pad(&mask.to_image(), target))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub std: f64,
    pub fold_id: usize,
}

/// Scalar mean and population standard deviation over every pixel of every
/// training image.
pub fn compute_stats<'a>(
    training: impl IntoIterator<Item = &'a Image>,
    fold_id: usize,
) -> Result<NormalizationStats> {
    let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
    for img in training {
        for &v in img.pixels() {
            n += 1;
            sum += v;
            sq += v * v;
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::Degenerate("training pixels have zero variance".into()));
    }
    Ok(NormalizationStats { mean, std, fold_id })
}

pub fn normalize(img: &Image, stats: &NormalizationStats) -> Image {
    img.map(|v| (v - stats.mean) / stats.std)
}

pub fn denormalize(img: &Image, stats: &NormalizationStats) -> Image {
    img.map(|v| v * stats.std + stats.mean)
}

/// Which frame fills slots beyond the available screenings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Duplication {
    /// `[current, prior1, prior1]` for two screenings and `T = 3`.
    #[default]
    OldestAvailable,
    /// `[current, current, prior1]`: the current frame is repeated at the front.
    MostRecent,
}

/// Stack screenings (most recent first) into a `[T, H, W]` video.
pub fn stack_screenings(frames: &[Image], t: usize, mode: Duplication) -> Result<Tensor> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("no screenings to stack".into()))?;
    if t == 0 {
        return Err(Error::InvalidArgument("video needs at least one frame".into()));
    }
    let (h, w) = (first.height(), first.width());
    if frames.iter().any(|f| (f.height(), f.width()) != (h, w)) {
        return Err(Error::InvalidArgument("screenings differ in size".into()));
    }
    let used = frames.len().min(t);
    let missing = t - used;
    let order: Vec<usize> = match mode {
        Duplication::OldestAvailable => (0..t).map(|k| k.min(used - 1)).collect(),
        Duplication::MostRecent => (0..t).map(|k| k.saturating_sub(missing)).collect(),
    };
    let mut data = Vec::with_capacity(t * h * w);
    for k in order {
        data.extend_from_slice(frames[k].pixels());
    }
    Tensor::new(vec![t, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn otsu_half_and_half() {
        let img = Image::from_fn(8, 8, |_, x| if x < 4 { 0.0 } else { 255.0 });
        let seg = otsu_segment(&img, 256).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(seg.mask.get(y, x), x >= 4);
            }
        }
        assert!(seg.threshold > 0.0 && seg.threshold < 255.0);
    }

    #[test]
    fn otsu_removes_corner_label() {
        let img = Image::from_fn(32, 32, |y, x| {
            let (dy, dx) = (y as f64 - 16.0, x as f64);
            if dy * dy / 196.0 + dx * dx / 400.0 <= 1.0 {
                120.0 + ((x * 7 + y * 3) % 11) as f64
            } else if y < 3 && x >= 28 {
                250.0
            } else {
                0.0
            }
        });
        let seg = otsu_segment(&img, 256).unwrap();
        assert!(!seg.mask.get(1, 30));
        assert_eq!(seg.image.get(1, 30), 0.0);
        assert!(seg.mask.get(16, 3));
    }

    #[test]
    fn otsu_constant_is_degenerate() {
        let img = Image::filled(16, 16, 3.0);
        assert!(matches!(otsu_segment(&img, 256), Err(Error::Degenerate(_))));
    }

    #[test]
    fn resize_pad_examples() {
        let tall = Image::filled(512, 256, 1.0);
        let out = resize_pad(&tall, 256);
        assert_eq!((out.height(), out.width()), (256, 256));
        let nz: usize = out.pixels().iter().filter(|&&v| v > 0.0).count();
        assert_eq!(nz, 256 * 128);
        assert_eq!(out.get(0, 63), 0.0);
        assert_eq!(out.get(0, 64), 1.0);
        assert_eq!(out.get(0, 191), 1.0);
        assert_eq!(out.get(0, 192), 0.0);

        let same = Image::from_fn(256, 256, |y, x| (y * 3 + x) as f64);
        assert_eq!(resize_pad(&same, 256), same);

        assert_eq!(resized_extent(100, 300, 256), (85, 256));
        let wide = resize_pad(&Image::filled(100, 300, 1.0), 256);
        // (256 - 85) / 2 = 85 rows above, 86 below
        assert_eq!(wide.get(84, 0), 0.0);
        assert_eq!(wide.get(85, 0), 1.0);
        assert_eq!(wide.get(169, 0), 1.0);
        assert_eq!(wide.get(170, 0), 0.0);
    }

    #[test]
    fn stats_and_normalize() {
        let imgs = [Image::filled(4, 4, 5.0), Image::filled(4, 4, 7.0)];
        let s = compute_stats(imgs.iter(), 0).unwrap();
        assert_eq!((s.mean, s.std), (6.0, 1.0));
        assert!(normalize(&imgs[0], &s).pixels().iter().all(|&v| v == -1.0));
        assert!(normalize(&imgs[1], &s).pixels().iter().all(|&v| v == 1.0));
        assert!(normalize(&Image::filled(2, 2, 6.0), &s).pixels().iter().all(|&v| v == 0.0));
        assert!(compute_stats(std::iter::empty(), 0).is_err());
        assert!(matches!(
            compute_stats([Image::filled(2, 2, 1.0)].iter(), 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn stacking_examples() {
        let f = |v: f64| Image::filled(2, 2, v);
        let frames = |t: &Tensor| -> Vec<f64> { t.data().chunks(4).map(|c| c[0]).collect() };
        let one = stack_screenings(&[f(0.0)], 2, Duplication::OldestAvailable).unwrap();
        assert_eq!(frames(&one), vec![0.0, 0.0]);
        let three = stack_screenings(&[f(0.0), f(1.0), f(2.0)], 3, Duplication::OldestAvailable).unwrap();
        assert_eq!(frames(&three), vec![0.0, 1.0, 2.0]);
        let two = stack_screenings(&[f(0.0), f(1.0)], 3, Duplication::OldestAvailable).unwrap();
        assert_eq!(frames(&two), vec![0.0, 1.0, 1.0]);
        let alt = stack_screenings(&[f(0.0), f(1.0)], 3, Duplication::MostRecent).unwrap();
        assert_eq!(frames(&alt), vec![0.0, 0.0, 1.0]);
        assert!(stack_screenings(&[], 2, Duplication::OldestAvailable).is_err());
    }
}
