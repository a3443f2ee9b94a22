use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::stats::{
    equal_width_histogram, histogram_entropy_uniformity, mean, percentile_sorted, shape_moments,
    sorted,
};
use crate::image::Image;

pub const NAMES: [&str; 15] = [
    "Mean",
    "Maximum",
    "Variance",
    "Skew",
    "Kurtosis",
    "Entropy",
    "Energy",
    "Root Mean Square",
    "Uniformity",
    "Minimum",
    "Median",
    "Range",
    "Interquartile Range",
    "Mean Absolute Deviation",
    "Median Absolute Deviation",
];

/// Histogram resolution behind the frequency-map Entropy and Uniformity.
pub const FREQUENCY_BINS: usize = 32;

/// `c[m][x] = sqrt(2/n)·C(m)·cos((2x+1)mπ / 2n)` with `C(0) = 1/√2`.
fn cosine_basis(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for m in 0..n {
        let cm = if m == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
        for x in 0..n {
            c[m * n + x] = (2.0 / n as f64).sqrt()
                * cm
                * ((2 * x + 1) as f64 * m as f64 * PI / (2 * n) as f64).cos();
        }
    }
    c
}

/// Orthonormal type-II 2-D DCT over the whole image.
pub fn dct2(img: &Image) -> Image {
    let (h, w) = (img.height(), img.width());
    let (ch, cw) = (cosine_basis(h), cosine_basis(w));
    let f = img.pixels();
    // rows: tmp[x][n] = Σ_y f[x][y] cw[n][y]
    let mut tmp = vec![0.0; h * w];
    for x in 0..h {
        for n in 0..w {
            tmp[x * w + n] = (0..w).map(|y| f[x * w + y] * cw[n * w + y]).sum();
        }
    }
    Image::from_fn(h, w, |m, n| (0..h).map(|x| ch[m * h + x] * tmp[x * w + n]).sum())
}

/// Unnormalized 2-D DFT, returned as the magnitude `|F(m, n)|`.
pub fn fft2(img: &Image) -> Image {
    let (h, w) = (img.height(), img.width());
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = img.pixels().iter().map(|&v| Complex::new(v, 0.0)).collect();
    let row_fft = planner.plan_fft_forward(w);
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
    Image::new(h, w, buf.iter().map(|c| c.norm()).collect()).expect("same extents")
}

/// The fifteen statistics over every coefficient of a map.
pub fn frequency_features(map: &Image) -> [f64; 15] {
    let v = map.pixels();
    let n = v.len() as f64;
    let s = sorted(v);
    let mu = mean(v);
    let variance = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    let (skew, kurt) = shape_moments(v, mu);
    let (entropy, uniformity) =
        histogram_entropy_uniformity(&equal_width_histogram(v, FREQUENCY_BINS));
    let energy: f64 = v.iter().map(|x| x * x).sum();
    let median = percentile_sorted(&s, 50.0);
    let abs_dev = sorted(&v.iter().map(|x| (x - median).abs()).collect::<Vec<_>>());
    [
        mu,
        s[s.len() - 1],
        variance,
        skew,
        kurt,
        entropy,
        energy,
        (energy / n).sqrt(),
        uniformity,
        s[0],
        median,
        s[s.len() - 1] - s[0],
        percentile_sorted(&s, 75.0) - percentile_sorted(&s, 25.0),
        v.iter().map(|x| (x - mu).abs()).sum::<f64>() / n,
        percentile_sorted(&abs_dev, 50.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_two_by_two() {
        let ones = Image::filled(2, 2, 1.0);
        let d = dct2(&ones);
        assert!((d.get(0, 0) - 2.0).abs() < 1e-15);
        assert!(d.pixels()[1..].iter().all(|v| v.abs() < 1e-15));
        let f = fft2(&ones);
        assert_eq!(f.pixels(), &[4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_value_map() {
        let f = frequency_features(&Image::new(1, 2, vec![1.0, 3.0]).unwrap());
        assert_eq!(f[0], 2.0);
        assert_eq!(f[13], 1.0);
        assert!((f[7] - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_map() {
        let f = frequency_features(&Image::filled(3, 3, 0.0));
        assert_eq!((f[0], f[6], f[11]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dct_preserves_energy_on_rectangles() {
        let img = Image::from_fn(3, 5, |y, x| ((y * 7 + x * 3) % 5) as f64 - 1.5);
        let e0: f64 = img.pixels().iter().map(|v| v * v).sum();
        let e1: f64 = dct2(&img).pixels().iter().map(|v| v * v).sum();
        assert!((e0 - e1).abs() < 1e-12);
    }
}
