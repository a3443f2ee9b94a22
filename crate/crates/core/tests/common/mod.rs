#![allow(dead_code)]

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqrisk::radiomics::QuantizedImage;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `h × w` grid at `ng` levels with roughly `keep` of pixels in the region.
pub fn random_grid(rng: &mut impl Rng, h: usize, w: usize, ng: usize, keep: f64) -> oracle::Grid {
    loop {
        let g: oracle::Grid = (0..h)
            .map(|_| {
                (0..w)
                    .map(|_| if rng.gen::<f64>() < keep { rng.gen_range(1..=ng) } else { 0 })
                    .collect()
            })
            .collect();
        if g.iter().flatten().filter(|&&l| l > 0).count() >= 2 {
            return g;
        }
    }
}

pub fn to_quantized(g: &oracle::Grid, ng: usize) -> QuantizedImage {
    let levels = g.iter().flatten().copied().collect();
    QuantizedImage::from_levels(g.len(), g[0].len(), levels, ng).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> (usize, f64) {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc })
}

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize, lo: f64, hi: f64) -> seqrisk::image::Image {
    let px = (0..h * w).map(|_| rng.gen_range(lo..hi)).collect();
    seqrisk::image::Image::new(h, w, px).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, h: usize, w: usize, keep: f64) -> seqrisk::image::Mask {
    let bits = (0..h * w).map(|_| rng.gen::<f64>() < keep).collect();
    seqrisk::image::Mask::new(h, w, bits).unwrap()
}

pub mod toy {
    use rand::Rng;
    use seqrisk::backbone::BackboneConfig;
    use seqrisk::model::{ModelConfig, PatientSample};
    use seqrisk::radiomics::N_FEATURES;
    use seqrisk::tensor::Tensor;

    pub fn model_config() -> ModelConfig {
        ModelConfig {
            backbone: BackboneConfig::tiny(),
            ..ModelConfig::default()
        }
    }

    /// `n` patients on 8×8 two-frame videos. Cases carry `+signal` on the first
    /// radiomics feature and a brighter left breast; controls carry `-signal`.
    pub fn samples(n: usize, signal: f64, rng: &mut impl Rng) -> Vec<PatientSample> {
        (0..n)
            .map(|i| {
                let label = (i % 3 == 0) as u8;
                let sign = if label == 1 { 1.0 } else { -1.0 };
                let videos = [0, 1, 2, 3].map(|v| {
                    let lift = if label == 1 && v % 2 == 0 { signal } else { 0.0 };
                    Tensor::from_fn(&[1, 2, 8, 8], |_| rng.gen_range(-1.0..1.0) + lift)
                });
                let radiomics = [0, 1, 2, 3].map(|_| {
                    let mut r: Vec<f64> = (0..N_FEATURES).map(|_| rng.gen_range(-0.5..0.5)).collect();
                    r[0] += sign * signal;
                    r
                });
                PatientSample {
                    id: format!("p{i:03}"),
                    label,
                    category: label,
                    age_category: 1 + (i % 2) as u8,
                    videos,
                    radiomics,
                    y_soft: None,
                    gamma: None,
                }
            })
            .collect()
    }

    /// Same patients with the given asymmetry scores and soft labels.
    pub fn with_gammas(mut s: Vec<PatientSample>, gammas: &[f64]) -> Vec<PatientSample> {
        for (p, g) in s.iter_mut().zip(gammas) {
            p.gamma = Some(*g);
            p.y_soft = Some(if p.label == 1 { 0.8 } else { 0.2 });
        }
        s
    }
}
