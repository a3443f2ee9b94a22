//! Synthetic longitudinal four-view cohort with a planted one-sided lesion
//! signal in cases.
//!
//! Each view is a half-ellipse of textured tissue against a black
//! background, attached to the left edge for left views and to the right
//! edge for right views. Some views carry a small bright marker in a far
//! corner. A case gets a Gaussian blob in one breast (both projections of
//! that side) whose amplitude grows toward the most recent screening and is
//! larger for diagnoses closer to the screening. Pixel values are integers
//! in `[0, 4095]`, so both RDF1 and 16-bit PGM store them exactly.
//!
//! ```
//! use seqrisk::synth::{generate, CohortConfig};
//!
//! let cfg = CohortConfig { n_patients: 20, image_size: 32, ..CohortConfig::default() };
//! let cohort = generate(&cfg).unwrap();
//! assert_eq!(cohort.len(), 20);
//! assert_eq!(cohort.iter().filter(|p| p.raw.label == 1).count(), 2);
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ExamSeries, Manifest, PatientRecord, RawPatient};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::view::{Projection, Side, View};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MAX_INTENSITY: f64 = 4095.0;

const TISSUE_LEVEL: f64 = 1400.0;
const TISSUE_GRADIENT: f64 = 500.0;
const TEXTURE_SD: f64 = 220.0;
const PIXEL_SD: f64 = 30.0;
const BLOB_AMPLITUDE: f64 = 1100.0;
const BLOB_GROWTH: f64 = 0.55;
const MARKER_LEVEL: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Rdf,
    Pgm,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Rdf => "rdf",
            ImageFormat::Pgm => "pgm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub case_fraction: f64,
    /// Shares of diagnosis categories 1, 2 and 3 among cases.
    pub category_mix: [f64; 3],
    /// Shares of patients with 1, 2 and 3 screenings.
    pub screenings_distribution: [f64; 3],
    pub image_size: usize,
    /// Lesion amplitude multiplier; 0 leaves cases indistinguishable.
    pub signal_strength: f64,
    pub seed: u64,
    /// Share of age category 1 among cases and among controls.
    pub young_fraction_cases: f64,
    pub young_fraction_controls: f64,
    /// Chance that a view carries a corner marker.
    pub marker_probability: f64,
    pub image_format: ImageFormat,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_patients: 400,
            case_fraction: 0.10,
            category_mix: [0.60, 0.25, 0.15],
            screenings_distribution: [0.25, 0.35, 0.40],
            image_size: 64,
            signal_strength: 1.0,
            seed: 0,
            young_fraction_cases: 0.37,
            young_fraction_controls: 0.49,
            marker_probability: 0.3,
            image_format: ImageFormat::Rdf,
        }
    }
}

fn check_shares(field: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(0.0..=1.0).contains(x)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{field}: {v:?} must be shares summing to 1")));
    }
    Ok(())
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_patients < 20 {
            return bad(format!("n_patients: {} is below 20", self.n_patients));
        }
        for (field, v) in [
            ("case_fraction", self.case_fraction),
            ("young_fraction_cases", self.young_fraction_cases),
            ("young_fraction_controls", self.young_fraction_controls),
            ("marker_probability", self.marker_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{field}: {v} outside [0, 1]"));
            }
        }
        check_shares("category_mix", &self.category_mix)?;
        check_shares("screenings_distribution", &self.screenings_distribution)?;
        if self.image_size < 16 {
            return bad(format!("image_size: {} is below 16", self.image_size));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad(format!("signal_strength: {} must be finite and >= 0", self.signal_strength));
        }
        let cases = self.n_cases();
        if cases == 0 || cases == self.n_patients {
            return bad(format!("case_fraction: {} leaves a class empty", self.case_fraction));
        }
        Ok(())
    }

    pub fn n_cases(&self) -> usize {
        (self.n_patients as f64 * self.case_fraction).round() as usize
    }

    /// Cases per category 1..=3 by largest remainder.
    pub fn category_counts(&self) -> [usize; 3] {
        apportion(self.n_cases(), &self.category_mix)
    }
}

/// Splits `n` into integer parts proportional to `shares`; leftovers go to
/// the largest fractional parts, lowest index first on ties.
pub fn apportion<const K: usize>(n: usize, shares: &[f64; K]) -> [usize; K] {
    let exact = shares.map(|s| s * n as f64);
    let mut out = exact.map(|e| e.floor() as usize);
    let mut rest: Vec<usize> = (0..K).collect();
    rest.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let left = n.saturating_sub(out.iter().sum());
    for &k in rest.iter().take(left) {
        out[k] += 1;
    }
    out
}

/// Ground truth of a planted lesion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobTruth {
    pub left: bool,
    /// Position in ellipse-normalized coordinates: distance from the chest
    /// wall and vertical offset, both in units of the semi-axes.
    pub depth: f64,
    pub offset: f64,
    /// Standard deviation as a fraction of the image size.
    pub radius: f64,
    /// Amplitude per screening, most recent first.
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPatient {
    pub raw: RawPatient,
    pub blob: Option<BlobTruth>,
}

struct Anatomy {
    ry: f64,
    rx: f64,
    cy: f64,
    density: f64,
    texture: f64,
}

fn anatomy(size: usize, proj: Projection, jitter: f64, density: f64, texture: f64) -> Anatomy {
    let s = size as f64;
    let (ry, rx, cy) = match proj {
        Projection::Craniocaudal => (0.40 * s, 0.60 * s, 0.5 * s),
        Projection::MediolateralOblique => (0.44 * s, 0.66 * s, 0.46 * s),
    };
    Anatomy {
        ry: ry * jitter,
        rx: rx * jitter,
        cy,
        density,
        texture,
    }
}

fn smooth(noise: &[f64], size: usize, radius: usize) -> Vec<f64> {
    let mut buf = noise.to_vec();
    for _ in 0..2 {
        let mut next = vec![0.0; buf.len()];
        for y in 0..size {
            for x in 0..size {
                let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(size - 1));
                let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(size - 1));
                let mut s = 0.0;
                for yy in y0..=y1 {
                    for xx in x0..=x1 {
                        s += buf[yy * size + xx];
                    }
                }
                next[y * size + x] = s / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
            }
        }
        buf = next;
    }
    buf
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x = (*x - m) / sd);
}

fn render_view(
    size: usize,
    view: View,
    a: &Anatomy,
    blob: Option<(&BlobTruth, f64)>,
    marker: bool,
    rng: &mut impl Rng,
) -> Image {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let raw: Vec<f64> = (0..size * size).map(|_| unit.sample(rng)).collect();
    let mut tex = smooth(&raw, size, 2);
    standardize(&mut tex);
    let left = view.side() == Side::Left;
    let s = size as f64;
    // distance from the chest wall edge
    let depth = |x: usize| if left { x as f64 + 0.5 } else { s - x as f64 - 0.5 };
    let blob_centre = blob.map(|(b, amp)| {
        let d = b.depth * a.rx;
        let x = if left { d - 0.5 } else { s - d - 0.5 };
        (a.cy + b.offset * a.ry, x, b.radius * s, amp)
    });
    let mut px = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let u = depth(x) / a.rx;
            let v = (y as f64 + 0.5 - a.cy) / a.ry;
            let r2 = u * u + v * v;
            if r2 > 1.0 {
                continue;
            }
            let mut val = a.density + TISSUE_GRADIENT * (1.0 - r2.sqrt()) + a.texture * tex[y * size + x];
            if let Some((by, bx, br, amp)) = blob_centre {
                let d2 = (y as f64 - by).powi(2) + (x as f64 - bx).powi(2);
                val += amp * (-d2 / (2.0 * br * br)).exp();
            }
            val += PIXEL_SD * unit.sample(rng);
            px[y * size + x] = val.clamp(200.0, MAX_INTENSITY).round();
        }
    }
    if marker {
        let (h, w) = ((size / 16).max(2), (size / 8).max(3));
        let x0 = if left { size - 2 - w } else { 2 };
        let y0 = if rng.gen_bool(0.5) { 1 } else { size - 1 - h };
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                px[y * size + x] = MARKER_LEVEL;
            }
        }
    }
    Image::new(size, size, px).expect("square image")
}

struct Plan {
    label: u8,
    category: u8,
}

fn patient_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn make_patient(cfg: &CohortConfig, index: usize, plan: &Plan) -> SyntheticPatient {
    let mut rng = patient_rng(cfg.seed, index);
    let young = if plan.label == 1 {
        cfg.young_fraction_cases
    } else {
        cfg.young_fraction_controls
    };
    let age_category = if rng.gen_bool(young) { 1 } else { 2 };
    let u: f64 = rng.gen();
    let d = cfg.screenings_distribution;
    let n_exams = if u < d[0] {
        1
    } else if u < d[0] + d[1] {
        2
    } else {
        3
    };
    let jitter = rng.gen_range(0.92..1.08);
    let density = TISSUE_LEVEL + rng.gen_range(-200.0..200.0);
    let texture = TEXTURE_SD * rng.gen_range(0.7..1.3);
    let blob = (plan.label == 1).then(|| {
        let strength = [1.0, 0.8, 0.6][plan.category as usize - 1];
        let a0 = cfg.signal_strength * BLOB_AMPLITUDE * strength;
        BlobTruth {
            left: rng.gen_bool(0.5),
            depth: rng.gen_range(0.25..0.6),
            offset: rng.gen_range(-0.4..0.4),
            radius: rng.gen_range(0.05..0.08),
            amplitudes: (0..n_exams).map(|k| a0 * BLOB_GROWTH.powi(k as i32)).collect(),
        }
    });
    let exams = (0..n_exams)
        .map(|k| {
            View::ALL.map(|view| {
                let a = anatomy(cfg.image_size, view.projection(), jitter, density, texture);
                let on_side = blob
                    .as_ref()
                    .filter(|b| b.left == (view.side() == Side::Left))
                    .map(|b| (b, b.amplitudes[k]));
                let marker = rng.gen_bool(cfg.marker_probability);
                render_view(cfg.image_size, view, &a, on_side, marker, &mut rng)
            })
        })
        .collect();
    SyntheticPatient {
        raw: RawPatient {
            id: format!("P{index:05}"),
            label: plan.label,
            category: plan.category,
            age_category,
            exams,
        },
        blob,
    }
}

/// The cohort in memory, deterministic in `cfg.seed`.
pub fn generate(cfg: &CohortConfig) -> Result<Vec<SyntheticPatient>> {
    cfg.validate()?;
    let counts = cfg.category_counts();
    let mut plans = Vec::with_capacity(cfg.n_patients);
    for (c, &n) in counts.iter().enumerate() {
        plans.extend((0..n).map(|_| Plan {
            label: 1,
            category: c as u8 + 1,
        }));
    }
    while plans.len() < cfg.n_patients {
        plans.push(Plan { label: 0, category: 0 });
    }
    plans.shuffle(&mut patient_rng(cfg.seed, usize::MAX - 1));
    Ok(plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| make_patient(cfg, i, plan))
        .collect())
}

/// Writes images under `dir/images/` and the manifest to `dir/manifest.json`;
/// returns the manifest path.
pub fn write_cohort(patients: &[SyntheticPatient], dir: impl AsRef<Path>, format: ImageFormat) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let records = patients
        .par_iter()
        .map(|p| {
            let exams = p
                .raw
                .exams
                .iter()
                .enumerate()
                .map(|(k, views)| {
                    let mut paths = BTreeMap::new();
                    for view in View::ALL {
                        let rel = format!("images/{}_s{k}_{view}.{}", p.raw.id, format.extension());
                        let img = &views[view.index()];
                        img.save(dir.join(&rel))?;
                        paths.insert(view, rel);
                    }
                    Ok(ExamSeries {
                        screening_index: k,
                        views: paths,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PatientRecord {
                id: p.raw.id.clone(),
                label: p.raw.label,
                category: p.raw.category,
                age_category: p.raw.age_category,
                exams,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest { patients: records };
    let path = dir.join(MANIFEST_FILE);
    manifest.save(&path)?;
    Ok(path)
}

/// [`generate`] followed by [`write_cohort`].
pub fn generate_to_dir(cfg: &CohortConfig, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let patients = generate(cfg)?;
    write_cohort(&patients, dir, cfg.image_format)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_patients: usize,
    pub cases: usize,
    pub controls: usize,
    /// Cases per category 1, 2, 3.
    pub categories: [usize; 3],
    /// Patients per number of screenings, keyed by count.
    pub screenings: BTreeMap<usize, usize>,
    /// Age categories 1 and 2.
    pub ages: [usize; 2],
}

pub fn describe(manifest: &Manifest) -> Result<CohortSummary> {
    manifest.validate()?;
    let mut s = CohortSummary {
        n_patients: manifest.patients.len(),
        cases: 0,
        controls: 0,
        categories: [0; 3],
        screenings: BTreeMap::new(),
        ages: [0; 2],
    };
    for p in &manifest.patients {
        if p.label == 1 {
            s.cases += 1;
            s.categories[p.category as usize - 1] += 1;
        } else {
            s.controls += 1;
        }
        *s.screenings.entry(p.exams.len()).or_default() += 1;
        s.ages[p.age_category as usize - 1] += 1;
    }
    Ok(s)
}
