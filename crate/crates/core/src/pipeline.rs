//! From raw patients to network-ready samples: segmentation and resizing of
//! every view, radiomics of the current screening, fold statistics and
//! temporal stacking.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ExamSeries, Manifest, PatientRecord, RawPatient};
use crate::error::{Error, Result};
use crate::image::{Image, Mask};
use crate::model::PatientSample;
use crate::preprocess::{compute_stats, normalize, otsu_segment, resize_pad, stack_screenings, Duplication, NormalizationStats, DEFAULT_OTSU_LEVELS};
use crate::radiomics::{extract_all, feature_names, FeatureVector, N_FEATURES};
use crate::view::View;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepConfig {
    /// Side of the square network input.
    pub size: usize,
    /// Frames per view video.
    pub frames: usize,
    pub otsu_levels: usize,
    pub duplication: Duplication,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            size: 64,
            frames: 2,
            otsu_levels: DEFAULT_OTSU_LEVELS,
            duplication: Duplication::OldestAvailable,
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 {
            return Err(Error::InvalidArgument(format!("size: {} is below 16", self.size)));
        }
        if self.frames == 0 {
            return Err(Error::InvalidArgument("frames: must be at least 1".into()));
        }
        if self.otsu_levels < 2 {
            return Err(Error::InvalidArgument("otsu_levels: must be at least 2".into()));
        }
        Ok(())
    }
}

/// Segmented, resized views with the radiomics of the current screening.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedPatient {
    pub id: String,
    pub label: u8,
    pub category: u8,
    pub age_category: u8,
    /// Most recent first, views in [`View::ALL`] order.
    pub exams: Vec<[Image; 4]>,
    pub radiomics: [FeatureVector; 4],
}

/// Otsu segmentation with label removal, then resize and pad to `size`.
pub fn prepare_view(img: &Image, cfg: &PrepConfig) -> Result<Image> {
    let seg = otsu_segment(img, cfg.otsu_levels)?;
    Ok(resize_pad(&seg.image, cfg.size))
}

/// Radiomics of a prepared view over its non-zero pixels.
pub fn view_radiomics(img: &Image) -> Result<FeatureVector> {
    let mask = Mask::from_fn(img.height(), img.width(), |y, x| img.get(y, x) != 0.0);
    extract_all(img, &mask)
}

fn radiomics_of(current: &[Image; 4]) -> Result<[FeatureVector; 4]> {
    let v = current.iter().map(view_radiomics).collect::<Result<Vec<_>>>()?;
    Ok(v.try_into().expect("four views"))
}

impl ProcessedPatient {
    /// Builds from already prepared images, computing radiomics.
    pub fn from_prepared(raw: RawPatient) -> Result<Self> {
        let current = raw
            .exams
            .first()
            .ok_or_else(|| Error::InvalidArgument(format!("patient {} has no exams", raw.id)))?;
        let radiomics = radiomics_of(current)?;
        Ok(ProcessedPatient {
            id: raw.id,
            label: raw.label,
            category: raw.category,
            age_category: raw.age_category,
            exams: raw.exams,
            radiomics,
        })
    }
}

pub fn process_patient(raw: &RawPatient, cfg: &PrepConfig) -> Result<ProcessedPatient> {
    cfg.validate()?;
    let exams = raw
        .exams
        .iter()
        .map(|views| {
            let v = views.iter().map(|img| prepare_view(img, cfg)).collect::<Result<Vec<_>>>()?;
            Ok(v.try_into().expect("four views"))
        })
        .collect::<Result<Vec<[Image; 4]>>>()
        .map_err(|e: Error| Error::InvalidArgument(format!("patient {}: {e}", raw.id)))?;
    ProcessedPatient::from_prepared(RawPatient {
        exams,
        ..raw.clone()
    })
}

pub fn process_cohort(raw: &[RawPatient], cfg: &PrepConfig) -> Result<Vec<ProcessedPatient>> {
    raw.par_iter().map(|p| process_patient(p, cfg)).collect()
}

/// Statistics fitted on one training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStats {
    pub pixels: NormalizationStats,
    pub radiomics_mean: Vec<f64>,
    pub radiomics_std: Vec<f64>,
}

impl FoldStats {
    /// Scalar pixel statistics over every frame that enters a video, and
    /// per-feature radiomics statistics over all training views.
    pub fn fit(train: &[&ProcessedPatient], frames: usize, fold_id: usize) -> Result<FoldStats> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("empty training fold".into()));
        }
        let images = train
            .iter()
            .flat_map(|p| p.exams.iter().take(frames))
            .flat_map(|views| views.iter());
        let pixels = compute_stats(images, fold_id)?;
        let n = (4 * train.len()) as f64;
        let mut mean = vec![0.0; N_FEATURES];
        for fv in train.iter().flat_map(|p| p.radiomics.iter()) {
            mean.iter_mut().zip(fv.values()).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; N_FEATURES];
        for fv in train.iter().flat_map(|p| p.radiomics.iter()) {
            var.iter_mut()
                .zip(fv.values())
                .zip(&mean)
                .for_each(|((s, v), m)| *s += (v - m) * (v - m) / n);
        }
        Ok(FoldStats {
            pixels,
            radiomics_mean: mean,
            radiomics_std: var.into_iter().map(f64::sqrt).collect(),
        })
    }

    /// Z-scores; zero-variance features map to 0.
    pub fn standardize(&self, fv: &FeatureVector) -> Vec<f64> {
        fv.values()
            .iter()
            .zip(self.radiomics_mean.iter().zip(&self.radiomics_std))
            .map(|(v, (m, s))| {
                let z = if *s > 1e-12 * m.abs().max(1.0) { (v - m) / s } else { 0.0 };
                if z.is_finite() {
                    z
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn to_sample(p: &ProcessedPatient, stats: &FoldStats, frames: usize, dup: Duplication) -> Result<PatientSample> {
    let video = |v: usize| -> Result<crate::tensor::Tensor> {
        let seq: Vec<Image> = p.exams.iter().map(|e| normalize(&e[v], &stats.pixels)).collect();
        let t = stack_screenings(&seq, frames, dup)?;
        let s = t.shape().to_vec();
        t.reshape(&[1, s[0], s[1], s[2]])
    };
    Ok(PatientSample {
        id: p.id.clone(),
        label: p.label,
        category: p.category,
        age_category: p.age_category,
        videos: [video(0)?, video(1)?, video(2)?, video(3)?],
        radiomics: [0, 1, 2, 3].map(|v| stats.standardize(&p.radiomics[v])),
        y_soft: None,
        gamma: None,
    })
}

pub fn to_samples(ps: &[&ProcessedPatient], stats: &FoldStats, frames: usize, dup: Duplication) -> Result<Vec<PatientSample>> {
    ps.par_iter().map(|p| to_sample(p, stats, frames, dup)).collect()
}

/// Writes prepared images and a manifest pointing at them.
pub fn save_processed(ps: &[ProcessedPatient], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut patients = Vec::with_capacity(ps.len());
    for p in ps {
        let mut exams = Vec::with_capacity(p.exams.len());
        for (k, views) in p.exams.iter().enumerate() {
            let mut paths = std::collections::BTreeMap::new();
            for view in View::ALL {
                let rel = format!("images/{}_s{k}_{view}.rdf", p.id);
                views[view.index()].save(dir.join(&rel))?;
                paths.insert(view, rel);
            }
            exams.push(ExamSeries {
                screening_index: k,
                views: paths,
            });
        }
        patients.push(PatientRecord {
            id: p.id.clone(),
            label: p.label,
            category: p.category,
            age_category: p.age_category,
            exams,
        });
    }
    let path = dir.join("manifest.json");
    Manifest { patients }.save(&path)?;
    Ok(path)
}

/// Radiomics table: `patient_id, screening_index, view` followed by one
/// column per feature. Only the current screening (index 0) is written.
pub fn write_features_csv(ps: &[ProcessedPatient], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    let mut header = vec!["patient_id".to_string(), "screening_index".to_string(), "view".to_string()];
    header.extend(feature_names().iter().cloned());
    w.write_record(&header)?;
    for p in ps {
        for view in View::ALL {
            let mut row = vec![p.id.clone(), "0".to_string(), view.to_string()];
            row.extend(p.radiomics[view.index()].values().iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads [`write_features_csv`] output keyed by `(patient_id, view)`,
/// keeping the rows of the current screening.
pub fn read_features_csv(
    path: impl AsRef<Path>,
) -> Result<std::collections::BTreeMap<(String, View), FeatureVector>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != N_FEATURES + 3 || header.iter().skip(3).zip(feature_names()).any(|(a, b)| a != b) {
        return Err(Error::Format {
            what: "features CSV",
            detail: format!("{}: unexpected header", path.display()),
        });
    }
    let mut out = std::collections::BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        if &rec[1] != "0" {
            continue;
        }
        let view: View = rec[2].parse()?;
        let values = rec
            .iter()
            .skip(3)
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Format {
                    what: "features CSV",
                    detail: format!("bad number {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert((rec[0].to_string(), view), FeatureVector::new(values)?);
    }
    Ok(out)
}

/// Reassembles processed patients from prepared images and a features table.
pub fn attach_features(
    raw: Vec<RawPatient>,
    table: &std::collections::BTreeMap<(String, View), FeatureVector>,
) -> Result<Vec<ProcessedPatient>> {
    raw.into_iter()
        .map(|p| {
            let get = |v: View| {
                table
                    .get(&(p.id.clone(), v))
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no features for patient {} view {v}", p.id)))
            };
            let radiomics = [get(View::Lcc)?, get(View::Rcc)?, get(View::Lmlo)?, get(View::Rmlo)?];
            Ok(ProcessedPatient {
                id: p.id,
                label: p.label,
                category: p.category,
                age_category: p.age_category,
                exams: p.exams,
                radiomics,
            })
        })
        .collect()
}
