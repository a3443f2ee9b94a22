//! Cohort manifests and the in-memory patient records built from them.
//!
//! A manifest is JSON of the form
//! `{"patients": [{"id", "label", "category", "age_category", "exams": [{"screening_index", "views": {"LCC": path, ...}}]}]}`
//! with image paths relative to the manifest file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::view::View;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub patients: Vec<PatientRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientRecord {
    pub id: String,
    pub label: u8,
    /// 0 for controls; 1, 2, 3 for diagnosis within 60 days, 61 to 729 days
    /// and 730 days or more after screening.
    pub category: u8,
    /// 1 for ages 40 to 55, 2 above.
    pub age_category: u8,
    pub exams: Vec<ExamSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamSeries {
    pub screening_index: usize,
    pub views: BTreeMap<View, String>,
}

impl PatientRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("patient {}: {m}", self.id)));
        if self.label > 1 {
            return bad(format!("label {} is not 0 or 1", self.label));
        }
        if self.category > 3 {
            return bad(format!("category {} outside 0..=3", self.category));
        }
        if (self.category == 0) != (self.label == 0) {
            return bad("category 0 must coincide with label 0".into());
        }
        if !(1..=2).contains(&self.age_category) {
            return bad(format!("age_category {} is not 1 or 2", self.age_category));
        }
        if self.exams.is_empty() {
            return bad("no exams".into());
        }
        let mut seen = BTreeSet::new();
        for e in &self.exams {
            if !seen.insert(e.screening_index) {
                return bad(format!("screening index {} repeated", e.screening_index));
            }
            if let Some(v) = View::ALL.iter().find(|v| !e.views.contains_key(v)) {
                return bad(format!("screening {} lacks view {v}", e.screening_index));
            }
        }
        Ok(())
    }

    /// Exams ordered most recent first.
    pub fn exams_by_recency(&self) -> Vec<&ExamSeries> {
        let mut e: Vec<_> = self.exams.iter().collect();
        e.sort_by_key(|e| e.screening_index);
        e
    }
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for p in &self.patients {
            p.validate()?;
            if !ids.insert(p.id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate patient id {:?}", p.id)));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "manifest",
            detail: format!("{}: {e}", path.display()),
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Image path of `rel` as seen from the manifest at `manifest_path`.
pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
    let rel = Path::new(rel);
    if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(rel)
    }
}

/// Patient metadata with images in memory; `exams[k]` holds the four views
/// in [`View::ALL`] order, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPatient {
    pub id: String,
    pub label: u8,
    pub category: u8,
    pub age_category: u8,
    pub exams: Vec<[Image; 4]>,
}

impl RawPatient {
    pub fn load(record: &PatientRecord, manifest_path: &Path) -> Result<RawPatient> {
        record.validate()?;
        let exams = record
            .exams_by_recency()
            .into_iter()
            .map(|e| {
                let load = |v: View| Image::load(resolve(manifest_path, &e.views[&v]));
                Ok([load(View::Lcc)?, load(View::Rcc)?, load(View::Lmlo)?, load(View::Rmlo)?])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RawPatient {
            id: record.id.clone(),
            label: record.label,
            category: record.category,
            age_category: record.age_category,
            exams,
        })
    }
}

/// Loads every patient of a manifest file.
pub fn load_cohort(manifest_path: impl AsRef<Path>) -> Result<Vec<RawPatient>> {
    let path = manifest_path.as_ref();
    let m = Manifest::load(path)?;
    m.patients.iter().map(|p| RawPatient::load(p, path)).collect()
}
