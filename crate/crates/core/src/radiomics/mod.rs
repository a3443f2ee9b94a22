//! Hand-crafted image features: first-order intensity statistics, five
//! gray-level matrix families and statistics of the DCT and FFT maps.
//!
//! [`extract_all`] returns a [`FeatureVector`] of [`N_FEATURES`] values in a
//! fixed order; [`feature_names`] gives the matching column names.
//!
//! ```
//! use seqrisk::image::{Image, Mask};
//! use seqrisk::radiomics::{extract_all, feature_names, N_FEATURES};
//!
//! let img = Image::from_fn(8, 8, |y, x| ((y * 3 + x * 5) % 7) as f64);
//! let fv = extract_all(&img, &Mask::full(8, 8)).unwrap();
//! assert_eq!(fv.values().len(), N_FEATURES);
//! assert_eq!(feature_names()[0], "firstorder_Energy");
//! ```

pub mod first_order;
pub mod frequency;
pub mod glcm;
pub mod ngtdm;
pub mod quantize;
pub mod stats;
pub mod zones;

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, Mask};

pub use first_order::first_order;
pub use frequency::{dct2, fft2, frequency_features};
pub use glcm::{glcm_features, glcm_matrix};
pub use ngtdm::{ngtdm_features, ngtdm_matrix};
pub use quantize::{quantize, QuantizedImage, DEFAULT_BINS};
pub use zones::{
    gldm_features, gldm_matrix, glrlm_features, glrlm_matrix, glszm_features, glszm_matrix,
    LevelSizeMatrix,
};

pub const N_FEATURES: usize = 122;

/// Offsets `(dy, dx)` for 0°, 45°, 90° and 135°.
pub const DIRECTIONS: [(isize, isize); 4] = [(0, 1), (-1, 1), (-1, 0), (-1, -1)];

/// Family prefixes and their sizes, in vector order.
pub const FAMILIES: [(&str, usize); 8] = [
    ("firstorder", 18),
    ("glcm", 23),
    ("glszm", 16),
    ("glrlm", 16),
    ("ngtdm", 5),
    ("gldm", 14),
    ("dct", 15),
    ("fft", 15),
];

/// Column names `{family}_{feature}` in vector order.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let lists: [&[&str]; 8] = [
            &first_order::NAMES,
            &glcm::NAMES,
            &zones::GLSZM_NAMES,
            &zones::GLRLM_NAMES,
            &ngtdm::NAMES,
            &zones::GLDM_NAMES,
            &frequency::NAMES,
            &frequency::NAMES,
        ];
        FAMILIES
            .iter()
            .zip(lists)
            .flat_map(|((family, _), names)| names.iter().map(move |n| format!("{family}_{n}")))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_FEATURES {
            return Err(Error::InvalidArgument(format!(
                "feature vector needs {N_FEATURES} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(feature_names()[i].clone()));
        }
        Ok(FeatureVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &'static [String] {
        feature_names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_names().iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// All families concatenated. Texture features use the masked region at
/// [`DEFAULT_BINS`] levels; the frequency maps cover the whole image.
pub fn extract_all(img: &Image, mask: &Mask) -> Result<FeatureVector> {
    let q = quantize(img, mask, DEFAULT_BINS)?;
    let mut v = Vec::with_capacity(N_FEATURES);
    v.extend(first_order(img, mask)?);
    v.extend(glcm_features(&q)?);
    v.extend(glszm_features(&q)?);
    v.extend(glrlm_features(&q)?);
    v.extend(ngtdm_features(&q)?);
    v.extend(gldm_features(&q)?);
    v.extend(frequency_features(&dct2(img)));
    v.extend(frequency_features(&fft2(img)));
    FeatureVector::new(v)
}

/// [`extract_all`] over many images in parallel; output order follows input.
pub fn extract_batch(items: &[(Image, Mask)]) -> Result<Vec<FeatureVector>> {
    items.par_iter().map(|(img, mask)| extract_all(img, mask)).collect()
}
