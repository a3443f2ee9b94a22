//! Discrimination statistics: AUC with tie handling, horizon AUCs by
//! diagnosis category, percentile bootstrap intervals, the paired DeLong
//! test, ROC staircases and stratified patient splits.
//!
//! ```
//! use seqrisk::evaluation::{auc, roc_points, trapezoid_area};
//!
//! let scores = [0.1, 0.4, 0.35, 0.8];
//! let labels = [0, 0, 1, 1];
//! assert_eq!(auc(&scores, &labels).unwrap(), 0.75);
//! let roc = roc_points(&scores, &labels).unwrap();
//! assert!((trapezoid_area(&roc) - 0.75).abs() < 1e-12);
//! ```

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub patient_id: String,
    pub score: f64,
    pub label: u8,
    pub category: u8,
}

fn check_binary(labels: &[u8]) -> Result<(usize, usize)> {
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(format!(
            "AUC needs both classes ({pos} positives, {neg} negatives)"
        )));
    }
    Ok((pos, neg))
}

/// Mann-Whitney AUC with ties counted one half, via mid-ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc", &[scores.len()], &[labels.len()]));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("AUC scores".into()));
    }
    let (pos, neg) = check_binary(labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

pub fn auc_of(preds: &[Prediction]) -> Result<f64> {
    let (s, l) = unzip(preds);
    auc(&s, &l)
}

fn unzip(preds: &[Prediction]) -> (Vec<f64>, Vec<u8>) {
    preds.iter().map(|p| (p.score, p.label)).unzip()
}

/// How cases are grouped per horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonMode {
    /// 1y: category 1; 2y: categories 1-2; beyond 2y: categories 1-3.
    #[default]
    Cumulative,
    /// Each horizon uses its own category only.
    Exclusive,
}

impl std::str::FromStr for HorizonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cumulative" => Ok(HorizonMode::Cumulative),
            "exclusive" => Ok(HorizonMode::Exclusive),
            _ => Err(Error::InvalidArgument(format!("unknown horizon mode {s:?}"))),
        }
    }
}

pub const HORIZONS: [&str; 3] = ["auc_1y", "auc_2y", "auc_gt2y"];

/// Categories counted as positive for horizon `h` (0, 1, 2).
pub fn horizon_categories(h: usize, mode: HorizonMode) -> Vec<u8> {
    match mode {
        HorizonMode::Cumulative => (1..=h as u8 + 1).collect(),
        HorizonMode::Exclusive => vec![h as u8 + 1],
    }
}

/// Controls plus the cases of horizon `h`.
pub fn horizon_subset(preds: &[Prediction], h: usize, mode: HorizonMode) -> Vec<Prediction> {
    let cats = horizon_categories(h, mode);
    preds
        .iter()
        .filter(|p| p.label == 0 || cats.contains(&p.category))
        .cloned()
        .collect()
}

/// The three horizon AUCs; a horizon without cases is `None`.
pub fn horizon_aucs(preds: &[Prediction], mode: HorizonMode) -> Result<[Option<f64>; 3]> {
    for p in preds {
        if (p.category == 0) != (p.label == 0) || p.category > 3 {
            return Err(Error::InvalidArgument(format!(
                "patient {}: label {} inconsistent with category {}",
                p.patient_id, p.label, p.category
            )));
        }
    }
    let mut out = [None; 3];
    for (h, slot) in out.iter_mut().enumerate() {
        let sub = horizon_subset(preds, h, mode);
        if sub.iter().any(|p| p.label == 1) && sub.iter().any(|p| p.label == 0) {
            *slot = Some(auc_of(&sub)?);
        }
    }
    Ok(out)
}

/// Linear-interpolation percentile of sorted values, `q` in `[0, 1]`.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Percentile interval of AUCs over `n_boot` patient resamples. Resample `b`
/// draws from its own stream of `seed`; single-class draws are redrawn.
pub fn bootstrap_ci(scores: &[f64], labels: &[u8], n_boot: usize, alpha: f64, seed: u64) -> Result<(f64, f64)> {
    auc(scores, labels)?;
    if n_boot == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("bootstrap needs n_boot > 0 and 0 < alpha < 1, got {n_boot}, {alpha}")));
    }
    let n = scores.len();
    let mut aucs: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut s = vec![0.0; n];
            let mut l = vec![0u8; n];
            loop {
                for k in 0..n {
                    let i = rng.gen_range(0..n);
                    s[k] = scores[i];
                    l[k] = labels[i];
                }
                if let Ok(a) = auc(&s, &l) {
                    return a;
                }
            }
        })
        .collect();
    aucs.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&aucs, alpha / 2.0), quantile_sorted(&aucs, 1.0 - alpha / 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeLong {
    pub auc_a: f64,
    pub auc_b: f64,
    pub z: f64,
    pub p_value: f64,
}

fn placements(scores: &[f64], pos: &[usize], neg: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let psi = |x: f64, y: f64| {
        if x > y {
            1.0
        } else if x == y {
            0.5
        } else {
            0.0
        }
    };
    let v10 = pos
        .iter()
        .map(|&i| neg.iter().map(|&j| psi(scores[i], scores[j])).sum::<f64>() / neg.len() as f64)
        .collect();
    let v01 = neg
        .iter()
        .map(|&j| pos.iter().map(|&i| psi(scores[i], scores[j])).sum::<f64>() / pos.len() as f64)
        .collect();
    (v10, v01)
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

/// Paired DeLong test of two score vectors on the same labels; two-sided
/// normal p-value. A zero AUC difference gives `z = 0`, `p = 1`.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[u8]) -> Result<DeLong> {
    if scores_a.len() != labels.len() || scores_b.len() != labels.len() {
        return Err(Error::shape("delong", &[scores_a.len(), scores_b.len()], &[labels.len()]));
    }
    let (m, n) = check_binary(labels)?;
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let (a10, a01) = placements(scores_a, &pos, &neg);
    let (b10, b01) = placements(scores_b, &pos, &neg);
    let auc_a = a10.iter().sum::<f64>() / m as f64;
    let auc_b = b10.iter().sum::<f64>() / m as f64;
    let diff = auc_a - auc_b;
    if diff == 0.0 {
        return Ok(DeLong {
            auc_a,
            auc_b,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let term = |x: &[f64], y: &[f64], k: usize| {
        if k < 2 {
            0.0
        } else {
            (cov(x, x) + cov(y, y) - 2.0 * cov(x, y)) / k as f64
        }
    };
    let var = term(&a10, &b10, m) + term(&a01, &b01, n);
    let z = if var > 0.0 {
        diff / var.sqrt()
    } else {
        diff.signum() * f64::INFINITY
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0);
    Ok(DeLong {
        auc_a,
        auc_b,
        z,
        p_value,
    })
}

/// ROC staircase from `(0, 0)` to `(1, 1)` with one point per distinct
/// score threshold, highest threshold first.
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    if scores.len() != labels.len() {
        return Err(Error::shape("roc", &[scores.len()], &[labels.len()]));
    }
    let (pos, neg) = check_binary(labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        pts.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(pts)
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Held-out test ids and five cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test: Vec<String>,
    pub folds: Vec<Vec<String>>,
    pub seed: u64,
}

pub const N_FOLDS: usize = 5;
pub const TEST_FRACTION: f64 = 0.2;

impl SplitPlan {
    /// Every id that is not in the test set.
    pub fn development(&self) -> Vec<String> {
        self.folds.iter().flatten().cloned().collect()
    }
}

/// Stratified by label: `round(0.2 n_c)` of each class to the test set, the
/// rest dealt round-robin into five folds after a seeded shuffle.
pub fn split(patients: &[(String, u8)], seed: u64) -> Result<SplitPlan> {
    if patients.len() < 10 {
        return Err(Error::InvalidArgument(format!("split needs at least 10 patients, got {}", patients.len())));
    }
    let labels: Vec<u8> = patients.iter().map(|p| p.1).collect();
    check_binary(&labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    let mut folds = vec![Vec::new(); N_FOLDS];
    let mut dealt = 0;
    for class in [1u8, 0] {
        let mut ids: Vec<String> = patients.iter().filter(|p| p.1 == class).map(|p| p.0.clone()).collect();
        ids.sort();
        ids.shuffle(&mut rng);
        let n_test = (ids.len() as f64 * TEST_FRACTION).round() as usize;
        test.extend(ids.drain(..n_test));
        for id in ids {
            folds[dealt % N_FOLDS].push(id);
            dealt += 1;
        }
    }
    Ok(SplitPlan { test, folds, seed })
}

/// Kolmogorov-Smirnov test of a sample against the uniform distribution on
/// `[0, 1]`: statistic and asymptotic p-value.
pub fn ks_uniform(sample: &[f64]) -> Result<(f64, f64)> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("KS test of an empty sample".into()));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    Ok((d, p.clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    pub auc: f64,
    pub ci: [f64; 2],
    pub n_cases: usize,
    pub n_controls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub horizon_mode: HorizonMode,
    pub auc_1y: Option<HorizonResult>,
    pub auc_2y: Option<HorizonResult>,
    pub auc_gt2y: Option<HorizonResult>,
    pub overall_auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delong: Option<DeLong>,
}

/// Horizon AUCs with bootstrap intervals and the all-cases AUC.
pub fn evaluate(preds: &[Prediction], mode: HorizonMode, n_boot: usize, seed: u64) -> Result<EvalReport> {
    let aucs = horizon_aucs(preds, mode)?;
    let mut results: [Option<HorizonResult>; 3] = [None, None, None];
    for h in 0..3 {
        if let Some(a) = aucs[h] {
            let sub = horizon_subset(preds, h, mode);
            let (s, l) = unzip(&sub);
            let (lo, hi) = bootstrap_ci(&s, &l, n_boot, 0.05, seed.wrapping_add(h as u64))?;
            let n_cases = l.iter().filter(|&&x| x == 1).count();
            results[h] = Some(HorizonResult {
                auc: a,
                ci: [lo, hi],
                n_cases,
                n_controls: l.len() - n_cases,
            });
        }
    }
    let [auc_1y, auc_2y, auc_gt2y] = results;
    Ok(EvalReport {
        horizon_mode: mode,
        auc_1y,
        auc_2y,
        auc_gt2y,
        overall_auc: auc_of(preds)?,
        delong: None,
    })
}

pub fn write_predictions(preds: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for p in preds {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let preds = r.deserialize().collect::<std::result::Result<Vec<Prediction>, _>>()?;
    for p in &preds {
        if !(0.0..=1.0).contains(&p.score) {
            return Err(Error::InvalidArgument(format!("patient {}: score {} outside [0, 1]", p.patient_id, p.score)));
        }
    }
    Ok(preds)
}

pub fn write_roc(points: &[(f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fpr", "tpr"])?;
    for (f, t) in points {
        w.write_record([f.to_string(), t.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
