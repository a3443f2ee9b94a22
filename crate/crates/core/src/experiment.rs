//! End-to-end synthetic runs: generate a cohort, preprocess, split, train
//! and score the held-out patients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evaluation::{split, Prediction, SplitPlan};
use crate::model::{ModelConfig, PatientSample, RiskModel};
use crate::pipeline::{process_cohort, to_samples, FoldStats, PrepConfig, ProcessedPatient};
use crate::synth::{generate, CohortConfig};
use crate::training::{train, EpochLog, LabelSource, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub cohort: CohortConfig,
    pub prep: PrepConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split_seed: u64,
    pub model_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cohort: CohortConfig::default(),
            prep: PrepConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split_seed: 0,
            model_seed: 0,
        }
    }
}

/// Development (all five folds) and held-out test samples.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub plan: SplitPlan,
    pub stats: FoldStats,
    pub train: Vec<PatientSample>,
    pub test: Vec<PatientSample>,
}

/// Generates and preprocesses the cohort once.
pub fn processed_cohort(cohort: &CohortConfig, prep: &PrepConfig) -> Result<Vec<ProcessedPatient>> {
    let raw: Vec<_> = generate(cohort)?.into_iter().map(|p| p.raw).collect();
    process_cohort(&raw, prep)
}

/// Splits, fits statistics on the development patients and builds samples
/// with `frames` frames per video.
pub fn prepare(patients: &[ProcessedPatient], prep: &PrepConfig, frames: usize, split_seed: u64) -> Result<Prepared> {
    let ids: Vec<(String, u8)> = patients.iter().map(|p| (p.id.clone(), p.label)).collect();
    let plan = split(&ids, split_seed)?;
    let test_ids: std::collections::BTreeSet<&str> = plan.test.iter().map(String::as_str).collect();
    let (test, dev): (Vec<&ProcessedPatient>, Vec<&ProcessedPatient>) =
        patients.iter().partition(|p| test_ids.contains(p.id.as_str()));
    let stats = FoldStats::fit(&dev, frames, 0)?;
    Ok(Prepared {
        train: to_samples(&dev, &stats, frames, prep.duplication)?,
        test: to_samples(&test, &stats, frames, prep.duplication)?,
        plan,
        stats,
    })
}

/// Fused scores as evaluation rows.
pub fn predict_all(model: &RiskModel, samples: &[PatientSample]) -> Result<Vec<Prediction>> {
    samples
        .par_iter()
        .map(|s| {
            Ok(Prediction {
                patient_id: s.id.clone(),
                score: model.predict(s)?.y,
                label: s.label,
                category: s.category,
            })
        })
        .collect()
}

/// Fresh model trained on hard labels for `cfg.epochs` epochs.
pub fn fit(
    model_cfg: &ModelConfig,
    seed: u64,
    data: &[PatientSample],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog, &RiskModel),
) -> Result<(RiskModel, TrainReport)> {
    let mut model = RiskModel::build(model_cfg.clone(), seed)?;
    let report = train(&mut model, data, cfg, cfg.epochs, LabelSource::Hard, on_epoch)?;
    Ok((model, report))
}
