//! Adam, the training loop, pseudo-labelling with asymmetry scores and the
//! two-stage finetuning on a control-filtered dataset.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::bce_graph;
use crate::model::{PatientSample, RiskModel};
use crate::params::{GradStore, ParamStore};
use crate::tensor::{Graph, Tensor};

pub use crate::head::bce;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_patients: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Percentile `T` of control asymmetry above which controls are dropped.
    pub filter_percentile: f64,
    /// Fit the true labels instead of the soft labels during finetuning.
    pub hard_labels: bool,
    /// Start finetuning from the model that produced the pseudo-labels
    /// rather than from a fresh initialization.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_patients: 12,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            filter_percentile: 90.0,
            hard_labels: false,
            warm_start: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, m: String| Err(Error::InvalidArgument(format!("{field}: {m}")));
        if self.epochs == 0 || self.epochs % 2 != 0 {
            return bad("epochs", format!("{} must be a positive even number", self.epochs));
        }
        if self.batch_patients == 0 {
            return bad("batch_patients", "must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("{} must be finite and >= 0", self.learning_rate));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(name, format!("{b} outside [0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps", "must be positive".into());
        }
        if !(self.filter_percentile > 0.0 && self.filter_percentile <= 100.0) {
            return bad("filter_percentile", format!("{} outside (0, 100]", self.filter_percentile));
        }
        Ok(())
    }
}

/// Adam with bias correction; frozen parameters are never touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        Adam::new(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. Every gradient is checked before any parameter moves.
    pub fn step(&mut self, params: &mut ParamStore, grads: &GradStore) -> Result<()> {
        for (name, g) in grads.iter() {
            if let Some(bad) = g.data().iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {name} ({bad})")));
            }
            if params.get(name)?.shape() != g.shape() {
                return Err(Error::shape("adam", params.get(name)?.shape(), g.shape()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, g) in grads.iter() {
            if params.is_frozen(name) {
                continue;
            }
            let m = self.m.entry(name.to_string()).or_insert_with(|| Tensor::zeros(g.shape()));
            let v = self.v.entry(name.to_string()).or_insert_with(|| Tensor::zeros(g.shape()));
            let p = params.get_mut(name)?;
            let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
            for (((pi, mi), vi), &gi) in p
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Which target the loss fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Hard,
    Soft,
}

fn target(s: &PatientSample, source: LabelSource) -> Result<f64> {
    match source {
        LabelSource::Hard => Ok(s.label as f64),
        LabelSource::Soft => s
            .y_soft
            .ok_or_else(|| Error::InvalidArgument(format!("patient {} has no soft label", s.id))),
    }
}

/// Loss of one patient and the gradients of every trainable parameter.
pub fn patient_gradients(model: &RiskModel, sample: &PatientSample, t: f64) -> Result<(f64, GradStore)> {
    let mut g = Graph::new();
    let bound = model.params().bind(&mut g);
    let nodes = model.graph(&mut g, &bound, sample)?;
    let loss = bce_graph(&mut g, nodes.fused, t)?;
    let value = g.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss of patient {}", sample.id)));
    }
    let grads = g.backward(loss)?;
    let mut acc = GradStore::new();
    acc.accumulate(model.params(), &bound, &grads)?;
    Ok((value, acc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

/// Minibatch Adam on the mean BCE of the fused output for `epochs` epochs.
///
/// Batches are drawn from a per-epoch shuffle seeded by `cfg.seed`. Patient
/// gradients are computed in parallel and summed in batch order.
pub fn train(
    model: &mut RiskModel,
    data: &[PatientSample],
    cfg: &TrainConfig,
    epochs: usize,
    source: LabelSource,
    mut on_epoch: impl FnMut(&EpochLog, &RiskModel),
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let targets = data.iter().map(|s| target(s, source)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::from_config(cfg);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_patients.max(1)) {
            let snapshot = &*model;
            let results: Vec<Result<(f64, GradStore)>> = batch
                .par_iter()
                .map(|&i| patient_gradients(snapshot, &data[i], targets[i]))
                .collect();
            let mut acc = GradStore::new();
            for r in results {
                let (l, g) = r?;
                total += l;
                acc.merge(g)?;
            }
            acc.scale(1.0 / batch.len() as f64);
            adam.step(model.params_mut(), &acc)?;
            model.gate()?;
        }
        let loss = total / data.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        losses.push(loss);
        on_epoch(
            &EpochLog {
                epoch,
                split: "train",
                loss,
            },
            model,
        );
    }
    Ok(TrainReport {
        epoch_losses: losses,
        steps: adam.steps(),
    })
}

/// Fills `y_soft` with the fused score and `gamma` with the asymmetry of the
/// per-view scores, without touching the weights.
pub fn pseudo_label(model: &RiskModel, data: &[PatientSample]) -> Result<Vec<PatientSample>> {
    data.par_iter()
        .map(|s| {
            let p = model.predict(s)?;
            Ok(PatientSample {
                y_soft: Some(p.y),
                gamma: Some(p.gamma),
                ..s.clone()
            })
        })
        .collect()
}

/// Nearest-rank percentile: the `ceil(t / 100 * n)`-th smallest value.
pub fn nearest_rank_percentile(values: &[f64], t: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty set".into()));
    }
    if !(t > 0.0 && t <= 100.0) {
        return Err(Error::InvalidArgument(format!("percentile {t} outside (0, 100]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((t / 100.0 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Ok(v[rank - 1])
}

fn gamma_of(s: &PatientSample) -> Result<f64> {
    s.gamma
        .ok_or_else(|| Error::InvalidArgument(format!("patient {} has no asymmetry score", s.id)))
}

/// Keeps every case and the controls whose asymmetry is strictly below
/// `threshold`.
pub fn filter_controls_with_threshold(data: &[PatientSample], threshold: f64) -> Result<Vec<PatientSample>> {
    let mut out = Vec::with_capacity(data.len());
    for s in data {
        if s.label == 1 || gamma_of(s)? < threshold {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// `D_f` from `D_s`: the threshold is the nearest-rank `t`-th percentile of
/// control asymmetry. Returns the kept samples and the threshold.
pub fn filter_controls(data: &[PatientSample], t: f64) -> Result<(Vec<PatientSample>, f64)> {
    let gammas = data
        .iter()
        .filter(|s| s.label == 0)
        .map(gamma_of)
        .collect::<Result<Vec<_>>>()?;
    if gammas.is_empty() {
        return Err(Error::InvalidArgument("no controls to filter".into()));
    }
    let p = nearest_rank_percentile(&gammas, t)?;
    Ok((filter_controls_with_threshold(data, p)?, p))
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    /// Model after the first stage on the full pseudo-labelled set.
    pub stage1: RiskModel,
    pub model: RiskModel,
    pub threshold: f64,
    pub kept: usize,
    pub stage1_report: TrainReport,
    pub stage2_report: TrainReport,
}

/// Half the epochs on `D_s`, then half on the control-filtered `D_f`.
pub fn two_stage_finetune(
    model_init: RiskModel,
    d_s: &[PatientSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &RiskModel),
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    let source = if cfg.hard_labels {
        LabelSource::Hard
    } else {
        LabelSource::Soft
    };
    let half = cfg.epochs / 2;
    let (d_f, threshold) = filter_controls(d_s, cfg.filter_percentile)?;
    if d_f.is_empty() {
        return Err(Error::Degenerate("filtered dataset is empty".into()));
    }
    let mut model = model_init;
    let stage1_report = train(&mut model, d_s, cfg, half, source, |log, m| {
        on_epoch(&EpochLog { split: "stage1", ..*log }, m)
    })?;
    let stage1 = model.clone();
    let stage2_cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(1),
        ..cfg.clone()
    };
    let stage2_report = train(&mut model, &d_f, &stage2_cfg, half, source, |log, m| {
        on_epoch(
            &EpochLog {
                epoch: log.epoch + half,
                split: "stage2",
                loss: log.loss,
            },
            m,
        )
    })?;
    Ok(FinetuneOutcome {
        stage1,
        model,
        threshold,
        kept: d_f.len(),
        stage1_report,
        stage2_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut p = ParamStore::new();
        p.insert("x", Tensor::from_vec(vec![1.0, -2.0, 0.5]));
        let mut g = GradStore::new();
        g.add("x", &Tensor::from_vec(vec![3.0, -0.01, 0.0])).unwrap();
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8);
        adam.step(&mut p, &g).unwrap();
        let x = p.get("x").unwrap().data();
        assert!((x[0] - 0.9).abs() < 1e-6);
        assert!((x[1] - -1.9).abs() < 1e-4);
        assert_eq!(x[2], 0.5);
    }

    #[test]
    fn adam_descends_a_parabola() {
        let mut p = ParamStore::new();
        p.insert("x", Tensor::scalar(1.0));
        let mut adam = Adam::new(1e-2, 0.9, 0.999, 1e-8);
        let mut last = 1.0;
        for _ in 0..100 {
            let x = p.get("x").unwrap().item();
            let mut g = GradStore::new();
            g.add("x", &Tensor::scalar(2.0 * x)).unwrap();
            adam.step(&mut p, &g).unwrap();
            let f = p.get("x").unwrap().item().powi(2);
            assert!(f < last);
            last = f;
        }
    }

    #[test]
    fn adam_names_non_finite_gradients() {
        let mut p = ParamStore::new();
        p.insert("layer1.w", Tensor::scalar(1.0));
        let mut g = GradStore::new();
        g.add("layer1.w", &Tensor::scalar(f64::NAN)).unwrap();
        let err = Adam::new(0.1, 0.9, 0.999, 1e-8).step(&mut p, &g).unwrap_err();
        assert!(err.to_string().contains("layer1.w"));
        assert_eq!(p.get("layer1.w").unwrap().item(), 1.0);
    }

    #[test]
    fn nearest_rank_examples() {
        let g: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(nearest_rank_percentile(&g, 90.0).unwrap(), 0.9);
        assert_eq!(nearest_rank_percentile(&g, 100.0).unwrap(), 1.0);
        assert_eq!(nearest_rank_percentile(&g, 1.0).unwrap(), 0.1);
        assert!(nearest_rank_percentile(&g, 0.0).is_err());
    }

    #[test]
    fn config_validation_names_fields() {
        let c = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("epochs"));
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn bce_minimum_at_target() {
        let best = (1..1000)
            .map(|i| i as f64 / 1000.0)
            .min_by(|a, b| bce(*a, 0.3).total_cmp(&bce(*b, 0.3)))
            .unwrap();
        assert!((best - 0.3).abs() < 1e-9);
    }
}
