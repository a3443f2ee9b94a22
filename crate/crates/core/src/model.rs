//! The full patient model: one shared backbone over the four view videos,
//! a shared fusion layer per view and the view combination.
//!
//! Parameters live in one [`ParamStore`] under the prefixes `backbone.` and
//! `head.`.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionState, ShiftNodes};
use crate::backbone::{backbone_graph, BackboneConfig};
use crate::error::{Error, Result};
use crate::head::{
    asymmetry, combine_graph, fuse_view_graph, head_init, per_view_scores, FusionMode, GateState, ViewLogits,
    DEFAULT_GATE_FIXED, DEFAULT_GATE_INIT,
};
use crate::params::{Bound, ParamStore};
use crate::radiomics::N_FEATURES;
use crate::tensor::{Graph, Tensor, Var};

pub const CONFIG_FILE: &str = "model.json";
pub const WEIGHTS_DIR: &str = "weights";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub backbone: BackboneConfig,
    #[serde(default)]
    pub fusion: FusionMode,
    /// Initial effective scale of both view groups.
    #[serde(default = "default_gate_init")]
    pub gate_init: f64,
    /// The frozen part `w_f` of each scale.
    #[serde(default = "default_gate_fixed")]
    pub gate_fixed: f64,
}

fn default_gate_init() -> f64 {
    DEFAULT_GATE_INIT
}

fn default_gate_fixed() -> f64 {
    DEFAULT_GATE_FIXED
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            backbone: BackboneConfig::default(),
            fusion: FusionMode::Gated,
            gate_init: DEFAULT_GATE_INIT,
            gate_fixed: DEFAULT_GATE_FIXED,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        GateState::new(self.gate_init, self.gate_fixed)?;
        if 2.0 * self.gate_init <= crate::head::GATE_FLOOR {
            return Err(Error::InvalidArgument(format!(
                "gate_init {} starts below the collapse floor",
                self.gate_init
            )));
        }
        Ok(())
    }

    /// Adjusts the backbone for clips of `frames` frames.
    pub fn for_frames(&self, frames: usize) -> Self {
        ModelConfig {
            backbone: self.backbone.for_frames(frames),
            ..self.clone()
        }
    }
}

/// One patient ready for the network: per-view videos `[1, T, H, W]` and
/// standardized radiomics, in view order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientSample {
    pub id: String,
    pub label: u8,
    pub category: u8,
    pub age_category: u8,
    pub videos: [Tensor; 4],
    pub radiomics: [Vec<f64>; 4],
    /// Filled by pseudo-labelling.
    pub y_soft: Option<f64>,
    pub gamma: Option<f64>,
}

/// Per-patient output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPrediction {
    pub logits: ViewLogits,
    pub scores: [f64; 4],
    /// Fused probability.
    pub y: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct PatientNodes {
    pub logits: [Var; 4],
    pub fused: Var,
    pub attention: [Option<ShiftNodes>; 4],
    pub attention_dims: Option<(usize, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    config: ModelConfig,
    params: ParamStore,
}

impl RiskModel {
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        params.extend_prefixed("backbone.", config.backbone.init(seed)?);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let gate = GateState::new(config.gate_init, config.gate_fixed)?;
        params.extend_prefixed("head.", head_init(config.backbone.embed_dim, gate, &mut rng));
        Ok(RiskModel { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let model = RiskModel { config, params };
        let reference = RiskModel::build(model.config.clone(), 0)?;
        for (name, t) in reference.params.iter() {
            let have = model.params.get(name)?;
            if have.shape() != t.shape() {
                return Err(Error::shape("model weights", have.shape(), t.shape()));
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn gate(&self) -> Result<GateState> {
        let s = |n: &str| self.params.get(&format!("head.gate.{n}")).map(Tensor::item);
        Ok(GateState {
            w_f: s("w_f")?,
            theta_t: s("theta_t")?,
            theta_s: s("theta_s")?,
        })
    }

    /// Builds the patient forward pass on `g`.
    pub fn graph(&self, g: &mut Graph, bound: &Bound, sample: &PatientSample) -> Result<PatientNodes> {
        let mut logits = Vec::with_capacity(4);
        let mut attention = [None; 4];
        let mut dims = None;
        for v in 0..4 {
            if sample.radiomics[v].len() != N_FEATURES {
                return Err(Error::shape("patient radiomics", &[sample.radiomics[v].len()], &[N_FEATURES]));
            }
            let video = g.constant(sample.videos[v].clone());
            let nodes = backbone_graph(g, video, &self.config.backbone, bound, "backbone.")?;
            attention[v] = nodes.attention;
            dims = nodes.attention_dims;
            let logit = fuse_view_graph(
                g,
                nodes.embedding,
                &sample.radiomics[v],
                sample.age_category as f64,
                bound,
                "head.",
            )?;
            logits.push(logit);
        }
        let logits: [Var; 4] = logits.try_into().expect("four views");
        let fused = combine_graph(g, logits, self.config.fusion, bound, "head.")?;
        Ok(PatientNodes {
            logits,
            fused,
            attention,
            attention_dims: dims,
        })
    }

    pub fn predict(&self, sample: &PatientSample) -> Result<RiskPrediction> {
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let nodes = self.graph(&mut g, &bound, sample)?;
        let logits = ViewLogits::new(nodes.logits.map(|v| g.value(v).item()));
        let scores = per_view_scores(&logits);
        let y = g.value(nodes.fused).item();
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("prediction for patient {}", sample.id)));
        }
        Ok(RiskPrediction {
            logits,
            scores,
            y,
            gamma: asymmetry(scores),
        })
    }

    /// Attention position weights per view, when the backbone has the
    /// linear additive block, with the `(T, H, W)` grid they live on.
    pub fn attention_maps(&self, sample: &PatientSample) -> Result<Option<([AttentionState; 4], (usize, usize, usize))>> {
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let nodes = self.graph(&mut g, &bound, sample)?;
        let (Some(dims), [Some(a), Some(b), Some(c), Some(d)]) = (nodes.attention_dims, nodes.attention) else {
            return Ok(None);
        };
        let state = |n: ShiftNodes| AttentionState {
            alpha: g.value(n.alpha).data().to_vec(),
            beta: g.value(n.beta).data().to_vec(),
        };
        Ok(Some(([state(a), state(b), state(c), state(d)], dims)))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, serde_json::to_string_pretty(&self.config)?).map_err(|e| Error::io(&path, e))?;
        self.params.save_dir(dir.join(WEIGHTS_DIR))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(CONFIG_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let config: ModelConfig = serde_json::from_str(&text)?;
        let params = ParamStore::load_dir(dir.join(WEIGHTS_DIR))?;
        RiskModel::from_parts(config, params)
    }
}
