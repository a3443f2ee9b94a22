//! Per-view fusion of embedding, radiomics and age into a logit, combination
//! of the four view logits, per-view risk scores and bilateral asymmetry.
//!
//! ```
//! use seqrisk::head::{asymmetry, combine_average, combine_gated, GateState, ViewLogits};
//!
//! let v = ViewLogits::new([2.0, 2.0, 0.0, 0.0]);
//! let gate = GateState::from_scales(0.6, 0.4, 0.0).unwrap();
//! assert!((combine_gated(&v, &gate).unwrap() - 0.768_524_783_499_017_9).abs() < 1e-12);
//! assert_eq!(combine_average(&ViewLogits::new([0.0; 4])), 0.5);
//! assert!((asymmetry([0.9, 0.2, 0.8, 0.3]) - 1.2).abs() < 1e-12);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Bound, ParamStore};
use crate::radiomics::N_FEATURES;
use crate::tensor::{sigmoid, Graph, Tensor, Var};
use crate::view::View;

/// Floor on `W_T + W_S`.
pub const GATE_FLOOR: f64 = 1e-3;

/// Default fixed part of the gate and initial effective scale.
pub const DEFAULT_GATE_FIXED: f64 = 0.4;
pub const DEFAULT_GATE_INIT: f64 = 0.6;

/// Logits in [`View::ALL`] order: LCC, RCC, LMLO, RMLO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewLogits(pub [f64; 4]);

impl ViewLogits {
    pub fn new(x: [f64; 4]) -> Self {
        ViewLogits(x)
    }

    pub fn get(&self, v: View) -> f64 {
        self.0[v.index()]
    }
}

/// `W = w_f + tanh(θ)` for the craniocaudal (T) and oblique (S) views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateState {
    pub w_f: f64,
    pub theta_t: f64,
    pub theta_s: f64,
}

impl GateState {
    /// Both views start at effective scale `init`.
    pub fn new(init: f64, w_f: f64) -> Result<Self> {
        Self::from_scales(init, init, w_f)
    }

    /// Gate with effective scales `w_t`, `w_s`; each `scale - w_f` must lie
    /// strictly inside `(-1, 1)`.
    pub fn from_scales(w_t: f64, w_s: f64, w_f: f64) -> Result<Self> {
        let theta = |w: f64| {
            let d = w - w_f;
            if d.abs() >= 1.0 {
                Err(Error::InvalidArgument(format!(
                    "scale {w} unreachable from fixed weight {w_f}"
                )))
            } else {
                Ok(d.atanh())
            }
        };
        Ok(GateState {
            w_f,
            theta_t: theta(w_t)?,
            theta_s: theta(w_s)?,
        })
    }

    pub fn scales(&self) -> (f64, f64) {
        (self.w_f + self.theta_t.tanh(), self.w_f + self.theta_s.tanh())
    }
}

/// `σ` of the mean logit.
pub fn combine_average(v: &ViewLogits) -> f64 {
    sigmoid(v.0.iter().sum::<f64>() / 4.0)
}

/// `σ((W_T(x_lcc + x_rcc) + W_S(x_lmlo + x_rmlo)) / (2 W_T + 2 W_S))`.
pub fn combine_gated(v: &ViewLogits, g: &GateState) -> Result<f64> {
    let (wt, ws) = g.scales();
    combine_scaled(v, wt, ws)
}

/// The gated combination for explicit scales.
pub fn combine_scaled(v: &ViewLogits, wt: f64, ws: f64) -> Result<f64> {
    check_gate(wt + ws)?;
    let x = |view| v.get(view);
    let num = wt * x(View::Lcc) + wt * x(View::Rcc) + ws * x(View::Lmlo) + ws * x(View::Rmlo);
    Ok(sigmoid(num / (2.0 * wt + 2.0 * ws)))
}

fn check_gate(sum: f64) -> Result<()> {
    if sum > GATE_FLOOR {
        Ok(())
    } else {
        Err(Error::GateCollapse {
            sum,
            floor: GATE_FLOOR,
        })
    }
}

/// Elementwise `σ`, in view order.
pub fn per_view_scores(v: &ViewLogits) -> [f64; 4] {
    v.0.map(sigmoid)
}

/// `|(y_lcc + y_lmlo) - (y_rcc + y_rmlo)|` for scores in view order.
pub fn asymmetry(scores: [f64; 4]) -> f64 {
    let [lcc, rcc, lmlo, rmlo] = scores;
    ((lcc + lmlo) - (rcc + rmlo)).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Average,
    #[default]
    Gated,
}

/// Length of the head input for an embedding of `embed_dim`.
pub fn head_input_len(embed_dim: usize) -> usize {
    embed_dim + N_FEATURES + 1
}

/// Shared linear layer `w: [D, 1]`, `b: [1]`, plus the gate parameters
/// (`gate.w_f` frozen).
pub fn head_init(embed_dim: usize, gate: GateState, rng: &mut impl rand::Rng) -> ParamStore {
    let d = head_input_len(embed_dim);
    let mut p = ParamStore::new();
    p.insert("fc.w", crate::params::normal(&[d, 1], (1.0 / d as f64).sqrt(), rng));
    p.insert("fc.b", Tensor::zeros(&[1]));
    p.insert("gate.w_f", Tensor::scalar(gate.w_f));
    p.insert("gate.theta_t", Tensor::scalar(gate.theta_t));
    p.insert("gate.theta_s", Tensor::scalar(gate.theta_s));
    p.freeze("gate.w_f").expect("just inserted");
    p
}

/// Logit `[1]` for `concat(embedding, radiomics, age)` through the shared layer.
pub fn fuse_view_graph(
    g: &mut Graph,
    embedding: Var,
    radiomics: &[f64],
    age_category: f64,
    bound: &Bound,
    prefix: &str,
) -> Result<Var> {
    if radiomics.len() != N_FEATURES {
        return Err(Error::shape("fuse_view", &[radiomics.len()], &[N_FEATURES]));
    }
    let mut extra = radiomics.to_vec();
    extra.push(age_category);
    let extra = g.constant(Tensor::from_vec(extra));
    let feat = g.concat(&[embedding, extra])?;
    let d = g.shape(feat)[0];
    let row = g.reshape(feat, &[1, d])?;
    let w = bound.get(&format!("{prefix}fc.w"))?;
    if g.shape(w) != [d, 1] {
        return Err(Error::shape("fuse_view", g.shape(w), &[d, 1]));
    }
    let z = g.matmul(row, w)?;
    let z = g.reshape(z, &[1])?;
    g.add(z, bound.get(&format!("{prefix}fc.b"))?)
}

/// Plain-value version of [`fuse_view_graph`].
pub fn fuse_view(embedding: &[f64], radiomics: &[f64], age_category: f64, w: &[f64], b: f64) -> Result<f64> {
    let d = embedding.len() + radiomics.len() + 1;
    if radiomics.len() != N_FEATURES || w.len() != d {
        return Err(Error::shape("fuse_view", &[d], &[w.len()]));
    }
    let x = embedding.iter().chain(radiomics).chain(std::iter::once(&age_category));
    Ok(x.zip(w).map(|(a, b)| a * b).sum::<f64>() + b)
}

/// Fused probability on the graph from four `[1]` logits.
pub fn combine_graph(
    g: &mut Graph,
    logits: [Var; 4],
    mode: FusionMode,
    bound: &Bound,
    prefix: &str,
) -> Result<Var> {
    let [lcc, rcc, lmlo, rmlo] = logits;
    let cc = g.add(lcc, rcc)?;
    let mlo = g.add(lmlo, rmlo)?;
    let z = match mode {
        FusionMode::Average => {
            let s = g.add(cc, mlo)?;
            g.scale(s, 0.25)
        }
        FusionMode::Gated => {
            let p = |n: &str| bound.get(&format!("{prefix}gate.{n}"));
            let w_f = p("w_f")?;
            let tt = p("theta_t")?;
            let ts = p("theta_s")?;
            let tt = g.tanh(tt);
            let ts = g.tanh(ts);
            let wt = g.add(w_f, tt)?;
            let ws = g.add(w_f, ts)?;
            let sum = g.add(wt, ws)?;
            check_gate(g.value(sum).item())?;
            let a = g.mul(wt, cc)?;
            let b = g.mul(ws, mlo)?;
            let num = g.add(a, b)?;
            let den = g.scale(sum, 2.0);
            g.div(num, den)?
        }
    };
    Ok(g.sigmoid(z))
}

/// `-(t ln p + (1 - t) ln(1 - p))` with `p` clipped to `[1e-7, 1 - 1e-7]`.
pub fn bce(p: f64, t: f64) -> f64 {
    let p = p.clamp(BCE_CLIP, 1.0 - BCE_CLIP);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

pub const BCE_CLIP: f64 = 1e-7;

/// [`bce`] on the graph for a single-element prediction.
pub fn bce_graph(g: &mut Graph, p: Var, t: f64) -> Result<Var> {
    let pc = g.clamp(p, BCE_CLIP, 1.0 - BCE_CLIP);
    let lp = g.log(pc);
    let neg = g.neg(pc);
    let q = g.add_scalar(neg, 1.0);
    let lq = g.log(q);
    let a = g.scale(lp, t);
    let b = g.scale(lq, 1.0 - t);
    let s = g.add(a, b)?;
    let s = g.neg(s);
    Ok(g.sum(s))
}
