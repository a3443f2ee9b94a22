//! Additive spatial-channel attention with linear cost in the number of
//! positions, and a quadratic non-local dot-product baseline.
//!
//! Both blocks act on a feature matrix `X: [n, C]` (one row per voxel) and
//! add their output back onto `X`.
//!
//! ```
//! use seqrisk::attention::{count_params, AttentionKind};
//!
//! assert_eq!(count_params(AttentionKind::NonLocal, 64, 32), 8192);
//! assert_eq!(count_params(AttentionKind::Shift, 64, 32), 8258);
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{glorot_normal, Bound, ParamStore};
use crate::tensor::{Graph, Tensor, Var};

pub const DEFAULT_NONLOCAL_CAP: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    Shift,
    NonLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub c_in: usize,
    pub c_b: usize,
    #[serde(default)]
    pub share_query_key: bool,
    #[serde(default)]
    pub share_alpha_beta: bool,
    #[serde(default)]
    pub query_value_addition: bool,
    /// Build the global key from `p` instead of `K`.
    #[serde(default)]
    pub global_key_from_p: bool,
}

impl ShiftConfig {
    /// Bottleneck `C/2` (at least 1), no sharing, no query addition.
    pub fn new(c_in: usize) -> Self {
        ShiftConfig {
            c_in,
            c_b: (c_in / 2).max(1),
            share_query_key: false,
            share_alpha_beta: false,
            query_value_addition: false,
            global_key_from_p: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_b == 0 || self.c_b > self.c_in {
            return Err(Error::InvalidArgument(format!(
                "bottleneck {} must lie in 1..={}",
                self.c_b, self.c_in
            )));
        }
        Ok(())
    }

    /// Parameter count honouring the sharing flags.
    pub fn param_count(&self) -> usize {
        let (c, cb) = (self.c_in, self.c_b);
        let proj = if self.share_query_key { 3 } else { 4 } * c * cb;
        let fc = if self.share_alpha_beta { 1 } else { 2 } * (cb + 1);
        proj + fc
    }

    /// Freshly initialized block parameters.
    pub fn init(&self, rng: &mut impl Rng) -> Result<ParamStore> {
        self.validate()?;
        let (c, cb) = (self.c_in, self.c_b);
        let mut p = ParamStore::new();
        p.insert("w_q", glorot_normal(c, cb, rng));
        if !self.share_query_key {
            p.insert("w_k", glorot_normal(c, cb, rng));
        }
        p.insert("w_v", glorot_normal(c, cb, rng));
        p.insert("fc_q.w", glorot_normal(cb, 1, rng));
        p.insert("fc_q.b", Tensor::zeros(&[1]));
        if !self.share_alpha_beta {
            p.insert("fc_k.w", glorot_normal(cb, 1, rng));
            p.insert("fc_k.b", Tensor::zeros(&[1]));
        }
        p.insert("w_o", glorot_normal(cb, c, rng));
        Ok(p)
    }
}

/// Position weights of one forward pass; each sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Graph nodes produced by [`shift_graph`].
#[derive(Debug, Clone, Copy)]
pub struct ShiftNodes {
    pub y: Var,
    pub alpha: Var,
    pub beta: Var,
}

fn expect_input(g: &Graph, x: Var, c: usize, op: &'static str) -> Result<usize> {
    match g.shape(x) {
        [n, cc] if *cc == c && *n > 0 => Ok(*n),
        s => Err(Error::shape(op, s, &[0, c])),
    }
}

fn row_sums(g: &mut Graph, m: Var) -> Result<Var> {
    let n = g.shape(m)[0];
    let s = g.sum_axis(m, 1)?;
    g.reshape(s, &[n, 1])
}

/// Block on the graph; `bound` holds the parameters under `prefix`.
pub fn shift_graph(
    g: &mut Graph,
    x: Var,
    cfg: &ShiftConfig,
    bound: &Bound,
    prefix: &str,
) -> Result<ShiftNodes> {
    cfg.validate()?;
    expect_input(g, x, cfg.c_in, "shift")?;
    let p = |name: &str| bound.get(&format!("{prefix}{name}"));
    let w_q = p("w_q")?;
    let w_k = if cfg.share_query_key { w_q } else { p("w_k")? };
    let (fq_w, fq_b) = (p("fc_q.w")?, p("fc_q.b")?);
    let (fk_w, fk_b) = if cfg.share_alpha_beta {
        (fq_w, fq_b)
    } else {
        (p("fc_k.w")?, p("fc_k.b")?)
    };

    let q = g.matmul(x, w_q)?;
    let k = g.matmul(x, w_k)?;
    let v = g.matmul(x, p("w_v")?)?;

    let sq = g.matmul(q, fq_w)?;
    let sq = g.add(sq, fq_b)?;
    let alpha = g.softmax(sq, 0)?;
    let q_sum = row_sums(g, q)?;
    let q_glob = g.mul(alpha, q_sum)?;

    let pk = g.mul(q_glob, k)?;
    let sk = g.matmul(pk, fk_w)?;
    let sk = g.add(sk, fk_b)?;
    let beta = g.softmax(sk, 0)?;
    let k_sum = row_sums(g, if cfg.global_key_from_p { pk } else { k })?;
    let k_glob = g.mul(beta, k_sum)?;

    let mut u = g.mul(k_glob, v)?;
    if cfg.query_value_addition {
        u = g.add(u, q)?;
    }
    let out = g.matmul(u, p("w_o")?)?;
    let y = g.add(x, out)?;
    Ok(ShiftNodes { y, alpha, beta })
}

/// Stand-alone forward pass with parameters named as in [`ShiftConfig::init`].
pub fn shift_forward(
    x: &Tensor,
    cfg: &ShiftConfig,
    params: &ParamStore,
) -> Result<(Tensor, AttentionState)> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let xv = g.constant(x.clone());
    let nodes = shift_graph(&mut g, xv, cfg, &bound, "")?;
    Ok((
        g.value(nodes.y).clone(),
        AttentionState {
            alpha: g.value(nodes.alpha).data().to_vec(),
            beta: g.value(nodes.beta).data().to_vec(),
        },
    ))
}

/// Non-local block parameters: `theta`, `phi`, `g` (`C → C_b`) and `w_o`.
pub fn nonlocal_init(c_in: usize, c_b: usize, rng: &mut impl Rng) -> Result<ParamStore> {
    if c_b == 0 || c_b > c_in {
        return Err(Error::InvalidArgument(format!("bottleneck {c_b} must lie in 1..={c_in}")));
    }
    let mut p = ParamStore::new();
    for name in ["theta", "phi", "g"] {
        p.insert(name, glorot_normal(c_in, c_b, rng));
    }
    p.insert("w_o", glorot_normal(c_b, c_in, rng));
    Ok(p)
}

/// `Y = X + softmax_rows(θ(X) φ(X)ᵀ) g(X) W_O`; refuses `n > cap`.
pub fn nonlocal_graph(
    g: &mut Graph,
    x: Var,
    c_in: usize,
    bound: &Bound,
    prefix: &str,
    cap: usize,
) -> Result<Var> {
    let n = expect_input(g, x, c_in, "nonlocal")?;
    if n > cap {
        return Err(Error::MemoryCap { n, cap });
    }
    let p = |name: &str| bound.get(&format!("{prefix}{name}"));
    let th = g.matmul(x, p("theta")?)?;
    let ph = g.matmul(x, p("phi")?)?;
    let gx = g.matmul(x, p("g")?)?;
    let ph_t = g.transpose(ph)?;
    let scores = g.matmul(th, ph_t)?;
    let attn = g.softmax(scores, 1)?;
    let mixed = g.matmul(attn, gx)?;
    let out = g.matmul(mixed, p("w_o")?)?;
    g.add(x, out)
}

pub fn nonlocal_forward(x: &Tensor, params: &ParamStore, cap: usize) -> Result<Tensor> {
    let c_in = params.get("theta")?.shape()[0];
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let xv = g.constant(x.clone());
    let y = nonlocal_graph(&mut g, xv, c_in, &bound, "", cap)?;
    Ok(g.value(y).clone())
}

/// Parameter count of a block without weight sharing.
pub fn count_params(kind: AttentionKind, c: usize, c_b: usize) -> usize {
    match kind {
        AttentionKind::NonLocal => 4 * c * c_b,
        AttentionKind::Shift => 4 * c * c_b + 2 * (c_b + 1),
    }
}

/// Multiply-accumulate count for one forward pass over `n` positions.
pub fn count_macs(kind: AttentionKind, c: usize, c_b: usize, n: usize) -> u128 {
    let (c, cb, n) = (c as u128, c_b as u128, n as u128);
    let proj = 3 * n * c * cb;
    let out = n * cb * c;
    match kind {
        AttentionKind::NonLocal => proj + 2 * n * n * cb + out,
        AttentionKind::Shift => proj + 2 * n * cb + 2 * n * cb + 2 * n * cb + out,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttentionPoint {
    pub t: usize,
    pub y: usize,
    pub x: usize,
    pub weight: f64,
}

/// The `k` largest weights of a `T×H×W` position map, descending, ties by
/// flat index.
pub fn top_attention_points(
    weights: &[f64],
    k: usize,
    (t, h, w): (usize, usize, usize),
) -> Result<Vec<AttentionPoint>> {
    let n = weights.len();
    if n != t * h * w {
        return Err(Error::shape("top_attention_points", &[n], &[t, h, w]));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {n} positions")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    Ok(order[..k]
        .iter()
        .map(|&i| AttentionPoint {
            t: i / (h * w),
            y: (i / w) % h,
            x: i % w,
            weight: weights[i],
        })
        .collect())
}
