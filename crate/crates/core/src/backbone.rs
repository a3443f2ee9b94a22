//! Small residual 3D CNN whose kernels come from inflating 2D kernels.
//!
//! Layout: a `1×3×3` stride-2 stem with optional average pooling, residual
//! layers whose first convolution spans `temporal_kernel` frames (all others
//! are `1×3×3`), an optional attention block after a chosen layer, global
//! average pooling and a linear map to the embedding.
//!
//! ```
//! use seqrisk::backbone::{inflate, Backbone, BackboneConfig};
//! use seqrisk::tensor::Tensor;
//!
//! let w = Tensor::ones(&[1, 1, 3, 3]);
//! let w3 = inflate(&w, 3).unwrap();
//! assert_eq!(w3.shape(), &[1, 1, 3, 3, 3]);
//! assert!((w3.data()[0] - 1.0 / 3.0).abs() < 1e-15);
//!
//! let net = Backbone::build(BackboneConfig::tiny(), 7).unwrap();
//! let emb = net.forward(&Tensor::zeros(&[1, 2, 32, 32])).unwrap();
//! assert_eq!(emb.shape(), &[net.config().embed_dim]);
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{nonlocal_graph, nonlocal_init, shift_graph, ShiftConfig, ShiftNodes, DEFAULT_NONLOCAL_CAP};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::params::{glorot_normal, he_normal, Bound, ParamStore};
use crate::tensor::{Conv3dSpec, Graph, TemporalPadding, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    pub stem_channels: usize,
    pub layer_channels: Vec<usize>,
    pub blocks_per_layer: usize,
    pub temporal_kernel: usize,
    /// Spatial average pooling factor after the stem (1 disables it).
    #[serde(default = "one")]
    pub stem_pool: usize,
    /// Insert the linear additive block after this 1-based layer.
    #[serde(default)]
    pub shift_layer: Option<usize>,
    /// Insert the non-local block after this 1-based layer.
    #[serde(default)]
    pub nonlocal_layer: Option<usize>,
    #[serde(default)]
    pub shift: ShiftFlags,
    pub embed_dim: usize,
    #[serde(default)]
    pub temporal_padding: TemporalPadding,
}

fn one() -> usize {
    1
}

/// Ablation switches forwarded to the attention block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftFlags {
    #[serde(default)]
    pub share_query_key: bool,
    #[serde(default)]
    pub share_alpha_beta: bool,
    #[serde(default)]
    pub query_value_addition: bool,
    #[serde(default)]
    pub global_key_from_p: bool,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            stem_channels: 16,
            layer_channels: vec![16, 32, 64, 128],
            blocks_per_layer: 2,
            temporal_kernel: 3,
            stem_pool: 1,
            shift_layer: None,
            nonlocal_layer: None,
            shift: ShiftFlags::default(),
            embed_dim: 128,
            temporal_padding: TemporalPadding::Replicate,
        }
    }
}

impl BackboneConfig {
    /// Two one-block layers of 4 and 8 channels behind a pooled stem; small
    /// enough to train many runs on one core.
    pub fn tiny() -> Self {
        BackboneConfig {
            stem_channels: 4,
            layer_channels: vec![4, 8],
            blocks_per_layer: 1,
            temporal_kernel: 3,
            stem_pool: 2,
            shift_layer: None,
            nonlocal_layer: None,
            shift: ShiftFlags::default(),
            embed_dim: 16,
            temporal_padding: TemporalPadding::Replicate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.layer_channels.is_empty() || self.blocks_per_layer == 0 {
            return bad("backbone needs at least one layer with one block".into());
        }
        if self.stem_channels == 0 || self.embed_dim == 0 || self.layer_channels.contains(&0) {
            return bad("channel counts must be positive".into());
        }
        if self.temporal_kernel == 0 || self.temporal_kernel % 2 == 0 {
            return bad(format!("temporal kernel {} must be odd", self.temporal_kernel));
        }
        if self.stem_pool == 0 {
            return bad("stem_pool must be >= 1".into());
        }
        if self.shift_layer.is_some() && self.nonlocal_layer.is_some() {
            return bad("at most one attention block may be enabled".into());
        }
        for l in [self.shift_layer, self.nonlocal_layer].into_iter().flatten() {
            if l == 0 || l > self.layer_channels.len() {
                return bad(format!("attention layer {l} outside 1..={}", self.layer_channels.len()));
            }
        }
        Ok(())
    }

    /// Product of all spatial strides and pooling.
    pub fn total_stride(&self) -> usize {
        2 * self.stem_pool * (1 << (self.layer_channels.len() - 1))
    }

    /// The same architecture with every temporal extent set to `t`.
    pub fn with_temporal_kernel(&self, t: usize) -> Self {
        BackboneConfig {
            temporal_kernel: t,
            ..self.clone()
        }
    }

    /// A one-frame clip gains nothing from temporal taps, so the kernel
    /// collapses to a single plane there.
    pub fn for_frames(&self, frames: usize) -> Self {
        if frames == 1 {
            self.with_temporal_kernel(1)
        } else {
            self.clone()
        }
    }

    fn shift_config(&self, c: usize) -> ShiftConfig {
        ShiftConfig {
            share_query_key: self.shift.share_query_key,
            share_alpha_beta: self.shift.share_alpha_beta,
            query_value_addition: self.shift.query_value_addition,
            global_key_from_p: self.shift.global_key_from_p,
            ..ShiftConfig::new(c)
        }
    }

    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.stem_channels
        } else {
            self.layer_channels[l - 1]
        }
    }

    fn block_shapes(&self, l: usize, b: usize) -> (usize, usize, usize, bool) {
        let c_out = self.layer_channels[l];
        let c_in = if b == 0 { self.layer_input(l) } else { c_out };
        let stride = if l > 0 && b == 0 { 2 } else { 1 };
        let down = stride != 1 || c_in != c_out;
        (c_in, c_out, stride, down)
    }

    /// Parameters in construction order, names relative to the backbone.
    pub fn init(&self, seed: u64) -> Result<ParamStore> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let affine = |p: &mut ParamStore, name: &str, c: usize| {
            p.insert(format!("{name}.gamma"), Tensor::ones(&[c, 1, 1, 1]));
            p.insert(format!("{name}.beta"), Tensor::zeros(&[c, 1, 1, 1]));
        };
        p.insert("stem.w", he_normal(&[self.stem_channels, 1, 1, 3, 3], 9, &mut rng));
        affine(&mut p, "stem.bn", self.stem_channels);
        for l in 0..self.layer_channels.len() {
            for b in 0..self.blocks_per_layer {
                let (c_in, c_out, _, down) = self.block_shapes(l, b);
                let kt = if b == 0 { self.temporal_kernel } else { 1 };
                let name = format!("layer{}.{b}", l + 1);
                p.insert(
                    format!("{name}.conv1.w"),
                    he_normal(&[c_out, c_in, kt, 3, 3], c_in * kt * 9, &mut rng),
                );
                affine(&mut p, &format!("{name}.bn1"), c_out);
                p.insert(
                    format!("{name}.conv2.w"),
                    he_normal(&[c_out, c_out, 1, 3, 3], c_out * 9, &mut rng),
                );
                affine(&mut p, &format!("{name}.bn2"), c_out);
                if down {
                    p.insert(format!("{name}.down.w"), he_normal(&[c_out, c_in, 1, 1, 1], c_in, &mut rng));
                    affine(&mut p, &format!("{name}.down.bn"), c_out);
                }
            }
            if self.shift_layer == Some(l + 1) {
                let c = self.layer_channels[l];
                p.extend_prefixed("attn.", self.shift_config(c).init(&mut rng)?);
            }
            if self.nonlocal_layer == Some(l + 1) {
                let c = self.layer_channels[l];
                p.extend_prefixed("attn.", nonlocal_init(c, (c / 2).max(1), &mut rng)?);
            }
        }
        let c_last = *self.layer_channels.last().expect("validated");
        p.insert("fc.w", glorot_normal(c_last, self.embed_dim, &mut rng));
        p.insert("fc.b", Tensor::zeros(&[self.embed_dim]));
        Ok(p)
    }
}

/// Nodes produced by [`backbone_graph`].
#[derive(Debug, Clone, Copy)]
pub struct BackboneNodes {
    pub embedding: Var,
    pub attention: Option<ShiftNodes>,
    /// `(T, H, W)` of the feature map the attention block saw.
    pub attention_dims: Option<(usize, usize, usize)>,
}

fn affine(g: &mut Graph, x: Var, bound: &Bound, name: &str) -> Result<Var> {
    let y = g.mul(x, bound.get(&format!("{name}.gamma"))?)?;
    g.add(y, bound.get(&format!("{name}.beta"))?)
}

fn conv(g: &mut Graph, x: Var, w: Var, stride: usize, mode: TemporalPadding) -> Result<Var> {
    let s = g.shape(w);
    let spec = Conv3dSpec::same(s[2], s[3], stride, mode);
    g.conv3d(x, w, spec)
}

/// One residual block `relu(bn2(conv2(relu(bn1(conv1(x))))) + skip(x))` with
/// parameters named `{name}.conv1.w`, `{name}.bn1.gamma` and so on. The skip
/// path is a strided 1×1×1 projection when `down` is set.
pub fn residual_block_graph(
    g: &mut Graph,
    x: Var,
    bound: &Bound,
    name: &str,
    stride: usize,
    down: bool,
    mode: TemporalPadding,
) -> Result<Var> {
    let p = |n: &str| bound.get(&format!("{name}.{n}"));
    let mut h = conv(g, x, p("conv1.w")?, stride, mode)?;
    h = affine(g, h, bound, &format!("{name}.bn1"))?;
    h = g.relu(h);
    h = conv(g, h, p("conv2.w")?, 1, mode)?;
    h = affine(g, h, bound, &format!("{name}.bn2"))?;
    let skip = if down {
        let s = conv(g, x, p("down.w")?, stride, mode)?;
        affine(g, s, bound, &format!("{name}.down.bn"))?
    } else {
        x
    };
    let sum = g.add(h, skip)?;
    Ok(g.relu(sum))
}

/// Forward pass of `video: [1, T, H, W]` with parameters under `prefix`.
pub fn backbone_graph(
    g: &mut Graph,
    video: Var,
    cfg: &BackboneConfig,
    bound: &Bound,
    prefix: &str,
) -> Result<BackboneNodes> {
    cfg.validate()?;
    let shape = g.shape(video).to_vec();
    let stride = cfg.total_stride();
    if shape.len() != 4 || shape[0] != 1 {
        return Err(Error::shape("backbone", &shape, &[1, 0, 0, 0]));
    }
    if shape[2] % stride != 0 || shape[3] % stride != 0 {
        return Err(Error::InvalidArgument(format!(
            "spatial size {}x{} not divisible by total stride {stride}",
            shape[2], shape[3]
        )));
    }
    let mode = cfg.temporal_padding;
    let p = |n: &str| bound.get(&format!("{prefix}{n}"));
    let pn = |n: &str| format!("{prefix}{n}");

    let mut x = conv(g, video, p("stem.w")?, 2, mode)?;
    x = affine(g, x, bound, &pn("stem.bn"))?;
    x = g.relu(x);
    if cfg.stem_pool > 1 {
        x = g.avg_pool_spatial(x, cfg.stem_pool)?;
    }

    let mut attention = None;
    let mut attention_dims = None;
    for l in 0..cfg.layer_channels.len() {
        for b in 0..cfg.blocks_per_layer {
            let (_, _, stride, down) = cfg.block_shapes(l, b);
            let name = pn(&format!("layer{}.{b}", l + 1));
            x = residual_block_graph(g, x, bound, &name, stride, down, mode)?;
        }
        let is_shift = cfg.shift_layer == Some(l + 1);
        let is_nonlocal = cfg.nonlocal_layer == Some(l + 1);
        if is_shift || is_nonlocal {
            let s = g.shape(x).to_vec();
            let (c, n) = (s[0], s[1] * s[2] * s[3]);
            let flat = g.reshape(x, &[c, n])?;
            let rows = g.transpose(flat)?;
            let out = if is_shift {
                let nodes = shift_graph(g, rows, &cfg.shift_config(c), bound, &pn("attn."))?;
                attention = Some(nodes);
                attention_dims = Some((s[1], s[2], s[3]));
                nodes.y
            } else {
                nonlocal_graph(g, rows, c, bound, &pn("attn."), DEFAULT_NONLOCAL_CAP)?
            };
            let cols = g.transpose(out)?;
            x = g.reshape(cols, &s)?;
        }
    }

    let s = g.shape(x).to_vec();
    let flat = g.reshape(x, &[s[0], s[1] * s[2] * s[3]])?;
    let pooled = g.mean_axis(flat, 1)?;
    let row = g.reshape(pooled, &[1, s[0]])?;
    let emb = g.matmul(row, p("fc.w")?)?;
    let emb = g.reshape(emb, &[cfg.embed_dim])?;
    let embedding = g.add(emb, p("fc.b")?)?;
    Ok(BackboneNodes {
        embedding,
        attention,
        attention_dims,
    })
}

/// Every temporal plane equals `w2d / t`. Accepts `[C_out, C_in, k, k]` or a
/// single-plane `[C_out, C_in, 1, k, k]`.
pub fn inflate(w2d: &Tensor, t: usize) -> Result<Tensor> {
    if t == 0 {
        return Err(Error::InvalidArgument("inflation depth must be >= 1".into()));
    }
    let (co, ci, kh, kw) = match w2d.shape() {
        [co, ci, kh, kw] => (*co, *ci, *kh, *kw),
        [co, ci, 1, kh, kw] => (*co, *ci, *kh, *kw),
        s => return Err(Error::shape("inflate", s, &[0, 0, 0, 0])),
    };
    let plane = kh * kw;
    let src = w2d.data();
    let mut out = Vec::with_capacity(co * ci * t * plane);
    for oc in 0..co * ci {
        let k = &src[oc * plane..(oc + 1) * plane];
        for _ in 0..t {
            if t == 1 {
                out.extend_from_slice(k);
            } else {
                out.extend(k.iter().map(|v| v / t as f64));
            }
        }
    }
    Tensor::new(vec![co, ci, t, kh, kw], out)
}

/// A configuration together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    config: BackboneConfig,
    params: ParamStore,
}

impl Backbone {
    pub fn build(config: BackboneConfig, seed: u64) -> Result<Self> {
        let params = config.init(seed)?;
        Ok(Backbone { config, params })
    }

    pub fn from_parts(config: BackboneConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        Ok(Backbone { config, params })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Embedding of `[1, T, H, W]` (or `[T, H, W]`).
    pub fn forward(&self, video: &Tensor) -> Result<Tensor> {
        let video = match video.shape() {
            [t, h, w] => video.reshape(&[1, *t, *h, *w])?,
            _ => video.clone(),
        };
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let v = g.constant(video);
        let nodes = backbone_graph(&mut g, v, &self.config, &bound, "")?;
        Ok(g.value(nodes.embedding).clone())
    }

    /// 3D network whose first-of-layer kernels are this network's single-plane
    /// kernels inflated to `t` frames; everything else is copied.
    pub fn inflated(&self, t: usize) -> Result<Backbone> {
        if self.config.temporal_kernel != 1 {
            return Err(Error::InvalidArgument(format!(
                "inflation source must be a 2D network, got temporal kernel {}",
                self.config.temporal_kernel
            )));
        }
        let config = self.config.with_temporal_kernel(t);
        config.validate()?;
        let mut params = ParamStore::new();
        for (name, w) in self.params.iter() {
            let inflate_this = name.ends_with(".0.conv1.w");
            params.insert(name, if inflate_this { inflate(w, t)? } else { w.clone() });
        }
        Ok(Backbone { config, params })
    }
}

/// Max absolute embedding difference between the 2D net on `frame` and the
/// 3D net on `frame` repeated `frames` times.
pub fn static_equivalence_check(b2d: &Backbone, b3d: &Backbone, frame: &Image, frames: usize) -> Result<f64> {
    let (c2, c3) = (b2d.config(), b3d.config());
    if c2.with_temporal_kernel(c3.temporal_kernel) != *c3 {
        return Err(Error::InvalidArgument("backbones differ beyond temporal extent".into()));
    }
    let (h, w) = (frame.height(), frame.width());
    let single = Tensor::new(vec![1, 1, h, w], frame.pixels().to_vec())?;
    let mut rep = Vec::with_capacity(frames * h * w);
    for _ in 0..frames {
        rep.extend_from_slice(frame.pixels());
    }
    let clip = Tensor::new(vec![1, frames, h, w], rep)?;
    let e2 = b2d.forward(&single)?;
    let e3 = b3d.forward(&clip)?;
    Ok(e2.max_abs_diff(&e3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inflation_planes_and_sum() {
        let w = Tensor::from_fn(&[2, 1, 3, 3], |i| i as f64 - 4.0);
        assert_eq!(inflate(&w, 1).unwrap().data(), w.data());
        let w3 = inflate(&w, 3).unwrap();
        for oc in 0..2 {
            for k in 0..9 {
                let s: f64 = (0..3).map(|t| w3.data()[oc * 27 + t * 9 + k]).sum();
                assert!((s - w.data()[oc * 9 + k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn config_rules() {
        let mut c = BackboneConfig::tiny();
        c.shift_layer = Some(1);
        c.nonlocal_layer = Some(2);
        assert!(c.validate().is_err());
        c.nonlocal_layer = None;
        c.shift_layer = Some(3);
        assert!(c.validate().is_err());
        assert_eq!(BackboneConfig::tiny().total_stride(), 8);
        assert_eq!(BackboneConfig::default().total_stride(), 16);
    }

    #[test]
    fn indivisible_input_rejected() {
        let net = Backbone::build(BackboneConfig::tiny(), 1).unwrap();
        assert!(net.forward(&Tensor::zeros(&[1, 2, 12, 16])).is_err());
    }

    #[test]
    fn zero_video_gives_bias() {
        let net = Backbone::build(BackboneConfig::tiny(), 1).unwrap();
        let e = net.forward(&Tensor::zeros(&[1, 2, 16, 16])).unwrap();
        assert!(e.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn static_frames_match_2d_network() {
        let c2 = BackboneConfig::tiny().with_temporal_kernel(1);
        let b2 = Backbone::build(c2, 5).unwrap();
        let frame = Image::from_fn(16, 16, |y, x| ((y * 7 + x * 3) % 11) as f64 / 11.0 - 0.4);
        for t in [2, 3] {
            let b3 = b2.inflated(3).unwrap();
            assert!(static_equivalence_check(&b2, &b3, &frame, t).unwrap() < 1e-9);
        }
        let b1 = b2.inflated(1).unwrap();
        assert_eq!(static_equivalence_check(&b2, &b1, &frame, 1).unwrap(), 0.0);
    }
}
