//! Finite-difference gradient checks for every differentiable operation and
//! for the composite blocks built from them.
//!
//! Each check reduces its output to a scalar through a fixed random
//! projection `sum(out ⊙ R)` so that every output element contributes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attention::{nonlocal_graph, nonlocal_init, shift_graph, ShiftConfig, DEFAULT_NONLOCAL_CAP};
use crate::backbone::{backbone_graph, residual_block_graph, BackboneConfig};
use crate::error::{Error, Result};
use crate::head::{bce_graph, combine_graph, fuse_view_graph, head_init, FusionMode, GateState};
use crate::model::{ModelConfig, PatientSample, RiskModel};
use crate::params::{Bound, ParamStore};
use crate::radiomics::N_FEATURES;
use crate::tensor::{grad_check_many, Conv3dSpec, Graph, TemporalPadding, Tensor, Var};

/// Step used by every check in this module. Most blocks are piecewise linear
/// in each coordinate, so the step only has to beat the roundoff of the
/// forward pass, which is `1e-15` relative or worse on the larger blocks.
pub const SUITE_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Values in `[-2, 2]` kept at least `gap` away from zero.
fn away_from_zero(shape: &[usize], gap: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(gap..2.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// Moves zero-initialised normalisation shifts off zero so no relu input
/// sits exactly on its kink.
fn jitter_shifts(store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
    let names: Vec<String> = store.names().filter(|n| n.ends_with(".beta")).map(str::to_string).collect();
    for name in names {
        for v in store.get_mut(&name)?.data_mut() {
            *v = rng.gen_range(-0.3..0.3);
        }
    }
    Ok(())
}

/// `sum(out ⊙ r)` for a constant `r` drawn from `seed`.
pub fn project(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = uniform(g.shape(out), -1.0, 1.0, &mut rng);
    let r = g.constant(r);
    let p = g.mul(out, r)?;
    Ok(g.sum(p))
}

fn check<F>(name: &str, inputs: Vec<Tensor>, seed: u64, f: F) -> Result<CheckResult>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let err = grad_check_many(
        |g, v| {
            let out = f(g, v)?;
            project(g, out, seed)
        },
        &inputs,
        SUITE_EPS,
    )?;
    Ok(CheckResult {
        name: name.to_string(),
        max_rel_error: err,
    })
}

const FLAT: f64 = 1e-12;

/// Central-difference check of every trainable entry of `store` for the
/// scalar `f(graph, bound)`.
///
/// Entries whose analytic gradient is below `1e-12` in magnitude are skipped
/// when the difference quotient is also below `1e-8`, as happens for a bias
/// that a softmax cancels.
pub fn store_grad_check<F>(store: &ParamStore, eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &Bound) -> Result<Var>,
{
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let b = s.bind(&mut g);
        let out = f(&mut g, &b)?;
        Ok(g.value(out).item())
    };
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let out = f(&mut g, &bound)?;
    if g.value(out).len() != 1 {
        return Err(Error::InvalidArgument("store_grad_check needs a scalar".into()));
    }
    let grads = g.backward(out)?;
    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        if store.is_frozen(&name) {
            continue;
        }
        let var = bound.get(&name)?;
        let analytic = grads
            .get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(store.get(&name).expect("listed").shape()));
        for i in 0..analytic.len() {
            let orig = store.get(&name)?.data()[i];
            probe.get_mut(&name)?.data_mut()[i] = orig + eps;
            let up = eval(&probe)?;
            probe.get_mut(&name)?.data_mut()[i] = orig - eps;
            let down = eval(&probe)?;
            probe.get_mut(&name)?.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[i];
            // an exactly invariant direction: only roundoff is left in the quotient
            if a.abs() < FLAT && numeric.abs() < 1e-8 {
                continue;
            }
            let e = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(e);
        }
    }
    Ok(worst)
}

/// Every differentiable tensor operation on small random inputs.
pub fn op_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let a = uniform(&[3, 4], -2.0, 2.0, &mut rng);
    let b = uniform(&[3, 4], -2.0, 2.0, &mut rng);
    let row = uniform(&[1, 4], -2.0, 2.0, &mut rng);
    let pos = uniform(&[3, 4], 0.5, 2.0, &mut rng);
    let nz = away_from_zero(&[3, 4], 0.05, &mut rng);
    let s = seed;

    out.push(check("add", vec![a.clone(), row.clone()], s, |g, v| g.add(v[0], v[1]))?);
    out.push(check("sub", vec![a.clone(), row.clone()], s, |g, v| g.sub(v[0], v[1]))?);
    out.push(check("mul", vec![a.clone(), b.clone()], s, |g, v| g.mul(v[0], v[1]))?);
    out.push(check("div", vec![a.clone(), pos.clone()], s, |g, v| g.div(v[0], v[1]))?);
    out.push(check("neg", vec![a.clone()], s, |g, v| Ok(g.neg(v[0])))?);
    out.push(check("sigmoid", vec![a.clone()], s, |g, v| Ok(g.sigmoid(v[0])))?);
    out.push(check("tanh", vec![a.clone()], s, |g, v| Ok(g.tanh(v[0])))?);
    out.push(check("exp", vec![a.clone()], s, |g, v| Ok(g.exp(v[0])))?);
    out.push(check("log", vec![pos.clone()], s, |g, v| Ok(g.log(v[0])))?);
    out.push(check("abs", vec![nz.clone()], s, |g, v| Ok(g.abs(v[0])))?);
    out.push(check("relu", vec![nz.clone()], s, |g, v| Ok(g.relu(v[0])))?);
    out.push(check("scale", vec![a.clone()], s, |g, v| Ok(g.scale(v[0], -1.5)))?);
    out.push(check("add_scalar", vec![a.clone()], s, |g, v| Ok(g.add_scalar(v[0], 0.7)))?);
    out.push(check("clamp", vec![nz.clone()], s, |g, v| Ok(g.clamp(v[0], -10.0, 10.0)))?);
    let m = uniform(&[4, 5], -2.0, 2.0, &mut rng);
    out.push(check("matmul", vec![a.clone(), m], s, |g, v| g.matmul(v[0], v[1]))?);
    out.push(check("transpose", vec![a.clone()], s, |g, v| g.transpose(v[0]))?);
    out.push(check("reshape", vec![a.clone()], s, |g, v| g.reshape(v[0], &[2, 6]))?);
    out.push(check("concat", vec![a.clone(), row.clone()], s, |g, v| g.concat(&[v[0], v[1]]))?);
    out.push(check("softmax_axis0", vec![a.clone()], s, |g, v| g.softmax(v[0], 0))?);
    out.push(check("softmax_axis1", vec![a.clone()], s, |g, v| g.softmax(v[0], 1))?);
    out.push(check("sum", vec![a.clone()], s, |g, v| Ok(g.sum(v[0])))?);
    out.push(check("mean", vec![a.clone()], s, |g, v| Ok(g.mean(v[0])))?);
    out.push(check("sum_axis", vec![a.clone()], s, |g, v| g.sum_axis(v[0], 1))?);
    out.push(check("mean_axis", vec![a.clone()], s, |g, v| g.mean_axis(v[0], 0))?);
    // distinct values so the arg-extremum is stable under the probe
    let distinct = Tensor::from_fn(&[3, 4], |i| ((i * 7) % 12) as f64 * 0.3 - 1.6);
    out.push(check("max_axis", vec![distinct.clone()], s, |g, v| g.max_axis(v[0], Some(1)))?);
    out.push(check("min_axis", vec![distinct], s, |g, v| g.min_axis(v[0], Some(0)))?);
    let x = uniform(&[2, 3, 4, 4], -2.0, 2.0, &mut rng);
    out.push(check("avg_pool_spatial", vec![x], s, |g, v| g.avg_pool_spatial(v[0], 2))?);
    out.extend(conv_checks(seed)?);
    Ok(out)
}

/// 3D convolution against both operands for each temporal padding mode.
pub fn conv_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0);
    let x = uniform(&[2, 2, 4, 4], -2.0, 2.0, &mut rng);
    let w = uniform(&[2, 2, 3, 3, 3], -1.0, 1.0, &mut rng);
    let mut out = Vec::new();
    for (mode, stride) in [(TemporalPadding::Zero, 1), (TemporalPadding::Replicate, 1), (TemporalPadding::Replicate, 2)] {
        let spec = Conv3dSpec::same(3, 3, stride, mode);
        let name = format!("conv3d_{mode:?}_stride{stride}").to_lowercase();
        out.push(check(&name, vec![x.clone(), w.clone()], seed, move |g, v| g.conv3d(v[0], v[1], spec))?);
    }
    Ok(out)
}

/// Attention blocks, a backbone, the gate and the full loss chain.
pub fn block_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1);
    let mut out = Vec::new();

    let (n, c, cb) = (6, 4, 2);
    let flag_sets = [
        ("shift", ShiftConfig::new(c)),
        (
            "shift_all_flags",
            ShiftConfig {
                share_query_key: true,
                share_alpha_beta: true,
                query_value_addition: true,
                global_key_from_p: true,
                ..ShiftConfig::new(c)
            },
        ),
    ];
    for (name, cfg) in flag_sets {
        let mut store = cfg.init(&mut rng)?;
        let x = uniform(&[n, c], -2.0, 2.0, &mut rng);
        store.insert("x", x);
        let err = store_grad_check(&store, SUITE_EPS, |g, b| {
            let y = shift_graph(g, b.get("x")?, &cfg, b, "")?.y;
            project(g, y, seed)
        })?;
        out.push(CheckResult {
            name: name.into(),
            max_rel_error: err,
        });
    }

    let mut store = nonlocal_init(c, cb, &mut rng)?;
    store.insert("x", uniform(&[n, c], -2.0, 2.0, &mut rng));
    let err = store_grad_check(&store, SUITE_EPS, |g, b| {
        let y = nonlocal_graph(g, b.get("x")?, c, b, "", DEFAULT_NONLOCAL_CAP)?;
        project(g, y, seed)
    })?;
    out.push(CheckResult {
        name: "nonlocal".into(),
        max_rel_error: err,
    });

    let bb = check_backbone();
    let full = bb.init(seed)?;
    for (name, block, stride, down, input) in [
        ("backbone_block", "layer1.0", 1, false, [2, 2, 4, 4]),
        ("backbone_block_down", "layer2.0", 2, true, [2, 2, 4, 4]),
    ] {
        let mut store = ParamStore::new();
        for (n, t) in full.iter().filter(|(n, _)| n.starts_with(block)) {
            store.insert(n, t.clone());
        }
        jitter_shifts(&mut store, &mut rng)?;
        store.insert("x", uniform(&input, -2.0, 2.0, &mut rng));
        let err = store_grad_check(&store, SUITE_EPS, |g, b| {
            let y = residual_block_graph(g, b.get("x")?, b, block, stride, down, bb.temporal_padding)?;
            project(g, y, seed)
        })?;
        out.push(CheckResult {
            name: name.into(),
            max_rel_error: err,
        });
    }

    let gate = GateState::from_scales(0.7, 0.5, 0.4)?;
    let mut store = ParamStore::new();
    store.insert("gate.w_f", Tensor::scalar(gate.w_f));
    store.insert("gate.theta_t", Tensor::scalar(gate.theta_t));
    store.insert("gate.theta_s", Tensor::scalar(gate.theta_s));
    store.freeze("gate.w_f")?;
    for (i, l) in [0.8, -1.1, 0.3, 1.7].iter().enumerate() {
        store.insert(format!("x{i}"), Tensor::from_vec(vec![*l]));
    }
    let err = store_grad_check(&store, SUITE_EPS, |g, b| {
        let logits = [b.get("x0")?, b.get("x1")?, b.get("x2")?, b.get("x3")?];
        let y = combine_graph(g, logits, FusionMode::Gated, b, "")?;
        Ok(g.sum(y))
    })?;
    out.push(CheckResult {
        name: "gate".into(),
        max_rel_error: err,
    });

    // view embeddings through the shared head, the gate and the loss
    let embed = 3;
    let mut store = head_init(embed, GateState::new(0.6, 0.4)?, &mut rng);
    for v in 0..4 {
        store.insert(format!("e{v}"), uniform(&[embed], -2.0, 2.0, &mut rng));
    }
    let radiomics: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..N_FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let err = store_grad_check(&store, SUITE_EPS, |g, b| {
        let mut logits = Vec::with_capacity(4);
        for (v, r) in radiomics.iter().enumerate() {
            logits.push(fuse_view_graph(g, b.get(&format!("e{v}"))?, r, 2.0, b, "")?);
        }
        let logits: [Var; 4] = logits.try_into().expect("four views");
        let y = combine_graph(g, logits, FusionMode::Gated, b, "")?;
        bce_graph(g, y, 1.0)
    })?;
    out.push(CheckResult {
        name: "bce_chain".into(),
        max_rel_error: err,
    });
    Ok(out)
}

fn check_backbone() -> BackboneConfig {
    BackboneConfig {
        stem_channels: 2,
        layer_channels: vec![2, 3],
        blocks_per_layer: 1,
        temporal_kernel: 3,
        stem_pool: 1,
        shift_layer: None,
        embed_dim: 3,
        ..BackboneConfig::tiny()
    }
}

/// Whole-network checks: a two-block backbone from video to embedding and the
/// full patient model from four videos to the loss. Long chains leave some
/// parameters with gradients near `1e-7`, where central differences carry
/// roundoff of order `1e-5` relative, so these are held to `1e-5`.
pub fn end_to_end_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe2);
    let mut out = Vec::new();
    let bb = check_backbone();
    let mut store = bb.init(seed)?;
    jitter_shifts(&mut store, &mut rng)?;
    store.insert("video", uniform(&[1, 2, 8, 8], -2.0, 2.0, &mut rng));
    store.freeze("video")?;
    let err = store_grad_check(&store, SUITE_EPS, |g, b| {
        let e = backbone_graph(g, b.get("video")?, &bb, b, "")?.embedding;
        project(g, e, seed)
    })?;
    out.push(CheckResult {
        name: "backbone_end_to_end".into(),
        max_rel_error: err,
    });

    let mut model = RiskModel::build(
        ModelConfig {
            backbone: bb,
            ..ModelConfig::default()
        },
        seed,
    )?;
    jitter_shifts(model.params_mut(), &mut rng)?;
    let sample = PatientSample {
        id: "check".into(),
        label: 1,
        category: 1,
        age_category: 2,
        videos: [0, 1, 2, 3].map(|_| uniform(&[1, 2, 8, 8], -2.0, 2.0, &mut rng)),
        radiomics: [0, 1, 2, 3].map(|_| (0..N_FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        y_soft: None,
        gamma: None,
    };
    let err = store_grad_check(model.params(), SUITE_EPS, |g, b| {
        let nodes = model.graph(g, b, &sample)?;
        bce_graph(g, nodes.fused, 1.0)
    })?;
    out.push(CheckResult {
        name: "model_end_to_end".into(),
        max_rel_error: err,
    });
    Ok(out)
}

/// [`op_checks`] followed by [`block_checks`].
pub fn grad_check_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut all = op_checks(seed)?;
    all.extend(block_checks(seed)?);
    Ok(all)
}
