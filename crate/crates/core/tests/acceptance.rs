//! One PASS/FAIL line per acceptance criterion.
//!
//! The end-to-end criteria train several small networks on the synthetic
//! cohort and take roughly ten minutes per replay on a single core.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{max_abs_diff, oracle, random_grid, random_image, random_mask, rng, to_quantized, toy};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use seqrisk::attention::{count_macs, count_params, shift_forward, AttentionKind, ShiftConfig};
use seqrisk::backbone::{static_equivalence_check, Backbone, BackboneConfig};
use seqrisk::diagnostics::grad_check_suite;
use seqrisk::evaluation::{auc, auc_of, bootstrap_ci, delong_test, roc_points, trapezoid_area};
use seqrisk::experiment::{fit, predict_all, prepare, processed_cohort};
use seqrisk::head::{asymmetry, combine_average, combine_gated, combine_scaled, per_view_scores, GateState, ViewLogits};
use seqrisk::image::Image;
use seqrisk::model::{ModelConfig, RiskModel};
use seqrisk::params::ParamStore;
use seqrisk::pipeline::PrepConfig;
use seqrisk::radiomics::{self, glcm, ngtdm, zones, N_FEATURES};
use seqrisk::synth::CohortConfig;
use seqrisk::tensor::Tensor;
use seqrisk::training::{filter_controls, pseudo_label, train, two_stage_finetune, LabelSource, TrainConfig};

/// Collects named sub-checks for one criterion.
#[derive(Default)]
struct Checks(Vec<(bool, String)>);

impl Checks {
    fn that(&mut self, ok: bool, what: impl Into<String>) {
        self.0.push((ok, what.into()));
    }
}

fn run(n: usize, title: &str, f: impl FnOnce(&mut Checks)) -> bool {
    let t0 = Instant::now();
    let mut c = Checks::default();
    let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut c)));
    let mut ok = outcome.is_ok() && c.0.iter().all(|x| x.0);
    if c.0.is_empty() {
        ok = false;
    }
    println!(
        "{} criterion {n:>2}: {title} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        t0.elapsed().as_secs_f64()
    );
    for (good, what) in &c.0 {
        println!("    [{}] {what}", if *good { "ok" } else { "!!" });
    }
    if let Err(e) = outcome {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        println!("    [!!] panicked: {msg}");
    }
    ok
}

fn parameter_counts(c: &mut Checks) {
    let nl = count_params(AttentionKind::NonLocal, 64, 32);
    let sh = count_params(AttentionKind::Shift, 64, 32);
    c.that(nl == 8192, format!("non-local params {nl} == 8192"));
    c.that(sh == 8258, format!("shift params {sh} == 8258"));
}

fn mac_accounting(c: &mut Checks) {
    let quad = 2u64 * 2048 * 2048 * 32;
    let rel = (quad as f64 - 268.427e6).abs() / 268.427e6;
    c.that(quad == 268_435_456 && rel < 1e-4, format!("quadratic term {quad}, {rel:.2e} from 268.427M"));
    let m = |n: usize| count_macs(AttentionKind::Shift, 64, 32, n) as i128;
    let worst = (1..64).map(|k| (m(64 * k + 128) - 2 * m(64 * k + 64) + m(64 * k)).abs()).max().unwrap();
    c.that(worst == 0, format!("shift second difference max |{worst}|"));
    let ratio = |n| count_macs(AttentionKind::NonLocal, 64, 32, n) as f64 / m(n) as f64;
    let r = [ratio(1024), ratio(2048), ratio(4096)];
    c.that(r[0] < r[1] && r[1] < r[2], format!("non-local/shift ratio {r:.2?}"));
}

type Mat = Vec<Vec<f64>>;

fn rows(t: &Tensor) -> Mat {
    t.data().chunks(t.shape()[1]).map(|r| r.to_vec()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, bl)| x * bl[j]).sum()).collect())
        .collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Additive attention written out step by step from its definition.
fn shift_reference(x: &Mat, cfg: &ShiftConfig, p: &ParamStore) -> Mat {
    let get = |n: &str| rows(p.get(n).unwrap());
    let scalar = |n: &str| p.get(n).unwrap().data()[0];
    let w_q = get("w_q");
    let w_k = if cfg.share_query_key { w_q.clone() } else { get("w_k") };
    let (fq, bq) = (get("fc_q.w"), scalar("fc_q.b"));
    let (fk, bk) = if cfg.share_alpha_beta { (fq.clone(), bq) } else { (get("fc_k.w"), scalar("fc_k.b")) };
    let (q, k, v) = (matmul(x, &w_q), matmul(x, &w_k), matmul(x, &get("w_v")));
    let score = |m: &Mat, w: &Mat, b: f64| -> Vec<f64> {
        m.iter().map(|r| b + r.iter().zip(w).map(|(a, wr)| a * wr[0]).sum::<f64>()).collect()
    };
    let alpha = softmax(&score(&q, &fq, bq));
    let qg: Vec<f64> = q.iter().zip(&alpha).map(|(r, a)| a * r.iter().sum::<f64>()).collect();
    let pk: Mat = k.iter().zip(&qg).map(|(r, g)| r.iter().map(|v| g * v).collect()).collect();
    let beta = softmax(&score(&pk, &fk, bk));
    let src = if cfg.global_key_from_p { &pk } else { &k };
    let kg: Vec<f64> = src.iter().zip(&beta).map(|(r, b)| b * r.iter().sum::<f64>()).collect();
    let u: Mat = (0..x.len())
        .map(|i| {
            (0..cfg.c_b)
                .map(|j| kg[i] * v[i][j] + if cfg.query_value_addition { q[i][j] } else { 0.0 })
                .collect()
        })
        .collect();
    let o = matmul(&u, &get("w_o"));
    x.iter().zip(&o).map(|(xr, or)| xr.iter().zip(or).map(|(a, b)| a + b).collect()).collect()
}

fn shift_correctness(c: &mut Checks) {
    let mut r = rng(31);
    let (mut worst, mut worst_perm) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let ch = r.gen_range(1..=8);
        let cfg = ShiftConfig {
            c_b: r.gen_range(1..=ch),
            share_query_key: r.gen_bool(0.5),
            share_alpha_beta: r.gen_bool(0.5),
            query_value_addition: r.gen_bool(0.5),
            global_key_from_p: r.gen_bool(0.3),
            ..ShiftConfig::new(ch)
        };
        let mut p = cfg.init(&mut r).unwrap();
        for b in ["fc_q.b", "fc_k.b"] {
            if let Ok(t) = p.get_mut(b) {
                t.data_mut()[0] = r.gen_range(-1.0..1.0);
            }
        }
        let n = r.gen_range(2..=16);
        let x = Tensor::from_fn(&[n, ch], |_| r.gen_range(-2.0..2.0));
        let (y, _) = shift_forward(&x, &cfg, &p).unwrap();
        let want: Vec<f64> = shift_reference(&rows(&x), &cfg, &p).concat();
        worst = worst.max(max_abs_diff(y.data(), &want).1);

        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let permute = |t: &Tensor| {
            let d = t.data();
            Tensor::from_fn(t.shape(), |i| d[perm[i / ch] * ch + i % ch])
        };
        let (yp, _) = shift_forward(&permute(&x), &cfg, &p).unwrap();
        worst_perm = worst_perm.max(max_abs_diff(yp.data(), permute(&y).data()).1);
    }
    c.that(worst < 1e-10, format!("reference max diff {worst:.2e} over 20 instances"));
    c.that(worst_perm < 1e-10, format!("permutation equivariance {worst_perm:.2e}"));
    let suite = grad_check_suite(0).unwrap();
    let (name, err) = suite
        .iter()
        .map(|r| (r.name.clone(), r.max_rel_error))
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    c.that(err < 1e-6, format!("{} gradient checks, worst {name} at {err:.2e}", suite.len()));
    for want in ["shift", "nonlocal", "conv3d", "backbone_block", "gate", "bce_chain"] {
        c.that(suite.iter().any(|r| r.name.starts_with(want)), format!("gradient check {want} present"));
    }
}

fn inflation(c: &mut Checks) {
    let cfg = BackboneConfig::tiny().with_temporal_kernel(1);
    c.that(cfg.layer_channels.len() == 2, "two-layer backbone");
    let b2 = Backbone::build(cfg, 3).unwrap();
    let b3 = b2.inflated(3).unwrap();
    let mut r = rng(41);
    let img = random_image(&mut r, 16, 16, -1.0, 1.0);
    for t in [2, 3] {
        let d = static_equivalence_check(&b2, &b3, &img, t).unwrap();
        c.that(d < 1e-9, format!("T={t}: {d:.2e}"));
    }
}

fn radiomics_oracles(c: &mut Checks) {
    let n_named = glcm::NAMES.len()
        + zones::GLSZM_NAMES.len()
        + zones::GLRLM_NAMES.len()
        + zones::GLDM_NAMES.len()
        + ngtdm::NAMES.len()
        + radiomics::first_order::NAMES.len();
    c.that(n_named == 92, format!("{n_named} named matrix and first-order features"));
    let mut r = rng(51);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let g = random_grid(&mut r, 8, 8, 4, 0.9);
        let q = to_quantized(&g, 4);
        let pairs = [
            (radiomics::glcm_features(&q).unwrap().to_vec(), oracle::glcm(&g, 4)),
            (radiomics::glszm_features(&q).unwrap().to_vec(), oracle::glszm(&g)),
            (radiomics::glrlm_features(&q).unwrap().to_vec(), oracle::glrlm(&g)),
            (radiomics::gldm_features(&q).unwrap().to_vec(), oracle::gldm(&g)),
            (radiomics::ngtdm_features(&q).unwrap().to_vec(), oracle::ngtdm(&g, 4)),
        ];
        for (got, want) in &pairs {
            worst = worst.max(max_abs_diff(got, want).1);
        }
        let img = random_image(&mut r, 8, 8, -3.0, 5.0);
        let mask = random_mask(&mut r, 8, 8, 0.8);
        let vals: Vec<f64> = img.pixels().iter().zip(mask.bits()).filter(|p| *p.1).map(|p| *p.0).collect();
        if vals.len() >= 2 {
            let got = radiomics::first_order(&img, &mask).unwrap();
            worst = worst.max(max_abs_diff(&got, &oracle::first_order(&vals, 32)).1);
        }
    }
    c.that(worst < 1e-9, format!("max oracle diff {worst:.2e} on 50 images"));

    let img = Image::from_fn(16, 16, |y, x| ((y * 7 + x * 3) % 11) as f64);
    let mask = seqrisk::image::Mask::from_fn(16, 16, |y, x| (3..13).contains(&y) && (2..14).contains(&x));
    let v = radiomics::extract_all(&img, &mask).unwrap();
    c.that(v.values().len() == 122 && N_FEATURES == 122, format!("vector length {}", v.values().len()));

    let f = random_image(&mut r, 6, 6, -2.0, 2.0);
    let e: f64 = f.pixels().iter().map(|v| v * v).sum();
    let fe: f64 = radiomics::fft2(&f).pixels().iter().map(|v| v * v).sum();
    let de: f64 = radiomics::dct2(&f).pixels().iter().map(|v| v * v).sum();
    c.that((fe / 36.0 - e).abs() < 1e-9, format!("FFT Parseval {:.2e}", (fe / 36.0 - e).abs()));
    c.that((de - e).abs() < 1e-9, format!("DCT orthonormality {:.2e}", (de - e).abs()));
}

fn gating(c: &mut Checks) {
    let mut r = rng(61);
    let logits = |r: &mut ChaCha8Rng| ViewLogits::new([0; 4].map(|_| r.gen_range(-6.0..6.0)));
    let (mut eq, mut sc) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let v = logits(&mut r);
        let w = r.gen_range(0.1..1.5);
        let g = GateState::new(w, w / 2.0).unwrap();
        eq = eq.max((combine_gated(&v, &g).unwrap() - combine_average(&v)).abs());
        let (wt, ws, k) = (r.gen_range(0.05..2.0), r.gen_range(0.05..2.0), r.gen_range(0.01..100.0));
        sc = sc.max((combine_scaled(&v, wt, ws).unwrap() - combine_scaled(&v, k * wt, k * ws).unwrap()).abs());
    }
    c.that(eq < 1e-12, format!("equal scales vs average {eq:.2e}"));
    c.that(sc < 1e-12, format!("rescaling invariance {sc:.2e}"));

    let data = toy::samples(12, 1.0, &mut r);
    let mut model = RiskModel::build(toy::model_config(), 7).unwrap();
    let before = model.params().clone();
    let cfg = TrainConfig {
        batch_patients: 6,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let rep = train(&mut model, &data, &cfg, 5, LabelSource::Hard, |_, _| {}).unwrap();
    let same = |n: &str| model.params().get(n).unwrap() == before.get(n).unwrap();
    c.that(rep.steps == 10, format!("{} optimizer steps", rep.steps));
    c.that(same("head.gate.w_f"), "w_f unchanged");
    c.that(!same("head.gate.theta_t") && !same("head.gate.theta_s"), "trainable gate parts moved");
}

fn welch_one_sided(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (va, vb) = (var(a) / a.len() as f64, var(b) / b.len() as f64);
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t)
}

fn asymmetry_filter(c: &mut Checks, gammas: &Gammas) {
    let mut r = rng(71);
    let mut exact = true;
    for case in 0..50 {
        let n = r.gen_range(10..40);
        let s = toy::samples(n, 0.0, &mut r);
        let g: Vec<f64> = (0..n).map(|_| (r.gen_range(0..200) as f64) / 100.0).collect();
        let s = toy::with_gammas(s, &g);
        let t = [10.0, 50.0, 75.0, 90.0, 95.0, 100.0][case % 6];
        let mut controls: Vec<f64> = s.iter().filter(|p| p.label == 0).map(|p| p.gamma.unwrap()).collect();
        controls.sort_by(f64::total_cmp);
        let rank = ((t / 100.0 * controls.len() as f64).ceil() as usize).max(1);
        let thr = controls[rank - 1];
        let want = controls.iter().filter(|&&g| g < thr).count();
        let (kept, p) = filter_controls(&s, t).unwrap();
        let cases = s.iter().filter(|p| p.label == 1).count();
        exact &= p == thr
            && kept.iter().filter(|p| p.label == 0).count() == want
            && kept.iter().filter(|p| p.label == 1).count() == cases;
    }
    c.that(exact, "filter matches nearest-rank oracle on 50 gamma sets");

    let mut range_ok = true;
    for _ in 0..100_000 {
        let s = per_view_scores(&ViewLogits::new([0; 4].map(|_| r.gen_range(-20.0..20.0))));
        range_ok &= (0.0..=2.0).contains(&asymmetry(s));
    }
    c.that(range_ok, "gamma within [0, 2] on 1e5 quadruples");

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let p = welch_one_sided(&gammas.cases, &gammas.controls);
    c.that(
        mean(&gammas.cases) > mean(&gammas.controls) && p < 0.01,
        format!(
            "trained model: case gamma {:.4} vs control {:.4}, one-sided p {p:.2e}",
            mean(&gammas.cases),
            mean(&gammas.controls)
        ),
    );
}

fn statistics(c: &mut Checks) {
    let a = auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
    c.that(a == 0.75, format!("hand example AUC {a}"));
    let mut r = rng(81);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let labels: Vec<u8> = (0..60).map(|i| (i % 4 == 0) as u8).collect();
        let scores: Vec<f64> = labels.iter().map(|&l| (r.gen_range(0..20) + 5 * l as i32) as f64).collect();
        let d = (trapezoid_area(&roc_points(&scores, &labels).unwrap()) - auc(&scores, &labels).unwrap()).abs();
        worst = worst.max(d);
    }
    c.that(worst < 1e-12, format!("trapezoid vs Mann-Whitney {worst:.2e}"));

    let labels: Vec<u8> = (0..500).map(|i| (i % 5 == 0) as u8).collect();
    let s: Vec<f64> = (0..500).map(|_| r.gen()).collect();
    let same = delong_test(&s, &s, &labels).unwrap();
    c.that(same.p_value == 1.0, format!("identical scores p {}", same.p_value));
    let perfect: Vec<f64> = labels.iter().map(|&l| l as f64 + r.gen_range(0.0..0.5)).collect();
    let d = delong_test(&perfect, &s, &labels).unwrap();
    c.that(d.p_value < 0.01, format!("perfect vs random p {:.2e}", d.p_value));

    let mut contained = 0;
    for k in 0..100 {
        let labels: Vec<u8> = (0..80).map(|i| (i % 3 == 0) as u8).collect();
        let scores: Vec<f64> = labels.iter().map(|&l| r.gen::<f64>() + 0.3 * l as f64).collect();
        let point = auc(&scores, &labels).unwrap();
        let (lo, hi) = bootstrap_ci(&scores, &labels, 1000, 0.05, k).unwrap();
        contained += (lo <= point && point <= hi) as usize;
    }
    c.that(contained == 100, format!("bootstrap CI contains the estimate on {contained}/100 datasets"));
}

#[derive(Debug, Clone, PartialEq)]
struct Gammas {
    cases: Vec<f64>,
    controls: Vec<f64>,
}

/// Every number the end-to-end runs report, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
struct EndToEnd {
    numbers: Vec<(String, f64)>,
    gammas: Gammas,
}

impl EndToEnd {
    fn get(&self, name: &str) -> f64 {
        self.numbers.iter().find(|n| n.0 == name).unwrap().1
    }
}

const COHORT_SEED: u64 = 11;
const SPLIT_SEED: u64 = 3;
const MODEL_SEED: u64 = 9;

fn end_to_end() -> EndToEnd {
    let prep = PrepConfig::default();
    let tc = TrainConfig {
        epochs: 20,
        learning_rate: 1e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let base = ModelConfig {
        backbone: BackboneConfig::tiny(),
        ..ModelConfig::default()
    };
    let cohort = |signal: f64| CohortConfig {
        signal_strength: signal,
        seed: COHORT_SEED,
        ..CohortConfig::default()
    };
    let mut numbers = Vec::new();
    let mut note = |name: &str, v: f64| {
        println!("    {name} = {v:.6}");
        numbers.push((name.to_string(), v));
    };

    let high = processed_cohort(&cohort(1.0), &prep).unwrap();
    let t2 = prepare(&high, &prep, 2, SPLIT_SEED).unwrap();
    let (model_a, rep) = fit(&base, MODEL_SEED, &t2.train, &tc, |_, _| {}).unwrap();
    note("high_signal_loss", *rep.epoch_losses.last().unwrap());
    note("high_signal_auc", auc_of(&predict_all(&model_a, &t2.test).unwrap()).unwrap());

    let t1 = prepare(&high, &prep, 1, SPLIT_SEED).unwrap();
    let (m, _) = fit(&base.for_frames(1), MODEL_SEED, &t1.train, &tc, |_, _| {}).unwrap();
    note("one_frame_auc", auc_of(&predict_all(&m, &t1.test).unwrap()).unwrap());

    let with_shift = ModelConfig {
        backbone: BackboneConfig {
            shift_layer: Some(2),
            ..BackboneConfig::tiny()
        },
        ..base.clone()
    };
    let (m, _) = fit(&with_shift, MODEL_SEED, &t2.train, &tc, |_, _| {}).unwrap();
    note("shift_auc", auc_of(&predict_all(&m, &t2.test).unwrap()).unwrap());

    let d_s = pseudo_label(&model_a, &t2.train).unwrap();
    let split = |label: u8| d_s.iter().filter(|s| s.label == label).map(|s| s.gamma.unwrap()).collect::<Vec<_>>();
    let gammas = Gammas {
        cases: split(1),
        controls: split(0),
    };
    let fresh = RiskModel::build(base.clone(), MODEL_SEED).unwrap();
    let out = two_stage_finetune(fresh, &d_s, &tc, |_, _| {}).unwrap();
    note("filter_threshold", out.threshold);
    note("filtered_kept", out.kept as f64);
    note("stage1_auc", auc_of(&predict_all(&out.stage1, &t2.test).unwrap()).unwrap());
    note("finetuned_auc", auc_of(&predict_all(&out.model, &t2.test).unwrap()).unwrap());

    let zero = processed_cohort(&cohort(0.0), &prep).unwrap();
    let t0 = prepare(&zero, &prep, 2, SPLIT_SEED).unwrap();
    let (m, _) = fit(&base, MODEL_SEED, &t0.train, &tc, |_, _| {}).unwrap();
    note("no_signal_auc", auc_of(&predict_all(&m, &t0.test).unwrap()).unwrap());

    EndToEnd { numbers, gammas }
}

fn directional(c: &mut Checks, e: &EndToEnd) {
    let hi = e.get("high_signal_auc");
    c.that(hi >= 0.85, format!("(a) high signal AUC {hi:.4} >= 0.85"));
    let z = e.get("no_signal_auc");
    c.that(z <= 0.57, format!("(a) no signal AUC {z:.4} <= 0.57"));
    let one = e.get("one_frame_auc");
    c.that(hi >= one - 0.01, format!("(b) T=2 {hi:.4} vs T=1 {one:.4}"));
    let sh = e.get("shift_auc");
    c.that(sh >= hi - 0.01, format!("(c) with attention {sh:.4} vs baseline {hi:.4}"));
    let (s1, ft) = (e.get("stage1_auc"), e.get("finetuned_auc"));
    c.that(ft >= s1 - 0.02, format!("(d) two-stage {ft:.4} vs stage one {s1:.4}"));
}

fn replay(c: &mut Checks, first: &EndToEnd) {
    let again = end_to_end();
    for ((name, a), (_, b)) in first.numbers.iter().zip(&again.numbers) {
        c.that(a.to_bits() == b.to_bits(), format!("{name} {a} replayed as {b}"));
    }
    let same_gamma = first.gammas.cases.iter().chain(&first.gammas.controls).map(|g| g.to_bits()).eq(again
        .gammas
        .cases
        .iter()
        .chain(&again.gammas.controls)
        .map(|g| g.to_bits()));
    c.that(same_gamma, "asymmetry scores replayed bit for bit");
}

#[test]
fn acceptance_criteria() {
    println!("running end-to-end pipeline");
    let t0 = Instant::now();
    let e2e = catch_unwind(end_to_end).ok();
    println!("end-to-end pipeline took {:.1}s", t0.elapsed().as_secs_f64());

    let mut results = vec![
        run(1, "attention parameter counts", parameter_counts),
        run(2, "multiply-accumulate accounting", mac_accounting),
        run(3, "additive attention and gradients", shift_correctness),
        run(4, "inflated kernels on static video", inflation),
        run(5, "radiomics against definitional oracles", radiomics_oracles),
        run(6, "view gating", gating),
    ];
    results.push(run(7, "asymmetry filtering", |c| asymmetry_filter(c, &e2e.as_ref().unwrap().gammas)));
    results.push(run(8, "evaluation statistics", statistics));
    results.push(run(9, "directional end-to-end findings", |c| directional(c, e2e.as_ref().unwrap())));
    results.push(run(10, "deterministic replay", |c| replay(c, e2e.as_ref().unwrap())));
    let failed: Vec<usize> = results.iter().enumerate().filter(|r| !r.1).map(|r| r.0 + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
