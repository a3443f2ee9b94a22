use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use seqrisk::attention::{
    count_macs, count_params, nonlocal_forward, nonlocal_init, shift_forward, top_attention_points, AttentionKind,
    ShiftConfig, DEFAULT_NONLOCAL_CAP,
};
use seqrisk::dataset::{load_cohort, Manifest};
use seqrisk::diagnostics::{end_to_end_checks, grad_check_suite};
use seqrisk::evaluation::{
    auc_of, delong_test, evaluate, horizon_subset, read_predictions, roc_points, write_predictions, write_roc,
    HorizonMode, HORIZONS,
};
use seqrisk::experiment::{predict_all, prepare, Prepared};
use seqrisk::image::{write_pgm, Image};
use seqrisk::model::RiskModel;
use seqrisk::pipeline::{
    attach_features, process_cohort, read_features_csv, save_processed, write_features_csv, ProcessedPatient,
};
use seqrisk::synth::{describe as summarize, generate_to_dir, ImageFormat};
use seqrisk::tensor::Tensor;
use seqrisk::training::{pseudo_label, train as fit_epochs, two_stage_finetune, EpochLog, LabelSource};
use seqrisk::view::View;

use crate::config::RunConfig;
use crate::{DataArgs, Invalid, ModelArgs, RunArgs};

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

/// Prints a block of output; a closed pipe (`| head`) is not an error.
fn print_ignoring_pipe(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn resolved(run: &RunArgs, edit: impl FnOnce(&mut RunConfig)) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(run.config.as_deref())?;
    edit(&mut cfg);
    cfg.validate()?;
    cfg.save(&run.out)?;
    Ok(cfg)
}

fn apply_model_args(cfg: &mut RunConfig, a: &ModelArgs) {
    if a.tiny {
        cfg.model.backbone = seqrisk::backbone::BackboneConfig::tiny();
    }
    macro_rules! set {
        ($field:expr, $v:expr) => {
            if let Some(v) = $v {
                $field = v;
            }
        };
    }
    set!(cfg.prep.frames, a.frames);
    set!(cfg.train.epochs, a.epochs);
    set!(cfg.train.learning_rate, a.lr);
    set!(cfg.train.batch_patients, a.batch);
    set!(cfg.train.seed, a.train_seed);
    set!(cfg.model_seed, a.model_seed);
    set!(cfg.split_seed, a.split_seed);
    set!(cfg.model.gate_init, a.gate_init);
    set!(cfg.model.gate_fixed, a.gate_fixed);
    set!(cfg.checkpoint_every, a.checkpoint_every);
    if a.shift_layer.is_some() {
        cfg.model.backbone.shift_layer = a.shift_layer;
    }
    if a.nonlocal_layer.is_some() {
        cfg.model.backbone.nonlocal_layer = a.nonlocal_layer;
    }
}

pub fn gen_synthetic(
    run: &RunArgs,
    seed: Option<u64>,
    n_patients: Option<usize>,
    size: Option<usize>,
    signal: Option<f64>,
    format: Option<ImageFormat>,
) -> Result<()> {
    let cfg = resolved(run, |c| {
        let co = &mut c.cohort;
        co.seed = seed.unwrap_or(co.seed);
        co.n_patients = n_patients.unwrap_or(co.n_patients);
        co.image_size = size.unwrap_or(co.image_size);
        co.signal_strength = signal.unwrap_or(co.signal_strength);
        co.image_format = format.unwrap_or(co.image_format);
    })?;
    let manifest = generate_to_dir(&cfg.cohort, &run.out)?;
    let s = summarize(&Manifest::load(&manifest)?)?;
    println!("{}", manifest.display());
    println!("patients {} cases {} controls {}", s.n_patients, s.cases, s.controls);
    Ok(())
}

pub fn preprocess(run: &RunArgs, data: &Path, size: Option<usize>) -> Result<()> {
    let cfg = resolved(run, |c| c.prep.size = size.unwrap_or(c.prep.size))?;
    let raw = load_cohort(data)?;
    let processed = process_cohort(&raw, &cfg.prep)?;
    let manifest = save_processed(&processed, &run.out)?;
    println!("{}", manifest.display());
    Ok(())
}

pub fn extract_features(run: &RunArgs, data: &Path) -> Result<()> {
    resolved(run, |_| {})?;
    let ps: Vec<ProcessedPatient> = load_cohort(data)?
        .into_par_iter()
        .map(ProcessedPatient::from_prepared)
        .collect::<seqrisk::Result<_>>()?;
    let path = run.out.join("features.csv");
    write_features_csv(&ps, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn load_prepared(data: &DataArgs, cfg: &RunConfig) -> Result<Prepared> {
    let table = read_features_csv(&data.features)?;
    let patients = attach_features(load_cohort(&data.data)?, &table)?;
    Ok(prepare(&patients, &cfg.prep, cfg.prep.frames, cfg.split_seed)?)
}

/// Training log writer that also saves checkpoints.
struct EpochSink {
    log: csv::Writer<fs::File>,
    dir: std::path::PathBuf,
    every: usize,
    error: Option<anyhow::Error>,
}

impl EpochSink {
    fn new(dir: &Path, every: usize) -> Result<Self> {
        let mut log = csv::Writer::from_path(dir.join("train_log.csv"))?;
        log.write_record(["epoch", "split", "loss"])?;
        Ok(EpochSink {
            log,
            dir: dir.to_path_buf(),
            every,
            error: None,
        })
    }

    fn record(&mut self, l: &EpochLog, m: &RiskModel) {
        if self.error.is_some() {
            return;
        }
        let mut go = || -> Result<()> {
            self.log.write_record([l.epoch.to_string(), l.split.to_string(), format!("{:e}", l.loss)])?;
            self.log.flush()?;
            if self.every > 0 && (l.epoch + 1) % self.every == 0 {
                m.save(self.dir.join("checkpoints").join(format!("epoch_{:04}", l.epoch + 1)))?;
            }
            Ok(())
        };
        self.error = go().err();
    }

    fn finish(self) -> Result<()> {
        self.error.map_or(Ok(()), Err)
    }
}

pub fn train(run: &RunArgs, data: &DataArgs, args: &ModelArgs) -> Result<()> {
    let cfg = resolved(run, |c| apply_model_args(c, args))?;
    let prepared = load_prepared(data, &cfg)?;
    write_json(&run.out.join("split.json"), &prepared.plan)?;
    let mut model = RiskModel::build(cfg.model.for_frames(cfg.prep.frames), cfg.model_seed)?;
    let mut sink = EpochSink::new(&run.out, cfg.checkpoint_every)?;
    let report = fit_epochs(&mut model, &prepared.train, &cfg.train, cfg.train.epochs, LabelSource::Hard, |l, m| {
        sink.record(l, m)
    })?;
    sink.finish()?;
    model.save(run.out.join("model"))?;
    let preds = predict_all(&model, &prepared.test)?;
    write_predictions(&preds, run.out.join("predictions.csv"))?;
    let test_auc = auc_of(&preds)?;
    write_json(
        &run.out.join("summary.json"),
        &json!({
            "steps": report.steps,
            "final_loss": report.epoch_losses.last(),
            "n_train": prepared.train.len(),
            "n_test": prepared.test.len(),
            "test_auc": test_auc,
        }),
    )?;
    println!("test AUC {test_auc:.4} after {} steps", report.steps);
    Ok(())
}

pub fn finetune_baf(
    run: &RunArgs,
    data: &DataArgs,
    args: &ModelArgs,
    labeller_dir: &Path,
    percentile: Option<f64>,
    hard_labels: bool,
    warm_start: bool,
) -> Result<()> {
    let cfg = resolved(run, |c| {
        apply_model_args(c, args);
        c.train.filter_percentile = percentile.unwrap_or(c.train.filter_percentile);
        c.train.hard_labels |= hard_labels;
        c.train.warm_start |= warm_start;
    })?;
    let labeller = RiskModel::load(labeller_dir)?;
    let prepared = load_prepared(data, &cfg)?;
    let d_s = pseudo_label(&labeller, &prepared.train)?;
    let mut w = csv::Writer::from_path(run.out.join("pseudo_labels.csv"))?;
    w.write_record(["patient_id", "label", "y_soft", "gamma"])?;
    for s in &d_s {
        w.write_record([
            s.id.clone(),
            s.label.to_string(),
            format!("{:e}", s.y_soft.unwrap_or(f64::NAN)),
            format!("{:e}", s.gamma.unwrap_or(f64::NAN)),
        ])?;
    }
    w.flush()?;

    let init = if cfg.train.warm_start {
        labeller
    } else {
        RiskModel::build(cfg.model.for_frames(cfg.prep.frames), cfg.model_seed)?
    };
    let mut sink = EpochSink::new(&run.out, cfg.checkpoint_every)?;
    let out = two_stage_finetune(init, &d_s, &cfg.train, |l, m| sink.record(l, m))?;
    sink.finish()?;
    out.stage1.save(run.out.join("stage1"))?;
    out.model.save(run.out.join("model"))?;
    let stage1 = predict_all(&out.stage1, &prepared.test)?;
    let last = predict_all(&out.model, &prepared.test)?;
    write_predictions(&stage1, run.out.join("stage1_predictions.csv"))?;
    write_predictions(&last, run.out.join("predictions.csv"))?;
    let (a1, a2) = (auc_of(&stage1)?, auc_of(&last)?);
    write_json(
        &run.out.join("summary.json"),
        &json!({
            "threshold": out.threshold,
            "n_pseudo_labelled": d_s.len(),
            "n_kept": out.kept,
            "stage1_steps": out.stage1_report.steps,
            "stage2_steps": out.stage2_report.steps,
            "stage1_test_auc": a1,
            "test_auc": a2,
        }),
    )?;
    println!("kept {} of {} (threshold {:.4}); test AUC {a1:.4} -> {a2:.4}", out.kept, d_s.len(), out.threshold);
    Ok(())
}

pub fn eval(
    run: &RunArgs,
    predictions: &Path,
    compare: Option<&Path>,
    horizon_mode: Option<HorizonMode>,
    n_boot: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = resolved(run, |c| {
        c.eval.horizon_mode = horizon_mode.unwrap_or(c.eval.horizon_mode);
        c.eval.n_boot = n_boot.unwrap_or(c.eval.n_boot);
        c.eval.seed = seed.unwrap_or(c.eval.seed);
    })?;
    let preds = read_predictions(predictions)?;
    let mode = cfg.eval.horizon_mode;
    let mut report = evaluate(&preds, mode, cfg.eval.n_boot, cfg.eval.seed)?;
    if let Some(other) = compare {
        let by_id: BTreeMap<String, f64> = read_predictions(other)?.into_iter().map(|p| (p.patient_id, p.score)).collect();
        let b = preds
            .iter()
            .map(|p| {
                by_id
                    .get(&p.patient_id)
                    .copied()
                    .ok_or_else(|| Invalid(format!("{}: no score for patient {}", other.display(), p.patient_id)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let a: Vec<f64> = preds.iter().map(|p| p.score).collect();
        let labels: Vec<u8> = preds.iter().map(|p| p.label).collect();
        report.delong = Some(delong_test(&a, &b, &labels)?);
    }
    for (h, name) in HORIZONS.iter().enumerate() {
        let sub = horizon_subset(&preds, h, mode);
        let (s, l): (Vec<f64>, Vec<u8>) = sub.iter().map(|p| (p.score, p.label)).unzip();
        if l.contains(&0) && l.contains(&1) {
            write_roc(&roc_points(&s, &l)?, run.out.join(format!("roc_{name}.csv")))?;
        }
    }
    write_json(&run.out.join("report.json"), &report)?;
    print_ignoring_pipe(&serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn time_forward(repeats: usize, mut f: impl FnMut() -> seqrisk::Result<Tensor>) -> Result<f64> {
    let t0 = Instant::now();
    for _ in 0..repeats.max(1) {
        std::hint::black_box(f()?);
    }
    Ok(t0.elapsed().as_secs_f64() * 1e3 / repeats.max(1) as f64)
}

pub fn bench_attention(ns: &[usize], c: usize, cb: usize, repeats: usize, out: Option<&Path>) -> Result<()> {
    use rand::{Rng, SeedableRng};
    let cfg = ShiftConfig { c_b: cb, ..ShiftConfig::new(c) };
    cfg.validate().map_err(|e| Invalid(e.to_string()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let shift = cfg.init(&mut rng)?;
    let nonlocal = nonlocal_init(c, cb, &mut rng)?;
    let mut rows = Vec::new();
    println!("{:<10} {:>8} {:>10} {:>16} {:>12}", "kernel", "n", "params", "macs", "ms");
    for &n in ns {
        let x = Tensor::from_fn(&[n, c], |_| rng.gen_range(-1.0..1.0));
        for kind in [AttentionKind::Shift, AttentionKind::NonLocal] {
            let ms = match kind {
                AttentionKind::Shift => Some(time_forward(repeats, || shift_forward(&x, &cfg, &shift).map(|r| r.0))?),
                AttentionKind::NonLocal if n <= DEFAULT_NONLOCAL_CAP => {
                    Some(time_forward(repeats, || nonlocal_forward(&x, &nonlocal, DEFAULT_NONLOCAL_CAP))?)
                }
                AttentionKind::NonLocal => None,
            };
            let name = match kind {
                AttentionKind::Shift => "shift",
                AttentionKind::NonLocal => "nonlocal",
            };
            let (p, m) = (count_params(kind, c, cb), count_macs(kind, c, cb, n));
            let shown = ms.map_or("over cap".to_string(), |v| format!("{v:.3}"));
            println!("{name:<10} {n:>8} {p:>10} {m:>16} {shown:>12}");
            rows.push([name.to_string(), n.to_string(), p.to_string(), m.to_string(), ms.map_or(String::new(), |v| v.to_string())]);
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("bench.csv"))?;
        w.write_record(["kernel", "n", "params", "macs", "ms"])?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Nearest-neighbour upsampling of one attention frame blended with the
/// input frame, scaled to 8 bits.
fn overlay(frame: &Image, weights: &[f64], h: usize, w: usize) -> Image {
    let (lo, hi) = frame.pixels().iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let peak = weights.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let (fh, fw) = (frame.height(), frame.width());
    Image::from_fn(fh, fw, |y, x| {
        let a = weights[(y * h / fh) * w + x * w / fw] / peak;
        255.0 * (0.5 * (frame.get(y, x) - lo) / span + 0.5 * a)
    })
}

pub fn export_attention(
    run: &RunArgs,
    data: &DataArgs,
    model_dir: &Path,
    patient: Option<&str>,
    k: usize,
    which: &str,
    split_seed: Option<u64>,
) -> Result<()> {
    if which != "alpha" && which != "beta" {
        bail!(Invalid(format!("--weights must be alpha or beta, not {which:?}")));
    }
    let model = RiskModel::load(model_dir)?;
    let cfg = resolved(run, |c| {
        c.split_seed = split_seed.unwrap_or(c.split_seed);
        c.model = model.config().clone();
    })?;
    let prepared = load_prepared(data, &cfg)?;
    let all: Vec<_> = prepared.train.iter().chain(&prepared.test).collect();
    let sample = match patient {
        Some(id) => all.iter().find(|s| s.id == id).ok_or_else(|| Invalid(format!("no patient {id:?}")))?,
        None => all.first().ok_or_else(|| Invalid("empty cohort".into()))?,
    };
    let Some((states, (t, h, w))) = model.attention_maps(sample)? else {
        bail!(Invalid("model has no linear attention block (set shift_layer)".into()));
    };
    let mut csvw = csv::Writer::from_path(run.out.join("attention_points.csv"))?;
    csvw.write_record(["patient_id", "view", "rank", "t", "y", "x", "weight"])?;
    for view in View::ALL {
        let st = &states[view.index()];
        let weights = if which == "alpha" { &st.alpha } else { &st.beta };
        for (rank, p) in top_attention_points(weights, k, (t, h, w))?.iter().enumerate() {
            csvw.write_record([
                sample.id.clone(),
                view.to_string(),
                rank.to_string(),
                p.t.to_string(),
                p.y.to_string(),
                p.x.to_string(),
                format!("{:e}", p.weight),
            ])?;
        }
        let video = &sample.videos[view.index()];
        let (frames, fh, fw) = (video.shape()[1], video.shape()[2], video.shape()[3]);
        for f in 0..frames {
            let px = &video.data()[f * fh * fw..(f + 1) * fh * fw];
            let frame = Image::new(fh, fw, px.to_vec())?;
            let tt = f * t / frames;
            let heat = overlay(&frame, &weights[tt * h * w..(tt + 1) * h * w], h, w);
            write_pgm(run.out.join(format!("{}_{view}_frame{f}.pgm", sample.id)), &heat, 255)?;
        }
    }
    csvw.flush()?;
    println!("{}", run.out.join("attention_points.csv").display());
    Ok(())
}

pub fn grad_check(seed: u64, end_to_end: bool, out: Option<&Path>) -> Result<()> {
    let mut results: Vec<(String, f64, f64)> =
        grad_check_suite(seed)?.into_iter().map(|r| (r.name, r.max_rel_error, 1e-6)).collect();
    if end_to_end {
        for (r, tol) in end_to_end_checks(seed)?.into_iter().zip([1e-5, 1e-4]) {
            results.push((r.name, r.max_rel_error, tol));
        }
    }
    let mut failed = 0;
    for (name, err, tol) in &results {
        let ok = err < tol;
        failed += !ok as usize;
        println!("{:<4} {name:<28} {err:.3e} (< {tol:e})", if ok { "ok" } else { "FAIL" });
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let rows: Vec<_> = results.iter().map(|(n, e, t)| json!({"name": n, "max_rel_error": e, "tolerance": t})).collect();
        write_json(&dir.join("grad_check.json"), &rows)?;
    }
    if failed > 0 {
        bail!("{failed} gradient checks above tolerance");
    }
    Ok(())
}

pub fn describe(data: &Path, out: Option<&Path>) -> Result<()> {
    let s = summarize(&Manifest::load(data)?)?;
    print_ignoring_pipe(&serde_json::to_string_pretty(&s)?);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("summary.json"), &s)?;
    }
    Ok(())
}
