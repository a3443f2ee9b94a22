mod common;

use common::{rng, toy};
use rand::Rng;
use seqrisk::head::{asymmetry, combine_average, combine_gated, combine_scaled, per_view_scores, GateState, ViewLogits};
use seqrisk::model::RiskModel;
use seqrisk::training::{train, LabelSource, TrainConfig};

fn random_logits(r: &mut impl Rng) -> ViewLogits {
    ViewLogits::new([0; 4].map(|_| r.gen_range(-6.0..6.0)))
}

#[test]
fn equal_scales_reduce_to_average() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let v = random_logits(&mut r);
        let init = r.gen_range(0.1..1.5);
        let g = GateState::new(init, init - 0.05).unwrap();
        assert!((combine_gated(&v, &g).unwrap() - combine_average(&v)).abs() < 1e-12);
    }
}

#[test]
fn positive_rescaling_leaves_output_unchanged() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let v = random_logits(&mut r);
        let (wt, ws) = (r.gen_range(0.05..2.0), r.gen_range(0.05..2.0));
        let c = r.gen_range(0.01..100.0);
        let a = combine_scaled(&v, wt, ws).unwrap();
        let b = combine_scaled(&v, c * wt, c * ws).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn gate_examples() {
    let g = GateState::from_scales(0.6, 0.4, 0.4).unwrap();
    let y = combine_gated(&ViewLogits::new([2.0, 2.0, 0.0, 0.0]), &g).unwrap();
    assert!((y - 1.0 / (1.0 + (-1.2f64).exp())).abs() < 1e-12);
    assert!((y - 0.76852).abs() < 1e-5);
    let one = GateState::from_scales(1.0, 1.0, 0.5).unwrap();
    let y = combine_gated(&ViewLogits::new([1.0; 4]), &one).unwrap();
    assert!((y - 0.73106).abs() < 1e-5);
}

#[test]
fn asymmetry_range_and_symmetry() {
    let mut r = rng(3);
    for _ in 0..100_000 {
        let v = random_logits(&mut r);
        let s = per_view_scores(&v);
        let g = asymmetry(s);
        assert!((0.0..=2.0).contains(&g));
        // LCC, RCC, LMLO, RMLO: swap the breasts
        assert_eq!(g, asymmetry([s[1], s[0], s[3], s[2]]));
    }
    assert_eq!(asymmetry([0.5; 4]), 0.0);
    assert!((asymmetry([0.9, 0.2, 0.8, 0.3]) - 1.2).abs() < 1e-12);
}

#[test]
fn fixed_gate_weight_survives_training() {
    let mut r = rng(4);
    let data = toy::samples(12, 1.0, &mut r);
    let mut model = RiskModel::build(toy::model_config(), 7).unwrap();
    let before = model.params().clone();
    let cfg = TrainConfig {
        batch_patients: 6,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &data, &cfg, 5, LabelSource::Hard, |_, _| {}).unwrap();
    assert_eq!(report.steps, 10);
    let p = model.params();
    assert_eq!(p.get("head.gate.w_f").unwrap(), before.get("head.gate.w_f").unwrap());
    assert_ne!(p.get("head.gate.theta_t").unwrap(), before.get("head.gate.theta_t").unwrap());
    assert_ne!(p.get("head.gate.theta_s").unwrap(), before.get("head.gate.theta_s").unwrap());
}
