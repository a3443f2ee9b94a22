mod common;

use common::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use seqrisk::evaluation::{
    auc, auc_of, bootstrap_ci, delong_test, evaluate, horizon_aucs, horizon_subset, ks_uniform, read_predictions,
    roc_points, split, trapezoid_area, write_predictions, HorizonMode, Prediction,
};

fn pred(id: &str, score: f64, category: u8) -> Prediction {
    Prediction {
        patient_id: id.into(),
        score,
        label: (category > 0) as u8,
        category,
    }
}

/// Labels with roughly `frac` positives and scores shifted up by `shift` for
/// positives.
fn dataset(n: usize, frac: f64, shift: f64, r: &mut impl Rng) -> (Vec<f64>, Vec<u8>) {
    let noise = Normal::new(0.0, 1.0).unwrap();
    loop {
        let labels: Vec<u8> = (0..n).map(|_| r.gen_bool(frac) as u8).collect();
        if labels.contains(&0) && labels.contains(&1) {
            let scores = labels.iter().map(|&l| noise.sample(r) + shift * l as f64).collect();
            return (scores, labels);
        }
    }
}

#[test]
fn auc_hand_examples() {
    assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
    assert_eq!(auc(&[0.1, 0.2, 0.7, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(auc(&[0.3; 5], &[0, 1, 0, 1, 1]).unwrap(), 0.5);
    assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
}

#[test]
fn auc_is_rank_based() {
    let mut r = rng(1);
    let (s, l) = dataset(80, 0.3, 0.7, &mut r);
    let a = auc(&s, &l).unwrap();
    let warped: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() + 1.0).collect();
    assert_eq!(auc(&warped, &l).unwrap(), a);
    let flipped: Vec<f64> = s.iter().map(|x| -x).collect();
    assert!((auc(&flipped, &l).unwrap() - (1.0 - a)).abs() < 1e-12);
}

#[test]
fn roc_area_equals_mann_whitney() {
    let mut r = rng(2);
    for _ in 0..50 {
        let (mut s, l) = dataset(60, 0.4, 0.5, &mut r);
        // coarse scores force ties
        for x in &mut s {
            *x = (*x * 4.0).round() / 4.0;
        }
        let pts = roc_points(&s, &l).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert!(pts.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        assert!((trapezoid_area(&pts) - auc(&s, &l).unwrap()).abs() < 1e-12);
    }
    let pts = roc_points(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
    assert_eq!(pts, vec![(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]);
}

#[test]
fn delong_conventions() {
    let mut r = rng(3);
    let (s, l) = dataset(100, 0.3, 0.5, &mut r);
    let d = delong_test(&s, &s, &l).unwrap();
    assert_eq!((d.z, d.p_value), (0.0, 1.0));

    let (b, _) = dataset(100, 0.3, 0.0, &mut r);
    let ab = delong_test(&s, &b, &l).unwrap();
    let ba = delong_test(&b, &s, &l).unwrap();
    assert_eq!(ab.z, -ba.z);
    assert_eq!(ab.p_value, ba.p_value);
    assert!(delong_test(&s, &b, &[0; 100]).is_err());
}

#[test]
fn delong_separates_perfect_from_random() {
    let mut r = rng(4);
    let labels: Vec<u8> = (0..500).map(|i| (i % 5 == 0) as u8).collect();
    let perfect: Vec<f64> = labels.iter().map(|&l| l as f64 + r.gen_range(0.0..0.5)).collect();
    let random: Vec<f64> = (0..500).map(|_| r.gen()).collect();
    let d = delong_test(&perfect, &random, &labels).unwrap();
    assert_eq!(d.auc_a, 1.0);
    assert!(d.p_value < 0.01, "{d:?}");
}

#[test]
fn delong_null_p_values_look_uniform() {
    let mut r = rng(5);
    let p: Vec<f64> = (0..200)
        .map(|_| {
            let (a, l) = dataset(60, 0.5, 0.0, &mut r);
            let b: Vec<f64> = (0..60).map(|_| r.gen()).collect();
            let d = delong_test(&a, &b, &l).unwrap();
            assert!((0.0..=1.0).contains(&d.p_value));
            d.p_value
        })
        .collect();
    let (_, ks_p) = ks_uniform(&p).unwrap();
    assert!(ks_p > 0.01, "KS p {ks_p}");
}

#[test]
fn bootstrap_interval_contains_estimate() {
    let mut r = rng(6);
    for i in 0..100 {
        let (s, l) = dataset(r.gen_range(20..80), 0.3, r.gen_range(0.0..1.5), &mut r);
        let a = auc(&s, &l).unwrap();
        let (lo, hi) = bootstrap_ci(&s, &l, 1000, 0.05, i).unwrap();
        assert!(lo <= a && a <= hi, "dataset {i}: {a} outside [{lo}, {hi}]");
    }
}

#[test]
fn bootstrap_edge_cases_and_width() {
    let s: Vec<f64> = (0..40).map(|i| if i < 10 { 100.0 + i as f64 } else { i as f64 * 0.01 }).collect();
    let l: Vec<u8> = (0..40).map(|i| (i < 10) as u8).collect();
    assert_eq!(bootstrap_ci(&s, &l, 500, 0.05, 1).unwrap(), (1.0, 1.0));

    let mut r = rng(7);
    let (s40, l40) = dataset(40, 0.3, 1.0, &mut r);
    let (s400, l400) = dataset(400, 0.3, 1.0, &mut r);
    let w = |s: &[f64], l: &[u8]| {
        let (lo, hi) = bootstrap_ci(s, l, 1000, 0.05, 2).unwrap();
        hi - lo
    };
    assert!(w(&s400, &l400) < w(&s40, &l40));
    assert_eq!(bootstrap_ci(&s40, &l40, 300, 0.05, 9).unwrap(), bootstrap_ci(&s40, &l40, 300, 0.05, 9).unwrap());
}

fn six_patients() -> Vec<Prediction> {
    vec![
        pred("c0", 0.30, 0),
        pred("c1", 0.60, 0),
        pred("k1", 0.50, 1),
        pred("k2", 0.70, 2),
        pred("k3", 0.20, 3),
        pred("k3b", 0.65, 3),
    ]
}

fn brute(preds: &[Prediction], cats: &[u8]) -> f64 {
    let pos: Vec<f64> = preds.iter().filter(|p| cats.contains(&p.category)).map(|p| p.score).collect();
    let neg: Vec<f64> = preds.iter().filter(|p| p.category == 0).map(|p| p.score).collect();
    let mut s = 0.0;
    for a in &pos {
        for b in &neg {
            s += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

#[test]
fn horizon_example_by_pair_counting() {
    let p = six_patients();
    let h = horizon_aucs(&p, HorizonMode::Cumulative).unwrap();
    assert_eq!(h[0], Some(brute(&p, &[1])));
    assert_eq!(h[1], Some(brute(&p, &[1, 2])));
    assert_eq!(h[2], Some(brute(&p, &[1, 2, 3])));
    let e = horizon_aucs(&p, HorizonMode::Exclusive).unwrap();
    assert_eq!(e[1], Some(brute(&p, &[2])));
    assert_eq!(e[2], Some(brute(&p, &[3])));

    for w in 0..2 {
        let small: Vec<String> = horizon_subset(&p, w, HorizonMode::Cumulative).into_iter().map(|x| x.patient_id).collect();
        let big: Vec<String> = horizon_subset(&p, w + 1, HorizonMode::Cumulative).into_iter().map(|x| x.patient_id).collect();
        assert!(small.iter().all(|id| big.contains(id)));
    }

    let mut more = p.clone();
    more.push(pred("c2", 0.01, 0));
    let m = horizon_aucs(&more, HorizonMode::Cumulative).unwrap();
    for i in 0..3 {
        assert!(m[i].unwrap() > h[i].unwrap());
    }
}

#[test]
fn horizons_coincide_and_go_missing() {
    let p = vec![pred("a", 0.1, 0), pred("b", 0.4, 0), pred("c", 0.3, 1), pred("d", 0.9, 1)];
    let h = horizon_aucs(&p, HorizonMode::Cumulative).unwrap();
    assert!(h[0] == h[1] && h[1] == h[2]);
    let e = horizon_aucs(&p, HorizonMode::Exclusive).unwrap();
    assert_eq!(e[1], None);
}

#[test]
fn split_contract() {
    let ids: Vec<(String, u8)> = (0..100).map(|i| (format!("p{i}"), (i % 10 == 0) as u8)).collect();
    let plan = split(&ids, 3).unwrap();
    assert_eq!(plan.test.len(), 20);
    let cases_in = |v: &[String]| v.iter().filter(|id| ids.iter().any(|(i, l)| i == *id && *l == 1)).count();
    assert_eq!(cases_in(&plan.test), 2);
    let mut all: Vec<String> = plan.test.iter().chain(plan.folds.iter().flatten()).cloned().collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 100);
    for f in &plan.folds {
        assert_eq!(f.len(), 16);
        let c = cases_in(f) as f64;
        assert!((c - 8.0 * 16.0 / 80.0).abs() <= 1.0);
    }
    assert_eq!(plan, split(&ids, 3).unwrap());
    assert_ne!(plan, split(&ids, 4).unwrap());
    assert!(split(&ids[..9], 1).is_err());
}

#[test]
fn report_and_prediction_files() {
    let p: Vec<Prediction> = (0..30).map(|i| pred(&format!("p{i}"), if i < 10 { 0.9 } else { 0.1 }, (i < 10) as u8 * (1 + i % 3) as u8)).collect();
    let r = evaluate(&p, HorizonMode::Cumulative, 200, 0).unwrap();
    for h in [&r.auc_1y, &r.auc_2y, &r.auc_gt2y] {
        assert_eq!(h.as_ref().unwrap().auc, 1.0);
    }
    assert_eq!(r.overall_auc, auc_of(&p).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("preds.csv");
    write_predictions(&p, &f).unwrap();
    assert_eq!(read_predictions(&f).unwrap(), p);
}
