use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use fbia::edge_detection::{
    benjamini_yekutieli_adjust, fit_two_group, multiple_test, reject_by_mean_lfdr, EmSettings, TestMethod,
};
use fbia::evaluation::confusion;
use fbia::pipeline::{fbia_fit, FitConfig};
use fbia::simgen::{simulate, GraphKind, Lineage, SimSettings, SimulationSpec};
use fbia::special::normal_upper_quantile;

fn draws(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| shift + Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

fn rejected(v: &[bool]) -> BTreeSet<usize> {
    v.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| i).collect()
}

#[test]
fn zero_scores_reject_nothing() {
    let z = vec![0.0f64; 500];
    for method in [TestMethod::EmpiricalBayes, TestMethod::BenjaminiYekutieli] {
        for alpha in [0.01, 0.2, 0.9] {
            assert_eq!(multiple_test(&z, alpha, method).unwrap().rejections(), 0);
        }
    }
}

#[test]
fn empirical_bayes_finds_shifted_items() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = draws(1000, 0.0, &mut rng);
        z.extend(draws(50, 6.0, &mut rng));
        let res = multiple_test(&z, 0.05, TestMethod::EmpiricalBayes).unwrap();
        assert_eq!(res.method, TestMethod::EmpiricalBayes, "seed {seed} fell back");
        let hits = res.rejected[1000..].iter().filter(|&&r| r).count();
        let false_hits = res.rejected[..1000].iter().filter(|&&r| r).count();
        assert!(hits >= 45, "seed {seed}: {hits}");
        assert!(false_hits <= 5, "seed {seed}: {false_hits}");
    }
}

#[test]
fn by_step_up_reference() {
    let adj = benjamini_yekutieli_adjust(&[0.001, 0.5, 0.9]);
    let keep: Vec<bool> = adj.iter().map(|&a| a <= 0.05).collect();
    assert_eq!(keep, vec![true, false, false]);
    // 0.001 · 3 · (1 + 1/2 + 1/3)
    assert!((adj[0] - 0.0055).abs() < 1e-15);

    let z: Vec<f64> = [0.001, 0.5, 0.9].iter().map(|&p| normal_upper_quantile(p / 2.0)).collect();
    let res = multiple_test(&z, 0.05, TestMethod::BenjaminiYekutieli).unwrap();
    assert_eq!(res.rejected, vec![true, false, false]);
}

#[test]
fn mean_lfdr_rule_keeps_ties_together() {
    assert_eq!(reject_by_mean_lfdr(&[0.01, 0.5, 0.02, 0.9], 0.05), vec![true, false, true, false]);
    assert_eq!(reject_by_mean_lfdr(&[0.04, 0.08, 0.08], 0.06), vec![true, false, false]);
    assert_eq!(reject_by_mean_lfdr(&[0.2, 0.3], 0.1), vec![false, false]);
}

#[test]
fn lfdr_peaks_at_the_null_center() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut z = draws(2000, 0.0, &mut rng);
    z.extend(draws(100, 5.0, &mut rng));
    z.extend(draws(100, -5.0, &mut rng));
    let fit = fit_two_group(&z, &EmSettings::default()).expect("fit");
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in -800..=800 {
        let x = i as f64 / 100.0;
        let v = fit.lfdr(x);
        assert!((0.0..=1.0).contains(&v));
        if v > best.0 {
            best = (v, x);
        }
    }
    assert!((best.1 - fit.null_mean).abs() <= 0.5, "peak at {} vs center {}", best.1, fit.null_mean);
    assert!(fit.lfdr(7.0) < 0.01);
    assert!(fit.lfdr(1e3).is_finite() && fit.lfdr(-1e3).is_finite());
}

#[test]
fn free_null_fit_is_still_available() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut z = draws(1000, 0.0, &mut rng);
    z.extend(draws(100, 6.0, &mut rng));
    let settings = EmSettings {
        robust_null: false,
        ..EmSettings::default()
    };
    let fit = fit_two_group(&z, &settings).expect("fit");
    assert!(fit.null_mean.abs() < 0.2 && (fit.null_sd - 1.0).abs() < 0.2);
    assert!((fit.null_weight - 1000.0 / 1100.0).abs() < 0.05);
}

#[test]
fn ar2_detection_is_precise() {
    let spec = SimulationSpec {
        kind: GraphKind::Ar2,
        p: 50,
        n: 500,
        k: 4,
        lineage: Lineage::Temporal,
        frac: 0.05,
        seed: 31,
        settings: SimSettings::default(),
    };
    let rep = simulate(&spec).unwrap();
    let fit = fbia_fit(&rep.dataset, &FitConfig::default()).unwrap();
    let c = confusion(&fit.graph.edge_sets(), &rep.family.truth_edges, 50).unwrap();
    assert!(c.cumulated.precision() >= 0.9, "{:?}", c.cumulated);
    assert!(c.cumulated.recall() > 0.5, "{:?}", c.cumulated);
}

#[test]
fn noise_only_fit_is_sparse() {
    let spec = SimulationSpec {
        kind: GraphKind::Ar2,
        p: 30,
        n: 200,
        k: 3,
        lineage: Lineage::Temporal,
        frac: 0.0,
        seed: 0,
        settings: SimSettings::default(),
    };
    // Replace the data with independent noise of the same shape.
    let rep = simulate(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let blocks = rep
        .dataset
        .conditions()
        .iter()
        .map(|b| {
            let data = b.data.mapv(|_| StandardNormal.sample(&mut rng));
            fbia::ConditionBlock::new(b.label.clone(), data)
        })
        .collect();
    let ds = fbia::ConditionedDataset::new(rep.dataset.variable_names().to_vec(), blocks).unwrap();
    let fit = fbia_fit(&ds, &FitConfig::default()).unwrap();
    for d in fit.graph.densities() {
        assert!(d < 0.01, "density {d}");
    }
}

#[test]
fn by_edge_sets_are_nested_in_alpha() {
    let spec = SimulationSpec {
        kind: GraphKind::Ar2,
        p: 30,
        n: 120,
        k: 3,
        lineage: Lineage::Temporal,
        frac: 0.05,
        seed: 5,
        settings: SimSettings::default(),
    };
    let rep = simulate(&spec).unwrap();
    let fit_at = |alpha2: f64| {
        let cfg = FitConfig {
            alpha2,
            test_method: TestMethod::BenjaminiYekutieli,
            ..FitConfig::default()
        };
        fbia_fit(&rep.dataset, &cfg).unwrap().graph.edge_sets()
    };
    let (tight, loose) = (fit_at(0.01), fit_at(0.10));
    for (a, b) in tight.iter().zip(&loose) {
        assert!(a.is_subset(b));
    }
    assert!(loose.iter().map(|s| s.len()).sum::<usize>() > 0);
}

fn mixture(seed: u64, n: usize, frac: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = (n as f64 * frac) as usize;
    let mut z = draws(n - signal, 0.0, &mut rng);
    z.extend(draws(signal, 4.0, &mut rng));
    z
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn by_is_monotone_in_alpha(seed in any::<u64>(), a in 0.001f64..0.5, b in 0.001f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let z = mixture(seed, 400, 0.1);
        let small = rejected(&multiple_test(&z, lo, TestMethod::BenjaminiYekutieli).unwrap().rejected);
        let large = rejected(&multiple_test(&z, hi, TestMethod::BenjaminiYekutieli).unwrap().rejected);
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn decisions_ignore_a_global_sign_flip(seed in any::<u64>(), frac in 0.0f64..0.2) {
        let z = mixture(seed, 400, frac);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        for method in [TestMethod::BenjaminiYekutieli, TestMethod::EmpiricalBayes] {
            let a = multiple_test(&z, 0.05, method).unwrap();
            let b = multiple_test(&neg, 0.05, method).unwrap();
            prop_assert_eq!(rejected(&a.rejected), rejected(&b.rejected), "{}", method);
        }
    }

    #[test]
    fn lfdr_stays_in_unit_interval(seed in any::<u64>(), frac in 0.0f64..0.3) {
        let z = mixture(seed, 300, frac);
        let res = multiple_test(&z, 0.1, TestMethod::EmpiricalBayes).unwrap();
        prop_assert!(res.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
