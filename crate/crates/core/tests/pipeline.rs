use std::collections::BTreeSet;

use fbia::edge_detection::TestMethod;
use fbia::pipeline::{
    alpha_sweep_points, edge_changes, fbia_fit, fit_with_cache, separated_fit, two_step_integration, write_fit_outputs,
    FitConfig, OutputOptions,
};
use fbia::simgen::{simulate, GraphKind, Lineage, Replicate, SimSettings, SimulationSpec};
use fbia::{ConditionedDataset, FbiaError};

fn replicate(k: usize, seed: u64) -> Replicate {
    simulate(&SimulationSpec {
        kind: GraphKind::Ar2,
        p: 25,
        n: 150,
        k,
        lineage: Lineage::Temporal,
        frac: 0.05,
        seed,
        settings: SimSettings::default(),
    })
    .unwrap()
}

#[test]
fn single_condition_is_the_separated_analysis() {
    let rep = replicate(1, 4);
    let cfg = FitConfig::default();
    let joint = fbia_fit(&rep.dataset, &cfg).unwrap();
    let alone = separated_fit(&rep.dataset, &cfg).unwrap();
    assert_eq!(joint.psi.scores, alone.psi.scores);
    assert_eq!(joint.integrated.scores, joint.psi.scores);
    assert_eq!(joint.graph.edge_sets(), alone.graph.edge_sets());
    assert!(joint.diagnostics.enumeration);
}

#[test]
fn reruns_write_identical_files() {
    let rep = replicate(3, 8);
    let cfg = FitConfig::default();
    let opts = OutputOptions {
        screening_debug: true,
        posterior_dumps: 3,
        hubs: 5,
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = write_fit_outputs(a.path(), &fbia_fit(&rep.dataset, &cfg).unwrap(), &cfg, &opts).unwrap();
    let fb = write_fit_outputs(b.path(), &fbia_fit(&rep.dataset, &cfg).unwrap(), &cfg, &opts).unwrap();
    assert_eq!(fa, fb);
    for f in ["psi_scores.csv", "edges/cond_3.csv", "diagnostics.json", "posteriors.json"] {
        assert!(fa.iter().any(|p| p.to_str() == Some(f)), "{f} missing");
    }
    for f in &fa {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f:?}");
    }
}

#[test]
fn changes_partition_consecutive_edge_sets() {
    let rep = replicate(4, 2);
    let fit = fbia_fit(&rep.dataset, &FitConfig::default()).unwrap();
    let sets = fit.graph.edge_sets();
    let changes = edge_changes(&fit.graph);
    assert_eq!(changes.len(), 3);
    for (k, c) in changes.iter().enumerate() {
        let new: BTreeSet<_> = c.new.iter().copied().collect();
        let kept: BTreeSet<_> = c.persisting.iter().copied().collect();
        let gone: BTreeSet<_> = c.disappearing.iter().copied().collect();
        assert!(new.is_disjoint(&kept));
        assert_eq!(&new.union(&kept).copied().collect::<BTreeSet<_>>(), &sets[k + 1]);
        assert!(gone.is_subset(&sets[k]));
        assert!(gone.is_disjoint(&sets[k + 1]));
        assert_eq!(c.from, fit.graph.conditions[k].label);
    }
}

#[test]
fn cache_is_reused_and_keyed_on_settings() {
    let rep = replicate(3, 5);
    let dir = tempfile::tempdir().unwrap();
    let cfg = FitConfig::default();
    let first = fit_with_cache(&rep.dataset, &cfg, Some(dir.path())).unwrap();
    assert!(!first.diagnostics.psi_cache_hit && !first.diagnostics.integration_cache_hit);
    let second = fit_with_cache(&rep.dataset, &cfg, Some(dir.path())).unwrap();
    assert!(second.diagnostics.psi_cache_hit && second.diagnostics.integration_cache_hit);
    assert_eq!(first.integrated.scores, second.integrated.scores);
    assert_eq!(first.graph.edge_sets(), second.graph.edge_sets());

    // Detection settings sit downstream of both caches.
    let by = FitConfig {
        test_method: TestMethod::BenjaminiYekutieli,
        ..cfg.clone()
    };
    let third = fit_with_cache(&rep.dataset, &by, Some(dir.path())).unwrap();
    assert!(third.diagnostics.psi_cache_hit && third.diagnostics.integration_cache_hit);

    let mut other = cfg.clone();
    other.integration.seed ^= 1;
    let fourth = fit_with_cache(&rep.dataset, &other, Some(dir.path())).unwrap();
    assert!(fourth.diagnostics.psi_cache_hit && !fourth.diagnostics.integration_cache_hit);
}

fn subset(ds: &ConditionedDataset, keep: &[usize]) -> ConditionedDataset {
    let blocks = keep.iter().map(|&k| ds.condition(k).clone()).collect();
    ConditionedDataset::new(ds.variable_names().to_vec(), blocks).unwrap()
}

#[test]
fn two_step_amplifies_shared_edges() {
    let rep = replicate(3, 11);
    let cfg = FitConfig::default();
    let out = two_step_integration([&rep.dataset, &rep.dataset], ["a", "b"], &cfg).unwrap();
    assert_eq!(out.stage2.scores.ncols(), 6);
    assert_eq!(out.graph.k(), 6);
    assert_eq!(out.graph.conditions[4].label, format!("b:{}", rep.dataset.condition(1).label));
    let l = out.stage1[0].edge_index.index(0, 1);
    assert!(rep.family.truth_edges.iter().all(|t| t.contains(&(0, 1))), "fixture changed");
    for t in 0..3 {
        let s1 = out.stage1[0].scores[[l, t]].abs();
        assert!(out.stage2.scores[[l, t]].abs() >= s1 - 1e-9, "t = {t}");
    }

    let short = subset(&rep.dataset, &[0, 1]);
    assert!(matches!(
        two_step_integration([&rep.dataset, &short], ["a", "b"], &cfg),
        Err(FbiaError::Shape(_))
    ));
}

#[test]
fn alpha_sweep_is_ordered_by_level() {
    let rep = replicate(3, 6);
    let fit = fbia_fit(&rep.dataset, &FitConfig::default()).unwrap();
    let pts = alpha_sweep_points(
        &fit.integrated,
        &rep.family.truth_edges,
        &[0.2, 0.001, 0.05],
        TestMethod::BenjaminiYekutieli,
    )
    .unwrap();
    assert!(!pts.is_empty());
    for w in pts.windows(2) {
        assert!(w[0].threshold < w[1].threshold);
        assert!(w[1].recall >= w[0].recall);
    }
}
