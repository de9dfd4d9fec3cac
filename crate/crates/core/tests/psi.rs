use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use fbia::data_ingest::{standardize, ConditionBlock, ConditionedDataset, Covariates};
use fbia::psi_scores::{
    adjusted_psi_score, compute_psi_matrix, partial_correlation, psi_score, separator, AdjustedScoreForm, PsiOptions,
};
use fbia::scalar::CORRELATION_CLAMP;
use fbia::screening::{
    correlation_matrix, fisher_z, screen_condition, CorrelationSummary, ReducedNeighborhoods, ScreeningConfig,
};
use fbia::simgen::{simulate, GraphKind, Lineage, SimSettings, SimulationSpec};

fn gaussian(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(rng))
}

fn mixed(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = gaussian(n, p, &mut rng);
    let mix = Array2::from_shape_fn((p, p), |(a, b)| {
        if a == b {
            1.0
        } else {
            let v: f64 = StandardNormal.sample(&mut rng);
            0.5 * v
        }
    });
    z.dot(&mix)
}

fn residuals(x: &DMatrix<f64>, target: usize, s: &[usize]) -> DVector<f64> {
    let design = DMatrix::from_fn(x.nrows(), s.len() + 1, |r, c| if c == 0 { 1.0 } else { x[(r, s[c - 1])] });
    let y = x.column(target).into_owned();
    let beta = design.clone().svd(true, true).solve(&y, 1e-14).unwrap();
    y - design * beta
}

fn residual_oracle(data: &Array2<f64>, i: usize, j: usize, s: &[usize]) -> f64 {
    let x = DMatrix::from_fn(data.nrows(), data.ncols(), |r, c| data[[r, c]]);
    let ri = residuals(&x, i, s);
    let rj = residuals(&x, j, s);
    ri.dot(&rj) / (ri.norm() * rj.norm())
}

fn summary(p: usize, n: usize) -> CorrelationSummary<f64> {
    CorrelationSummary {
        condition_index: 0,
        corr: Array2::eye(p),
        n,
    }
}

#[test]
fn separator_is_union_of_neighborhoods() {
    let rn = ReducedNeighborhoods {
        condition_index: 0,
        neighbors: vec![vec![1, 2], vec![0, 3], vec![0], vec![1], vec![]],
        cap_used: 5,
    };
    assert_eq!(separator(0, 1, &rn, &summary(5, 50)), vec![2, 3]);
    assert!(separator(2, 4, &rn, &summary(5, 50)).contains(&0));
    assert!(separator(3, 4, &rn, &summary(5, 50)).contains(&1));
    let empty = ReducedNeighborhoods {
        condition_index: 0,
        neighbors: vec![vec![]; 5],
        cap_used: 5,
    };
    assert!(separator(0, 4, &empty, &summary(5, 50)).is_empty());
}

#[test]
fn oversized_separator_drops_weakest() {
    // n = 7 allows three separator members; the union has four.
    let mut cs = summary(6, 7);
    for (m, r) in [(2, 0.9), (3, 0.2), (4, 0.5), (5, 0.7)] {
        cs.corr[[0, m]] = r;
        cs.corr[[m, 0]] = r;
    }
    let rn = ReducedNeighborhoods {
        condition_index: 0,
        neighbors: vec![vec![2, 3, 4], vec![5], vec![], vec![], vec![], vec![]],
        cap_used: 3,
    };
    assert_eq!(separator(0, 1, &rn, &cs), vec![2, 4, 5]);
}

#[test]
fn empty_separator_is_pearson() {
    let data = mixed(60, 4, 1);
    let r = correlation_matrix(&data);
    let block = ConditionBlock::new("c", data);
    let pc = partial_correlation(&block, 0, 3, &[]).unwrap();
    assert!((pc - r[[0, 3]]).abs() < 1e-12);
}

#[test]
fn exact_sum_gives_unit_partial_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = gaussian(40, 2, &mut rng);
    let mut data = Array2::zeros((40, 3));
    data.column_mut(0).assign(&base.column(0));
    data.column_mut(2).assign(&base.column(1));
    let y = &base.column(0) + &base.column(1);
    data.column_mut(1).assign(&y);
    let block = ConditionBlock::new("c", data.clone());
    let pc = partial_correlation(&block, 0, 1, &[2]).unwrap();
    assert!((pc.abs() - 1.0).abs() < 1e-7, "{pc}");
    assert!(pc.abs() <= CORRELATION_CLAMP);
    assert!((residual_oracle(&data, 0, 1, &[2]) - 1.0).abs() < 1e-10);
}

#[test]
fn score_reference_values() {
    assert_eq!(psi_score(0.0f64, 100, 5), 0.0);
    // sqrt(92)/2 * ln 3 to 40 digits.
    assert!((psi_score(0.5f64, 100, 5) - 5.268_759_445_893_253_7).abs() < 1e-12);
    assert_eq!(psi_score(-0.5f64, 100, 5), -psi_score(0.5f64, 100, 5));
    assert!((psi_score(0.5f32, 100, 5) - 5.268_759_4).abs() < 1e-4);
}

#[test]
fn adjusted_score_matches_fisher_without_covariates() {
    // For moderate correlations the t-test and Fisher z agree to within a few percent.
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 200;
        let z = gaussian(n, 2, &mut rng);
        let mut data = z.clone();
        let c0 = z.column(0).to_owned();
        data.column_mut(1).scaled_add(0.3, &c0);
        let block = ConditionBlock::new("c", data.clone());
        let score = adjusted_psi_score(&block, 0, 1, &[], AdjustedScoreForm::Signed).unwrap();
        let r = correlation_matrix(&data)[[0, 1]];
        let fz = fisher_z(r, n);
        worst = worst.max(((score - fz) / fz).abs());
    }
    assert!(worst < 0.02, "relative difference {worst}");
}

fn with_covariate(n: usize, seed: u64) -> ConditionBlock<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = gaussian(n, 3, &mut rng);
    let c = e.column(0).to_owned();
    let mut data = Array2::zeros((n, 2));
    data.column_mut(0).assign(&(&c * 0.8 + &e.column(1)));
    data.column_mut(1).assign(&(&c * -0.6 + &e.column(2)));
    ConditionBlock::new("c", data).with_covariates(Covariates {
        names: vec!["age".into()],
        values: c.insert_axis(ndarray::Axis(1)),
    })
}

#[test]
fn adjusted_score_is_null_given_covariates() {
    let mut small = 0;
    for seed in 0..200 {
        let block = with_covariate(1000, 7000 + seed);
        let s = adjusted_psi_score(&block, 0, 1, &[], AdjustedScoreForm::Signed).unwrap();
        small += (s.abs() < 3.0) as usize;
    }
    assert!(small >= 198, "{small}/200");
    // Without the covariate the shared driver shows up as a strong score.
    let block = with_covariate(1000, 1);
    let bare = ConditionBlock::new("c", block.data.clone());
    assert!(adjusted_psi_score(&bare, 0, 1, &[], AdjustedScoreForm::Signed).unwrap().abs() > 8.0);
}

#[test]
fn orthogonal_regressor_scores_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 50;
    let g = gaussian(n, 3, &mut rng);
    // Build x_j orthogonal to the intercept, the covariate and x_i's noise, so
    // its least-squares coefficient is zero.
    let basis: Vec<DVector<f64>> = {
        let ones = DVector::from_element(n, 1.0);
        let c = DVector::from_iterator(n, g.column(0).iter().copied());
        let e = DVector::from_iterator(n, g.column(1).iter().copied());
        let mut out: Vec<DVector<f64>> = Vec::new();
        for v in [ones, c, e] {
            let mut w = v.clone();
            for b in &out {
                w -= b * b.dot(&w);
            }
            out.push(w.normalize());
        }
        out
    };
    let mut xj = DVector::from_iterator(n, g.column(2).iter().copied());
    for b in &basis {
        xj -= b * b.dot(&xj);
    }
    let mut data = Array2::zeros((n, 2));
    for r in 0..n {
        data[[r, 0]] = 2.0 * g[[r, 0]] + g[[r, 1]];
        data[[r, 1]] = xj[r];
    }
    let block = ConditionBlock::new("c", data).with_covariates(Covariates {
        names: vec!["c".into()],
        values: g.column(0).to_owned().insert_axis(ndarray::Axis(1)),
    });
    let s = adjusted_psi_score(&block, 0, 1, &[], AdjustedScoreForm::Signed).unwrap();
    assert!(s.abs() < 1e-6, "{s}");
}

fn fit_matrix(ds: &ConditionedDataset<f64>) -> fbia::PsiScoreMatrix {
    let ds = standardize(ds).unwrap();
    let res: Vec<_> = (0..ds.k())
        .map(|k| screen_condition(ds.condition(k), k, &ScreeningConfig::default()).unwrap())
        .collect();
    let pairs: Vec<_> = res.iter().map(|r| (&r.summary, &r.neighborhoods)).collect();
    compute_psi_matrix(&ds, &pairs, PsiOptions::default()).unwrap()
}

#[test]
fn matrix_shape_and_identical_columns() {
    let data = mixed(30, 3, 4);
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let ds = ConditionedDataset::new(
        names,
        vec![ConditionBlock::new("x", data.clone()), ConditionBlock::new("y", data)],
    )
    .unwrap();
    let m = fit_matrix(&ds);
    assert_eq!(m.scores.dim(), (3, 2));
    assert_eq!(m.scores.column(0), m.scores.column(1));
}

#[test]
fn ar2_edges_separate_from_non_edges() {
    let spec = SimulationSpec {
        kind: GraphKind::Ar2,
        p: 50,
        n: 500,
        k: 1,
        lineage: Lineage::Temporal,
        frac: 0.0,
        seed: 3,
        settings: SimSettings::default(),
    };
    let rep = simulate(&spec).unwrap();
    let m = fit_matrix(&rep.dataset);
    let truth = &rep.family.truth_edges[0];
    let (mut on, mut off) = (Vec::new(), Vec::new());
    for (l, pair) in m.edge_index.pairs().enumerate() {
        let v = m.scores[[l, 0]].abs();
        if truth.contains(&pair) {
            on.push(v);
        } else {
            off.push(v);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&on) - mean(&off) >= 3.0, "{} vs {}", mean(&on), mean(&off));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_correlation_matches_residual_oracle(
        seed in any::<u64>(),
        i in 0usize..6,
        j in 0usize..6,
        picks in prop::collection::btree_set(0usize..6, 0..=4),
    ) {
        prop_assume!(i != j);
        let s: Vec<usize> = picks.into_iter().filter(|&m| m != i && m != j).collect();
        let data = mixed(80, 6, seed);
        let block = ConditionBlock::new("c", data.clone());
        let got = partial_correlation(&block, i, j, &s).unwrap();
        let want = residual_oracle(&data, i, j, &s);
        prop_assert!((got - want).abs() < 1e-8, "{} vs {}", got, want);
    }

    #[test]
    fn score_keeps_sign(r in -0.999_999f64..0.999_999, n in 10usize..1000, s in 0usize..6) {
        let v = psi_score(r, n, s);
        prop_assert_eq!(v.signum() * r.signum() >= 0.0, true);
        if r != 0.0 {
            prop_assert_eq!(v.signum(), r.signum());
        }
        prop_assert_eq!(psi_score(-r, n, s), -v);
    }
}
