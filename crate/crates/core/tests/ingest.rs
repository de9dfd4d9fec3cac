use std::fs;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use fbia::data_ingest::{
    load_dataset, standardize, write_dataset, ConditionBlock, ConditionSource, ConditionedDataset, Manifest,
    ManifestCondition, Schema,
};
use fbia::FbiaError;

fn random_block(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("g{i}")).collect()
}

#[test]
fn two_files_give_two_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ConditionedDataset::new(
        names(200),
        vec![
            ConditionBlock::new("a", random_block(100, 200, 1)),
            ConditionBlock::new("b", random_block(100, 200, 2)),
        ],
    )
    .unwrap();
    let sources = write_dataset(&ds, dir.path()).unwrap();
    let back: ConditionedDataset<f64> = load_dataset(&sources, &Schema::default()).unwrap();
    assert_eq!(back.k(), 2);
    assert_eq!(back.p(), 200);
    assert_eq!(back.sample_sizes(), vec![100, 100]);
    assert_eq!(back.labels(), vec!["a", "b"]);
}

#[test]
fn columns_are_realigned_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let b_sorted = dir.path().join("b_sorted.csv");
    let rows = ["1,2,3", "2,5,1", "3,1,4", "4,0,2", "5,3,3", "6,2,9"];
    fs::write(&a, format!("x,y,z\n{}\n", rows.join("\n"))).unwrap();
    // Same values as `rows`, columns written as z,x,y.
    let shuffled: Vec<String> = rows
        .iter()
        .map(|r| {
            let v: Vec<&str> = r.split(',').collect();
            format!("{},{},{}", v[2], v[0], v[1])
        })
        .collect();
    fs::write(&b, format!("z,x,y\n{}\n", shuffled.join("\n"))).unwrap();
    fs::write(&b_sorted, format!("x,y,z\n{}\n", rows.join("\n"))).unwrap();

    let mixed: ConditionedDataset<f64> = load_dataset(
        &[ConditionSource::new("a", &a), ConditionSource::new("b", &b)],
        &Schema::default(),
    )
    .unwrap();
    let sorted: ConditionedDataset<f64> = load_dataset(
        &[ConditionSource::new("a", &a), ConditionSource::new("b", &b_sorted)],
        &Schema::default(),
    )
    .unwrap();
    assert_eq!(mixed.variable_names(), sorted.variable_names());
    assert_eq!(mixed.condition(1).data, sorted.condition(1).data);
}

#[test]
fn missing_cell_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.tsv");
    fs::write(&a, "x\ty\n1\t2\n3\t4\nNA\t5\n6\t7\n8\t9\n").unwrap();
    let err = load_dataset::<f64>(&[ConditionSource::from_path(&a)], &Schema::default()).unwrap_err();
    match &err {
        FbiaError::Parse { name, row, column, .. } => {
            assert_eq!(name, "x");
            assert_eq!((*row, *column), (3, 1));
        }
        other => panic!("unexpected error {other:?}"),
    }
    assert!(err.to_string().contains("a.tsv"));
}

#[test]
fn standardize_small_column() {
    let ds = ConditionedDataset::new(
        names(2),
        vec![ConditionBlock::new(
            "c",
            Array2::from_shape_vec((5, 2), vec![1.0, 0.3, 2.0, 0.1, 3.0, 0.7, 2.0, 0.2, 2.0, 0.9]).unwrap(),
        )],
    )
    .unwrap();
    let s = standardize(&ds).unwrap();
    let col: Vec<f64> = s.condition(0).data.column(0).to_vec();
    // mean 2, sd sqrt(2/4)
    let sd = (0.5f64).sqrt();
    let want = [-1.0 / sd, 0.0, 1.0 / sd, 0.0, 0.0];
    for (a, b) in col.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }

    let three = ConditionedDataset::new(
        names(2),
        vec![ConditionBlock::new(
            "c",
            Array2::from_shape_vec((5, 2), vec![1.0, 1.0, 2.0, 2.0, 3.0, 0.0, 1.0, 4.0, 3.0, 1.0]).unwrap(),
        )],
    )
    .unwrap();
    let s = standardize(&three).unwrap();
    let x = s.condition(0).data.column(0).to_vec();
    let mean = x.iter().sum::<f64>() / 5.0;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
    assert!(mean.abs() < 1e-14 && (var - 1.0).abs() < 1e-12);
}

#[test]
fn standardize_is_per_condition() {
    let a = random_block(30, 3, 5);
    let b = a.mapv(|v| 10.0 * v + 3.0);
    let ds = ConditionedDataset::new(names(3), vec![ConditionBlock::new("a", a), ConditionBlock::new("b", b)]).unwrap();
    let s = standardize(&ds).unwrap();
    for (x, y) in s.condition(0).data.iter().zip(s.condition(1).data.iter()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn constant_column_is_degenerate() {
    let data = Array2::from_shape_vec((5, 2), vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 1.0, 5.0, 0.0]).unwrap();
    let ds = ConditionedDataset::new(names(2), vec![ConditionBlock::new("c", data)]).unwrap();
    match standardize(&ds) {
        Err(FbiaError::DegenerateVariable { variable, condition }) => {
            assert_eq!(variable, "g0");
            assert_eq!(condition, "c");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn too_few_rows_and_mismatched_variables_are_rejected() {
    let small = ConditionedDataset::new(names(2), vec![ConditionBlock::new("c", random_block(4, 2, 1))]);
    assert!(matches!(small, Err(FbiaError::Size { .. })));

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "x,y\n1,2\n3,4\n5,6\n7,9\n9,1\n").unwrap();
    fs::write(&b, "x,w\n1,2\n3,4\n5,6\n7,9\n9,1\n").unwrap();
    let err = load_dataset::<f64>(&[ConditionSource::from_path(&a), ConditionSource::from_path(&b)], &Schema::default());
    assert!(matches!(err, Err(FbiaError::Schema(_))));
}

#[test]
fn manifest_keeps_order_and_resolves_paths() {
    let dir = tempfile::tempdir().unwrap();
    let ds = ConditionedDataset::new(
        names(4),
        vec![
            ConditionBlock::new("late", random_block(8, 4, 1)),
            ConditionBlock::new("early", random_block(9, 4, 2)),
        ],
    )
    .unwrap();
    write_dataset(&ds, &dir.path().join("data")).unwrap();
    let manifest = Manifest {
        conditions: ["late", "early"]
            .iter()
            .map(|l| ManifestCondition {
                label: l.to_string(),
                data: format!("data/{l}.csv").into(),
                covariates: None,
                group: None,
                truth_edges: None,
                precision: None,
            })
            .collect(),
        schema: Schema::default(),
        metadata: None,
    };
    let path = dir.path().join("manifest.json");
    manifest.write(&path).unwrap();
    let read = Manifest::read(&path).unwrap();
    let back: ConditionedDataset<f64> = load_dataset(&read.sources(), &read.schema).unwrap();
    assert_eq!(back.labels(), vec!["late", "early"]);
    assert_eq!(back.sample_sizes(), vec![8, 9]);
    assert_eq!(back.condition(0).data, ds.condition(0).data);
}

#[test]
fn inline_covariates_are_split_off() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    fs::write(&a, "id,age,x,y\ns1,30,1,2\ns2,41,3,4\ns3,25,5,6\ns4,60,7,9\ns5,33,9,1\n").unwrap();
    let schema = Schema {
        covariate_columns: vec!["age".into()],
        ignore_columns: vec!["id".into()],
    };
    let ds: ConditionedDataset<f64> = load_dataset(&[ConditionSource::from_path(&a)], &schema).unwrap();
    assert_eq!(ds.variable_names(), &["x".to_string(), "y".to_string()]);
    let cov = ds.condition(0).covariates.as_ref().unwrap();
    assert_eq!(cov.names, vec!["age"]);
    assert_eq!(cov.values.column(0).to_vec(), vec![30.0, 41.0, 25.0, 60.0, 33.0]);
}

fn finite_block() -> impl Strategy<Value = Array2<f64>> {
    (5usize..12, 2usize..5).prop_flat_map(|(n, p)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, n * p)
            .prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_is_bit_identical(data in finite_block()) {
        let dir = tempfile::tempdir().unwrap();
        let p = data.ncols();
        let ds = ConditionedDataset::new(names(p), vec![ConditionBlock::new("c", data)]).unwrap();
        let sources = write_dataset(&ds, dir.path()).unwrap();
        let back: ConditionedDataset<f64> = load_dataset(&sources, &Schema::default()).unwrap();
        for (a, b) in ds.condition(0).data.iter().zip(back.condition(0).data.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn standardize_is_idempotent(seed in any::<u64>(), n in 5usize..60, p in 2usize..6, scale in 1e-3f64..1e3, shift in -1e3f64..1e3) {
        let data = random_block(n, p, seed).mapv(|v| v * scale + shift);
        let ds = ConditionedDataset::new(names(p), vec![ConditionBlock::new("c", data)]).unwrap();
        let once = standardize(&ds).unwrap();
        let twice = standardize(&once).unwrap();
        for (a, b) in once.condition(0).data.iter().zip(twice.condition(0).data.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
