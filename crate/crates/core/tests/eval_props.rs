use mlshap_core::data::{make_folds, Dataset};
use mlshap_core::eval::{
    grid_search, hamming_loss, micro_f1, subset_accuracy, GridAxis, Metric, ParamGrid,
};
use mlshap_core::multilabel::ModelConfig;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
    let y = Array2::from_shape_fn((n, 3), |(i, l)| u8::from(x[[i, l]] + 0.2 * x[[i, 3]] > 0.0));
    Dataset::new(
        "s",
        x,
        (0..4).map(|j| format!("x{j}")).collect(),
        y,
        (0..3).map(|l| format!("y{l}")).collect(),
    )
    .unwrap()
}

fn label_matrix(rows: usize, cols: usize) -> impl Strategy<Value = (Array2<u8>, Array2<u8>)> {
    proptest::collection::vec((0u8..2, 0u8..2), rows * cols).prop_map(move |v| {
        let t = Array2::from_shape_fn((rows, cols), |(i, j)| v[i * cols + j].0);
        let p = Array2::from_shape_fn((rows, cols), |(i, j)| v[i * cols + j].1);
        (t, p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metrics_match_counting_definitions((t, p) in (1usize..12, 1usize..6).prop_flat_map(|(r, c)| label_matrix(r, c))) {
        let (n, q) = t.dim();
        let mut mismatches = 0;
        let mut exact_rows = 0;
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let mut row_ok = true;
            for l in 0..q {
                match (t[[i, l]], p[[i, l]]) {
                    (1, 1) => tp += 1.0,
                    (0, 1) => { fp += 1.0; mismatches += 1; row_ok = false; }
                    (1, 0) => { fn_ += 1.0; mismatches += 1; row_ok = false; }
                    _ => {}
                }
            }
            exact_rows += usize::from(row_ok);
        }
        prop_assert!((hamming_loss(&t, &p).unwrap() - mismatches as f64 / (n * q) as f64).abs() < 1e-15);
        prop_assert!((subset_accuracy(&t, &p).unwrap() - exact_rows as f64 / n as f64).abs() < 1e-15);
        let f1 = micro_f1(&t, &p).unwrap();
        if tp + fp + fn_ == 0.0 {
            prop_assert_eq!(f1, 1.0);
        } else if tp == 0.0 {
            prop_assert_eq!(f1, 0.0);
        } else {
            let (prec, rec) = (tp / (tp + fp), tp / (tp + fn_));
            prop_assert!((f1 - 2.0 * prec * rec / (prec + rec)).abs() < 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&f1));
    }
}

#[test]
fn metric_shape_mismatch_is_an_error() {
    let a = Array2::<u8>::zeros((2, 3));
    let b = Array2::<u8>::zeros((2, 2));
    assert!(hamming_loss(&a, &b).is_err());
    assert!(subset_accuracy(&a, &b).is_err());
    assert!(micro_f1(&a, &b).is_err());
}

#[test]
fn mlknn_grid_runs_every_cycle_and_is_deterministic() {
    let ds = synthetic(60, 1);
    let grid = ParamGrid::mlknn_k_range();
    let plan = make_folds(ds.n_instances(), 2, 5, 4).unwrap();
    let report = grid_search(&ds, &grid, &plan, Metric::HammingLoss).unwrap();
    assert_eq!(report.points.len(), 20);
    assert_eq!(report.total_evaluations, 200);
    assert!(report.points.iter().all(|p| p.evaluations == 10));
    let again = grid_search(&ds, &grid, &plan, Metric::HammingLoss).unwrap();
    assert_eq!(report.to_json().unwrap(), again.to_json().unwrap());

    let best = report.best_point().metrics["hamming_loss"].mean;
    assert!(report
        .points
        .iter()
        .all(|p| p.metrics["hamming_loss"].mean >= best));
    let first_best = report
        .points
        .iter()
        .position(|p| p.metrics["hamming_loss"].mean == best)
        .unwrap();
    assert_eq!(report.best, first_best);
    let table = report.render_table();
    assert_eq!(table.lines().filter(|l| l.contains("k=")).count(), 20);
}

#[test]
fn singleton_grid_is_trivially_best() {
    let ds = synthetic(30, 2);
    let grid = ParamGrid {
        base: ModelConfig::Mlknn {
            k: 3,
            smoothing: 1.0,
        },
        axes: vec![],
    };
    let plan = make_folds(30, 1, 3, 0).unwrap();
    for metric in Metric::ALL {
        let report = grid_search(&ds, &grid, &plan, metric).unwrap();
        assert_eq!(report.points.len(), 1);
        assert_eq!(report.best, 0);
        assert_eq!(report.total_evaluations, 3);
    }
}

#[test]
fn grid_errors() {
    let ds = synthetic(30, 2);
    let plan = make_folds(30, 1, 3, 0).unwrap();
    let empty_axis = ParamGrid {
        base: ModelConfig::Mlknn {
            k: 3,
            smoothing: 1.0,
        },
        axes: vec![GridAxis {
            name: "k".into(),
            values: vec![],
        }],
    };
    assert!(grid_search(&ds, &empty_axis, &plan, Metric::MicroF1).is_err());
    let wrong_plan = make_folds(31, 1, 3, 0).unwrap();
    assert!(grid_search(
        &ds,
        &ParamGrid::mlknn_k_range(),
        &wrong_plan,
        Metric::MicroF1
    )
    .is_err());
    let bad_name = ParamGrid {
        base: ModelConfig::Mlknn {
            k: 3,
            smoothing: 1.0,
        },
        axes: vec![GridAxis {
            name: "max_depth".into(),
            values: vec![1.0],
        }],
    };
    assert!(grid_search(&ds, &bad_name, &plan, Metric::MicroF1).is_err());
}

#[test]
fn forest_grid_expands_in_axis_order() {
    let grid = ParamGrid {
        base: ModelConfig::preset("paper-br", 0).unwrap(),
        axes: vec![
            GridAxis {
                name: "max_depth".into(),
                values: vec![3.0, 15.0],
            },
            GridAxis {
                name: "min_samples_leaf".into(),
                values: vec![1.0, 2.0],
            },
        ],
    };
    let points = grid.points().unwrap();
    let seen: Vec<(f64, f64)> = points
        .iter()
        .map(|(p, _)| (p["max_depth"], p["min_samples_leaf"]))
        .collect();
    assert_eq!(seen, vec![(3.0, 1.0), (3.0, 2.0), (15.0, 1.0), (15.0, 2.0)]);
}
