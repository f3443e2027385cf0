mod common;

use proptest::prelude::*;

use cpboost::dataset::{load_delimited, split_80_20, Dataset};
use cpboost::discrete_opt::FixedPointCodec;
use cpboost::hypotheses::Dictionary;
use cpboost::loss::dual_objective;

fn dataset(m: usize, d: usize, values: &[f64], signs: &[bool]) -> Dataset {
    // The first two rows carry both classes.
    let labels = signs[..m]
        .iter()
        .enumerate()
        .map(|(i, &s)| match i {
            0 => 1,
            1 => -1,
            _ if s => 1,
            _ => -1,
        })
        .collect();
    Dataset::new(values[..m * d].to_vec(), labels, d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_partition(
        m in 5usize..80,
        values in prop::collection::vec(-10.0f64..10.0, 80),
        signs in prop::collection::vec(any::<bool>(), 80),
        seed in any::<u64>(),
    ) {
        let data = dataset(m, 1, &values, &signs);
        let split = split_80_20(&data, seed).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn oracle_choice_ignores_scale_of_u(
        values in prop::collection::vec(-5.0f64..5.0, 40),
        signs in prop::collection::vec(any::<bool>(), 20),
        u in prop::collection::vec(0.01f64..3.0, 20),
        scale in 1e-3f64..1e3,
    ) {
        let data = dataset(20, 2, &values, &signs);
        let dict = Dictionary::enumerate_candidates(&data);
        let scaled: Vec<f64> = u.iter().map(|v| v * scale).collect();
        let a = dict.oracle_best_column(&u, data.labels()).unwrap();
        let b = dict.oracle_best_column(&scaled, data.labels()).unwrap();
        let best = |w: &[f64]| dict.edges(w, data.labels()).into_iter().fold(f64::NEG_INFINITY, f64::max);
        // Argmax ties may resolve differently after rounding; the edge must not.
        let (a, b) = (a.unwrap(), b.unwrap());
        prop_assert!((a.edge - best(&u)).abs() <= 1e-12 * best(&u).abs().max(1.0));
        prop_assert!((b.edge - best(&scaled)).abs() <= 1e-12 * best(&scaled).abs().max(1.0));
        let edges = dict.edges(&u, data.labels());
        prop_assert!((edges[b.index] - edges[a.index]).abs() <= 1e-9 * edges[a.index].abs().max(1.0));
    }

    #[test]
    fn decoded_weight_grows_with_level(bit_depth in 1usize..12, range in 0.1f64..50.0) {
        let codec = FixedPointCodec::new(bit_depth, range, 1).unwrap();
        let mut previous = -1.0;
        for level in 0..=codec.max_level() {
            let w = codec.decode(&codec.encode_levels(&[level])).unwrap()[0];
            prop_assert!(w > previous);
            previous = w;
        }
        prop_assert_eq!(previous, range);
    }

    #[test]
    fn dual_objective_is_independent_of_lambda(
        u in prop::collection::vec(0.0f64..10.0, 1..50),
        lambda in 0.0f64..1e3,
    ) {
        let a = dual_objective(&u, 0.0).unwrap();
        let b = dual_objective(&u, lambda).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn delimited_round_trip(
        m in 2usize..30,
        values in prop::collection::vec(-1e6f64..1e6, 90),
        signs in prop::collection::vec(any::<bool>(), 30),
    ) {
        let data = dataset(m, 3, &values, &signs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        data.write_delimited(&path, ',').unwrap();
        let back = load_delimited(&path, 3, ',').unwrap();
        prop_assert_eq!(back.labels(), data.labels());
        for i in 0..m {
            prop_assert_eq!(back.row(i), data.row(i));
        }
    }
}

#[test]
fn l1_oracle_satisfies_optimality_conditions() {
    let mut r = common::rng(11);
    for _ in 0..20 {
        let (cols, labels) = common::random_instance(&mut r, 30, 3);
        let nu = 0.1;
        let w = common::l1_optimum(&cols, &labels, nu, &[0, 1, 2]);
        let edges = common::edges_at(&cols, &labels, (&cols, &w));
        for (j, e) in edges.iter().enumerate() {
            assert!(*e <= nu + 1e-9);
            if w[j] > 0.0 {
                assert!((e - nu).abs() <= 1e-9);
            }
        }
    }
}
