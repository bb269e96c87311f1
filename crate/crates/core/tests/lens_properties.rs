use mapper_core::dataset::{join, EmbeddingDataset, EmbeddingMatrix, Label, LabelRecord};
use mapper_core::lenses::{
    evaluate_lens, fit_train_stats, lens_eccentricity, raw_lens_values, LensKind, LensSpec,
    TrainStatistics,
};
use proptest::prelude::*;

fn dataset(rows: &[Vec<f64>], gold: &[u8]) -> EmbeddingDataset {
    let ids: Vec<String> = (0..rows.len()).map(|i| format!("r{i}")).collect();
    let m = EmbeddingMatrix::from_rows(ids.clone(), rows).unwrap();
    let labels = ids
        .into_iter()
        .zip(gold)
        .map(|(id, &g)| LabelRecord {
            id,
            gold: Label::from_u8(g).unwrap(),
            pred: None,
            agreement: None,
        })
        .collect();
    join(m, labels).unwrap()
}

/// Training rows with both classes present and no zero vectors.
fn split() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>, Vec<Vec<f64>>)> {
    (2usize..6).prop_flat_map(|d| {
        let row = prop::collection::vec(-3.0f64..3.0, d).prop_map(|mut r| {
            r[0] += if r[0] >= 0.0 { 0.5 } else { -0.5 };
            r
        });
        (
            prop::collection::vec(row.clone(), 4..30),
            prop::collection::vec(0u8..2, 30),
            prop::collection::vec(row, 1..30),
        )
            .prop_map(|(train, mut gold, test)| {
                gold.truncate(train.len());
                gold[0] = 0;
                gold[1] = 1;
                (train, gold, test)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_lens_lands_in_unit_box((train, gold, test) in split(), seed in any::<u64>()) {
        let train = dataset(&train, &gold);
        let test = dataset(&test, &vec![0; test.len()]);
        let stats = fit_train_stats(&train, seed).unwrap();
        for kind in LensKind::ONE_D.iter().chain(&LensKind::TWO_D) {
            let v = evaluate_lens(&test, &LensSpec::new(*kind), &stats).unwrap();
            prop_assert!(v.values().iter().all(|x| (0.0..=1.0).contains(x)), "{kind}");
        }
    }

    #[test]
    fn rescaling_preserves_order_inside_bounds((train, gold, test) in split(), seed in any::<u64>()) {
        let train = dataset(&train, &gold);
        let test = dataset(&test, &vec![0; test.len()]);
        let stats = fit_train_stats(&train, seed).unwrap();
        for kind in LensKind::ONE_D {
            let raw = raw_lens_values(&test, kind, &stats).unwrap();
            let scaled = evaluate_lens(&test, &LensSpec::new(kind), &stats).unwrap();
            let b = stats.bounds(kind).unwrap()[0];
            for i in 0..raw.len() {
                for j in 0..raw.len() {
                    let inside = |v: f64| b.min < v && v < b.max;
                    if inside(raw[i]) && inside(raw[j]) && raw[i] < raw[j] {
                        prop_assert!(scaled.values()[i] <= scaled.values()[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn eccentricity_ignores_positive_scale((train, gold, test) in split(), e in -8i32..8) {
        let train = dataset(&train, &gold);
        let stats = TrainStatistics::fit(&train, 0, &[LensKind::Eccentricity1d]).unwrap();
        for x in &test {
            let scaled: Vec<f64> = x.iter().map(|v| v * 2f64.powi(e)).collect();
            prop_assert_eq!(
                lens_eccentricity(x, &stats).unwrap().to_bits(),
                lens_eccentricity(&scaled, &stats).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn fitting_is_bit_deterministic((train, gold, _) in split(), seed in any::<u64>()) {
        let train = dataset(&train, &gold);
        let a = fit_train_stats(&train, seed).unwrap();
        let b = fit_train_stats(&train, seed).unwrap();
        prop_assert_eq!(a.pcs(), b.pcs());
        prop_assert_eq!(a.rand_dirs(), b.rand_dirs());
        prop_assert_eq!(a.mu0(), b.mu0());
        for kind in LensKind::ONE_D.iter().chain(&LensKind::TWO_D) {
            prop_assert_eq!(a.bounds(*kind), b.bounds(*kind));
        }
    }

    #[test]
    fn principal_direction_signs((train, gold, _) in split()) {
        let train = dataset(&train, &gold);
        let stats = fit_train_stats(&train, 1).unwrap();
        for pc in stats.pcs() {
            let top = pc.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let first = pc.iter().find(|c| c.abs() == top).unwrap();
            prop_assert!(*first > 0.0);
        }
    }
}
