use mapper_core::clustering::{hdbscan_labels, pairwise_distance, ClusteringParams, Metric};
use mapper_core::cover::{build_cover, CoverSpec};
use mapper_core::dataset::{join, EmbeddingDataset, EmbeddingMatrix, Label, LabelRecord};
use mapper_core::lenses::LensValues;
use mapper_core::metrics::{
    all_component_purities, edge_agreement, majority_match, percent_at_least,
};
use mapper_core::run_mapper;
use proptest::prelude::*;

fn dataset(rows: &[Vec<f64>], gold: &[u8], pred: &[u8]) -> EmbeddingDataset {
    let ids: Vec<String> = (0..rows.len()).map(|i| format!("x{i:04}")).collect();
    let m = EmbeddingMatrix::from_rows(ids.clone(), rows).unwrap();
    let labels = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| LabelRecord {
            id,
            gold: Label::from_u8(gold[i]).unwrap(),
            pred: Label::from_u8(pred[i]),
            agreement: None,
        })
        .collect();
    join(m, labels).unwrap()
}

fn as_u8(labels: &[Label]) -> Vec<u8> {
    labels.iter().map(|l| l.as_u8()).collect()
}

/// Clustered points with some grid snapping so that exact distance ties
/// and duplicates occur regularly.
fn points(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_d, 1..=max_n).prop_flat_map(|(d, n)| {
        prop::collection::vec(
            prop::collection::vec(
                prop_oneof![
                    2 => (-3i32..=3).prop_map(|v| v as f64 * 0.5),
                    3 => -1.0f64..1.0,
                ],
                d,
            ),
            n,
        )
        .prop_map(|mut pts| {
            for p in &mut pts {
                if p.iter().all(|v| *v == 0.0) {
                    p[0] = 1.0;
                }
            }
            pts
        })
    })
}

fn matrix_rows(dm: &mapper_core::DistanceMatrix) -> Vec<Vec<f64>> {
    (0..dm.len()).map(|i| dm.row(i).to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hdbscan_matches_reference(
        pts in points(64, 6),
        mcs in 2usize..5,
        ms in prop::option::of(1usize..5),
        euclid in any::<bool>(),
        allow_single in any::<bool>(),
    ) {
        let metric = if euclid { Metric::Euclidean } else { Metric::Cosine };
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let dm = pairwise_distance(&refs, metric).unwrap();
        let params = ClusteringParams {
            min_cluster_size: mcs,
            min_samples: ms,
            metric,
            allow_single_cluster: allow_single,
        };
        let got = hdbscan_labels(&dm, &params);
        let want = mapper_oracle::hdbscan(&matrix_rows(&dm), mcs, params.min_samples(), allow_single);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn cover_matches_reference(
        v in prop::collection::vec(prop_oneof![0.0f64..=1.0, (0u32..=20).prop_map(|i| i as f64 / 20.0)], 1..=2),
        r in 1usize..25,
        eps in prop_oneof![Just(0.0), Just(0.2), Just(0.5), 0.0f64..0.95],
    ) {
        let cover = build_cover(CoverSpec::new(v.len(), r, eps).unwrap()).unwrap();
        prop_assert_eq!(cover.bins_containing(&v), mapper_oracle::bins_containing(&v, r, eps));
    }

    #[test]
    fn pipeline_matches_reference(
        pts in points(90, 8),
        lens_raw in prop::collection::vec(prop_oneof![0.0f64..=1.0, (0u32..=10).prop_map(|i| i as f64 / 10.0)], 180),
        labels in prop::collection::vec((0u8..2, 0u8..2), 90),
        r in 2usize..=10,
        eps in prop_oneof![Just(0.0), Just(0.2), Just(0.5)],
        two_d in any::<bool>(),
    ) {
        let n = pts.len();
        let k = if two_d { 2 } else { 1 };
        let gold: Vec<u8> = labels.iter().take(n).map(|l| l.0).collect();
        let pred: Vec<u8> = labels.iter().take(n).map(|l| l.1).collect();
        let ds = dataset(&pts, &gold, &pred);
        let values = LensValues::new(k, lens_raw[..n * k].to_vec()).unwrap();
        let params = ClusteringParams::default();
        let run = run_mapper(&ds, &values, r, eps, &params).unwrap();

        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let dm = pairwise_distance(&refs, Metric::Cosine).unwrap();
        let lens: Vec<Vec<f64>> = (0..n).map(|i| values.row(i).to_vec()).collect();
        let oracle = mapper_oracle::mapper(
            &lens,
            &|a, b| dm.get(a, b),
            mapper_oracle::Params { r, epsilon: eps, min_cluster_size: 2, min_samples: 2, allow_single_cluster: true },
        );

        let g = &run.graph;
        let nodes: Vec<(usize, Vec<usize>)> = g.nodes.iter().map(|n| (n.bin, n.members.clone())).collect();
        let want: Vec<(usize, Vec<usize>)> = oracle.nodes.iter().map(|n| (n.bin, n.members.clone())).collect();
        prop_assert_eq!(nodes, want);
        let edges: Vec<(usize, usize, usize)> = g.edges.iter().map(|e| (e.a, e.b, e.shared_count)).collect();
        prop_assert_eq!(edges, oracle.edges.clone());
        prop_assert_eq!(&g.components, &oracle.components);

        let gl = ds.gold();
        let pl = ds.pred().unwrap();
        let cp: Vec<f64> = all_component_purities(g, &gl).iter().map(|c| c.purity).collect();
        let cp_ref = mapper_oracle::component_purity(&oracle, &as_u8(&gl));
        prop_assert_eq!(cp.len(), cp_ref.len());
        for (a, b) in cp.iter().zip(&cp_ref) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        prop_assert!(close(edge_agreement(g, &gl), mapper_oracle::edge_agreement(&oracle, &as_u8(&gl))));
        prop_assert!(close(majority_match(g, &gl, &pl), mapper_oracle::majority_match(&oracle, &as_u8(&gl), &as_u8(&pl))));
        let pc: Vec<_> = all_component_purities(g, &pl);
        let pc_ref = mapper_oracle::component_purity(&oracle, &as_u8(&pl));
        prop_assert!(close(percent_at_least(&pc, 0.9), mapper_oracle::percent_at_least(&pc_ref, 0.9)));
    }

    #[test]
    fn threshold_summary_is_monotone(
        purities in prop::collection::vec(0.5f64..=1.0, 1..50),
        a in 0.0f64..=1.0,
        b in 0.0f64..=1.0,
    ) {
        let cps: Vec<_> = purities
            .iter()
            .map(|&p| mapper_core::metrics::ComponentPurity { dominant: Label::One, purity: p, size: 2 })
            .collect();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(percent_at_least(&cps, lo).unwrap() >= percent_at_least(&cps, hi).unwrap());
    }
}

#[test]
fn metric_invariants_on_pure_graph() {
    // Two separated groups, each with one label, so every node is pure.
    let mut pts = Vec::new();
    let mut gold = Vec::new();
    for i in 0..30 {
        let t = i as f64 * 0.01;
        pts.push(vec![1.0, t]);
        gold.push(0);
        pts.push(vec![-t, 1.0]);
        gold.push(1);
    }
    let ds = dataset(&pts, &gold, &gold);
    let lens: Vec<f64> = pts.iter().map(|p| (p[1] - p[0] + 1.0) / 2.5).collect();
    let values = LensValues::new(1, lens).unwrap();
    let run = run_mapper(&ds, &values, 6, 0.3, &ClusteringParams::default()).unwrap();
    let report = run.report(&ds, 0.9).unwrap();
    assert!(report.cp_gold.iter().all(|c| c.purity == 1.0));
    assert_eq!(report.mm, Some(1.0));
    if report.shape.edges > 0 {
        assert_eq!(report.ea, Some(1.0));
    }
    let total: usize = run.graph.nodes.iter().map(|n| n.size()).sum();
    let comp_total: usize = run
        .graph
        .components
        .iter()
        .map(|c| run.graph.component_points(c).len())
        .sum();
    assert_eq!(total, comp_total);
    // Swapping the classes everywhere leaves purity unchanged.
    let flipped: Vec<Label> = ds.gold().iter().map(|l| l.flipped()).collect();
    let a: Vec<f64> = report.cp_gold.iter().map(|c| c.purity).collect();
    let b: Vec<f64> = all_component_purities(&run.graph, &flipped)
        .iter()
        .map(|c| c.purity)
        .collect();
    assert_eq!(a, b);
}
