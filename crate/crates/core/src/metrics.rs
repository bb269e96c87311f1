//! Component purity, edge agreement and majority match.

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::graph::{majority_of, node_majority, MapperGraph};

/// Default purity threshold for the percent-of-pure-components summary.
pub const DEFAULT_PURITY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentPurity {
    /// Most frequent label in the component multiset, ties going to 1.
    pub dominant: Label,
    pub purity: f64,
    /// Multiset cardinality (sum of node sizes).
    pub size: usize,
}

pub fn component_purity(component: &[usize], g: &MapperGraph, labels: &[Label]) -> ComponentPurity {
    let mut counts = [0usize; 2];
    for &id in component {
        for &row in &g.nodes[id].members {
            counts[labels[row].index()] += 1;
        }
    }
    let size = counts[0] + counts[1];
    let dominant = if counts[1] >= counts[0] {
        Label::One
    } else {
        Label::Zero
    };
    let purity = if size == 0 {
        0.0
    } else {
        counts[dominant.index()] as f64 / size as f64
    };
    ComponentPurity {
        dominant,
        purity,
        size,
    }
}

pub fn all_component_purities(g: &MapperGraph, labels: &[Label]) -> Vec<ComponentPurity> {
    g.components
        .iter()
        .map(|c| component_purity(c, g, labels))
        .collect()
}

/// Share of edges whose endpoints have the same non-mixed majority.
/// `None` for an edgeless graph.
pub fn edge_agreement(g: &MapperGraph, labels: &[Label]) -> Option<f64> {
    if g.edges.is_empty() {
        return None;
    }
    let classes: Vec<_> = g.nodes.iter().map(|n| node_majority(n, labels)).collect();
    let agree = g
        .edges
        .iter()
        .filter(|e| classes[e.a].agrees(classes[e.b]))
        .count();
    Some(agree as f64 / g.edges.len() as f64)
}

/// Share of components whose gold and predicted multiset majorities agree.
/// `None` when there are no components.
pub fn majority_match(g: &MapperGraph, gold: &[Label], pred: &[Label]) -> Option<f64> {
    if g.components.is_empty() {
        return None;
    }
    let matches = g
        .components
        .iter()
        .filter(|c| {
            let pts = g.component_points(c);
            majority_of(&pts, gold).agrees(majority_of(&pts, pred))
        })
        .count();
    Some(matches as f64 / g.components.len() as f64)
}

/// Percent of purities at or above `threshold`; `None` for an empty list.
pub fn percent_at_least(purities: &[ComponentPurity], threshold: f64) -> Option<f64> {
    if purities.is_empty() {
        return None;
    }
    let hits = purities.iter().filter(|p| p.purity >= threshold).count();
    Some(100.0 * hits as f64 / purities.len() as f64)
}

pub fn purity_threshold_summary(g: &MapperGraph, labels: &[Label], threshold: f64) -> Option<f64> {
    percent_at_least(&all_component_purities(g, labels), threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphShape {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub singletons: usize,
}

impl GraphShape {
    pub fn of(g: &MapperGraph) -> Self {
        Self {
            nodes: g.node_count(),
            edges: g.edge_count(),
            components: g.components.len(),
            singletons: g.singleton_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cp_gold: Vec<ComponentPurity>,
    pub cp_pred: Option<Vec<ComponentPurity>>,
    pub ea: Option<f64>,
    pub mm: Option<f64>,
    pub threshold: f64,
    pub cp_gold_pct: Option<f64>,
    pub cp_pred_pct: Option<f64>,
    pub noise_rate: f64,
    pub shape: GraphShape,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

impl MetricsReport {
    pub fn compute(
        g: &MapperGraph,
        gold: &[Label],
        pred: Option<&[Label]>,
        noise_rate: f64,
        threshold: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidParameter(format!(
                "purity threshold must lie in [0, 1], got {threshold}"
            )));
        }
        let cp_gold = all_component_purities(g, gold);
        let cp_pred = pred.map(|p| all_component_purities(g, p));
        Ok(Self {
            cp_gold_pct: percent_at_least(&cp_gold, threshold),
            cp_pred_pct: cp_pred
                .as_deref()
                .and_then(|c| percent_at_least(c, threshold)),
            ea: edge_agreement(g, gold),
            mm: pred.and_then(|p| majority_match(g, gold, p)),
            cp_gold,
            cp_pred,
            threshold,
            noise_rate,
            shape: GraphShape::of(g),
        })
    }

    /// Unweighted mean of per-component gold purity.
    pub fn cp_gold_mean(&self) -> Option<f64> {
        mean(&self.cp_gold.iter().map(|c| c.purity).collect::<Vec<_>>())
    }

    pub fn cp_pred_mean(&self) -> Option<f64> {
        self.cp_pred
            .as_ref()
            .and_then(|c| mean(&c.iter().map(|c| c.purity).collect::<Vec<_>>()))
    }

    pub fn mm_pct(&self) -> Option<f64> {
        self.mm.map(|m| 100.0 * m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    /// Sample standard deviation; absent with fewer than two values.
    pub std: Option<f64>,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        let m = mean(values);
        let std = match (m, n) {
            (Some(m), n) if n >= 2 => {
                let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
                Some((ss / (n - 1) as f64).sqrt())
            }
            _ => None,
        };
        Summary {
            mean: m,
            std,
            count: n,
        }
    }
}

/// Metric names in aggregate output order.
pub const AGGREGATE_METRICS: [&str; 11] = [
    "cp_gt_pct",
    "cp_pred_pct",
    "mm_pct",
    "ea",
    "cp_gt_mean",
    "cp_pred_mean",
    "noise_rate",
    "nodes",
    "edges",
    "components",
    "singletons",
];

fn metric_value(r: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "cp_gt_pct" => r.cp_gold_pct,
        "cp_pred_pct" => r.cp_pred_pct,
        "mm_pct" => r.mm_pct(),
        "ea" => r.ea,
        "cp_gt_mean" => r.cp_gold_mean(),
        "cp_pred_mean" => r.cp_pred_mean(),
        "noise_rate" => Some(r.noise_rate),
        "nodes" => Some(r.shape.nodes as f64),
        "edges" => Some(r.shape.edges as f64),
        "components" => Some(r.shape.components as f64),
        "singletons" => Some(r.shape.singletons as f64),
        _ => None,
    }
}

/// Mean and sample std of every metric across reports; absent values
/// (such as EA on an edgeless graph) are left out.
pub fn aggregate_over_lenses(reports: &[MetricsReport]) -> Result<Vec<(&'static str, Summary)>> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("nothing to aggregate".into()));
    }
    Ok(AGGREGATE_METRICS
        .iter()
        .map(|&name| {
            let values: Vec<f64> = reports
                .iter()
                .filter_map(|r| metric_value(r, name))
                .collect();
            (name, Summary::of(&values))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::BinClustering;
    use crate::graph::build_graph;
    use approx::assert_abs_diff_eq;
    use Label::*;

    fn graph(sets: &[&[usize]]) -> MapperGraph {
        let bins: Vec<BinClustering> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| BinClustering {
                bin: i,
                members: s.to_vec(),
                labels: vec![Some(0); s.len()],
            })
            .collect();
        build_graph(&bins)
    }

    #[test]
    fn purity_of_overlapping_nodes() {
        // rows a=0, b=1, c=2 with labels 1, 1, 0
        let g = graph(&[&[0, 1], &[1, 2]]);
        let cp = component_purity(&g.components[0], &g, &[One, One, Zero]);
        assert_eq!(cp.dominant, One);
        assert_eq!(cp.purity, 0.75);
        assert_eq!(cp.size, 4);
    }

    #[test]
    fn pure_and_tied_components() {
        let g = graph(&[&[0, 1], &[1, 2], &[3, 4]]);
        let labels = [One; 5];
        assert!(all_component_purities(&g, &labels)
            .iter()
            .all(|c| c.purity == 1.0));
        let g = graph(&[&[0, 1]]);
        let cp = component_purity(&g.components[0], &g, &[One, Zero]);
        assert_eq!((cp.purity, cp.dominant), (0.5, One));
    }

    #[test]
    fn edge_agreement_examples() {
        // A={0,1,2} majority 1, B={2,3,4} majority 1, C={4,5,6} majority 0.
        let g = graph(&[&[0, 1, 2], &[2, 3, 4], &[4, 5, 6]]);
        let labels = [One, One, One, One, Zero, Zero, Zero];
        assert_eq!(g.edge_count(), 2);
        assert_eq!(edge_agreement(&g, &labels), Some(0.5));
        assert_eq!(edge_agreement(&g, &[One; 7]), Some(1.0));

        let mixed = graph(&[&[0, 1], &[1, 2]]);
        assert_eq!(edge_agreement(&mixed, &[Zero, One, Zero]), Some(0.0));
        assert_eq!(edge_agreement(&graph(&[&[0, 1], &[2, 3]]), &[One; 4]), None);
    }

    #[test]
    fn majority_match_examples() {
        let g = graph(&[&[0, 1, 2], &[3, 4, 5]]);
        let gold = [One, One, One, Zero, Zero, Zero];
        let pred = [One, One, One, One, One, One];
        assert_eq!(majority_match(&g, &gold, &pred), Some(0.5));
        assert_eq!(majority_match(&g, &gold, &gold), Some(1.0));
        let flipped: Vec<Label> = gold.iter().map(|l| l.flipped()).collect();
        assert_eq!(majority_match(&g, &gold, &flipped), Some(0.0));
    }

    #[test]
    fn threshold_examples() {
        let cps: Vec<ComponentPurity> = [0.95, 0.85, 1.0]
            .iter()
            .map(|&p| ComponentPurity {
                dominant: One,
                purity: p,
                size: 2,
            })
            .collect();
        assert_abs_diff_eq!(
            percent_at_least(&cps, 0.9).unwrap(),
            200.0 / 3.0,
            epsilon = 1e-12
        );
        let exact = [ComponentPurity {
            dominant: One,
            purity: 0.9,
            size: 10,
        }];
        assert_eq!(percent_at_least(&exact, 0.9), Some(100.0));
        assert_eq!(percent_at_least(&[], 0.9), None);
    }

    #[test]
    fn aggregation() {
        let s = Summary::of(&[1.0, 1.0]);
        assert_eq!((s.mean, s.std), (Some(1.0), Some(0.0)));
        let s = Summary::of(&[0.5, 1.0]);
        assert_eq!(s.mean, Some(0.75));
        assert_abs_diff_eq!(s.std.unwrap(), 0.5f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.std.unwrap(), 0.354, epsilon = 5e-4);
        let s = Summary::of(&[0.8]);
        assert_eq!((s.mean, s.std), (Some(0.8), None));
        assert!(aggregate_over_lenses(&[]).is_err());
    }

    #[test]
    fn aggregation_skips_absent_edge_agreement() {
        let with_edges = graph(&[&[0, 1], &[1, 2]]);
        let without = graph(&[&[0, 1]]);
        let labels = [One, One, One];
        let a = MetricsReport::compute(&with_edges, &labels, None, 0.0, 0.9).unwrap();
        let b = MetricsReport::compute(&without, &labels, None, 0.0, 0.9).unwrap();
        let agg = aggregate_over_lenses(&[a, b]).unwrap();
        let ea = agg.iter().find(|(n, _)| *n == "ea").unwrap().1;
        assert_eq!((ea.mean, ea.std, ea.count), (Some(1.0), None, 1));
        let nodes = agg.iter().find(|(n, _)| *n == "nodes").unwrap().1;
        assert_eq!(nodes.mean, Some(1.5));
    }
}
