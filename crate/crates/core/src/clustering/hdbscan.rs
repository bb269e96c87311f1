//! HDBSCAN over a precomputed distance matrix.
//!
//! Steps: core distances, mutual reachability, Prim's MST, an n-ary
//! single-linkage hierarchy, condensation by minimum cluster size, and
//! excess-of-mass selection.
//!
//! MST edges of exactly equal weight are merged in one step, so the
//! hierarchy (and therefore the partition) does not depend on which of
//! several equal-weight spanning trees Prim happened to pick, nor on the
//! order of the input points. Stability sums are taken over value-sorted
//! terms for the same reason.

use super::{ClusteringParams, DistanceMatrix};
use crate::union_find::UnionFind;

/// `(min_samples - 1)`-th smallest entry of each row, counting the zero
/// self-distance, so `min_samples = 2` gives the nearest other point.
pub fn core_distances(dm: &DistanceMatrix, min_samples: usize) -> Vec<f64> {
    let n = dm.len();
    let k = min_samples.saturating_sub(1).min(n.saturating_sub(1));
    let mut scratch = vec![0.0; n];
    (0..n)
        .map(|i| {
            scratch.copy_from_slice(dm.row(i));
            let (_, kth, _) = scratch.select_nth_unstable_by(k, f64::total_cmp);
            *kth
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub weight: f64,
    pub lo: usize,
    pub hi: usize,
}

fn edge_key(weight: f64, a: usize, b: usize) -> (f64, usize, usize) {
    (weight, a.min(b), a.max(b))
}

fn key_less(x: (f64, usize, usize), y: (f64, usize, usize)) -> bool {
    x.0.total_cmp(&y.0)
        .then(x.1.cmp(&y.1))
        .then(x.2.cmp(&y.2))
        .is_lt()
}

/// Minimum spanning tree of the mutual-reachability graph, sorted by
/// `(weight, lo, hi)`.
pub fn mutual_reachability_mst(dm: &DistanceMatrix, core: &[f64]) -> Vec<MstEdge> {
    let n = dm.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX, usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut cur = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let row = dm.row(cur);
        let mut pick = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = row[v].max(core[cur]).max(core[v]);
            let cand = edge_key(w, cur, v);
            if key_less(cand, best[v]) {
                best[v] = cand;
            }
            if pick == usize::MAX || key_less(best[v], best[pick]) {
                pick = v;
            }
        }
        let (weight, lo, hi) = best[pick];
        edges.push(MstEdge { weight, lo, hi });
        in_tree[pick] = true;
        cur = pick;
    }
    edges.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.lo.cmp(&b.lo))
            .then(a.hi.cmp(&b.hi))
    });
    edges
}

/// Internal node of the single-linkage hierarchy. Node ids below `n` are
/// the points themselves.
#[derive(Debug, Clone)]
struct Merge {
    weight: f64,
    size: usize,
    /// Child node ids ordered by their smallest point.
    children: Vec<usize>,
}

struct Hierarchy {
    n: usize,
    merges: Vec<Merge>,
    min_point: Vec<usize>,
}

impl Hierarchy {
    fn build(n: usize, edges: &[MstEdge]) -> Hierarchy {
        let mut merges: Vec<Merge> = Vec::new();
        let mut min_point: Vec<usize> = (0..n).collect();
        let mut uf = UnionFind::new(n);
        let mut node_of: Vec<usize> = (0..n).collect();
        let mut start = 0;
        while start < edges.len() {
            let w = edges[start].weight;
            let end = start
                + edges[start..]
                    .iter()
                    .take_while(|e| e.weight.total_cmp(&w).is_eq())
                    .count();
            let group = &edges[start..end];
            let pairs: Vec<(usize, usize)> = group
                .iter()
                .map(|e| (node_of[uf.find(e.lo)], node_of[uf.find(e.hi)]))
                .collect();
            let mut ids: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            ids.sort_unstable();
            ids.dedup();
            let mut local = UnionFind::new(ids.len());
            let pos = |x: usize| ids.binary_search(&x).expect("node listed");
            for &(a, b) in &pairs {
                local.union(pos(a), pos(b));
            }
            let mut created = Vec::new();
            for g in local.groups() {
                let mut children: Vec<usize> = g.into_iter().map(|p| ids[p]).collect();
                children.sort_by_key(|&c| min_point[c]);
                let size = children.iter().map(|&c| node_size(n, &merges, c)).sum();
                let id = n + merges.len();
                min_point.push(min_point[children[0]]);
                created.push((id, min_point[id]));
                merges.push(Merge {
                    weight: w,
                    size,
                    children,
                });
            }
            for e in group {
                uf.union(e.lo, e.hi);
            }
            for (id, p) in created {
                let root = uf.find(p);
                node_of[root] = id;
            }
            start = end;
        }
        Hierarchy {
            n,
            merges,
            min_point,
        }
    }

    fn root(&self) -> usize {
        self.n + self.merges.len() - 1
    }

    fn size(&self, node: usize) -> usize {
        node_size(self.n, &self.merges, node)
    }

    fn merge(&self, node: usize) -> &Merge {
        &self.merges[node - self.n]
    }

    fn points(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(h) = stack.pop() {
            if h < self.n {
                out.push(h);
            } else {
                stack.extend(&self.merge(h).children);
            }
        }
    }
}

fn node_size(n: usize, merges: &[Merge], node: usize) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].size
    }
}

fn lambda(weight: f64) -> f64 {
    if weight > 0.0 {
        1.0 / weight
    } else {
        f64::INFINITY
    }
}

/// Order-independent sum: terms are added in ascending value order.
pub fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// A cluster of the condensed tree.
#[derive(Debug, Clone)]
pub struct CondensedCluster {
    pub parent: Option<usize>,
    pub birth: f64,
    pub children: Vec<usize>,
    /// Every point of the cluster with the lambda at which it leaves.
    pub exits: Vec<(usize, f64)>,
}

impl CondensedCluster {
    pub fn stability(&self) -> f64 {
        canonical_sum(self.exits.iter().map(|&(_, l)| l - self.birth).collect())
    }
}

fn condense(h: &Hierarchy, mcs: usize) -> Vec<CondensedCluster> {
    let mut clusters = vec![CondensedCluster {
        parent: None,
        birth: 0.0,
        children: Vec::new(),
        exits: Vec::new(),
    }];
    let mut stack = vec![(h.root(), 0usize)];
    let mut buf = Vec::new();
    while let Some((node, c)) = stack.pop() {
        if node < h.n {
            // Only reachable with a minimum cluster size of one.
            clusters[c].exits.push((node, f64::INFINITY));
            continue;
        }
        let merge = h.merge(node);
        let lam = lambda(merge.weight);
        let big: Vec<usize> = merge
            .children
            .iter()
            .copied()
            .filter(|&ch| h.size(ch) >= mcs)
            .collect();
        let mut pending = Vec::new();
        for &ch in &merge.children {
            let is_big = big.contains(&ch);
            if is_big && big.len() == 1 {
                pending.push((ch, c));
                continue;
            }
            buf.clear();
            h.points(ch, &mut buf);
            clusters[c].exits.extend(buf.iter().map(|&p| (p, lam)));
            if is_big {
                let id = clusters.len();
                clusters.push(CondensedCluster {
                    parent: Some(c),
                    birth: lam,
                    children: Vec::new(),
                    exits: Vec::new(),
                });
                clusters[c].children.push(id);
                pending.push((ch, id));
            }
        }
        // Reverse so the first child is expanded first.
        stack.extend(pending.into_iter().rev());
    }
    for c in &mut clusters {
        c.exits.sort_unstable_by_key(|&(p, _)| p);
    }
    clusters
}

/// Excess-of-mass selection; returns one flag per condensed cluster.
fn select_eom(clusters: &[CondensedCluster], allow_single_cluster: bool) -> Vec<bool> {
    let m = clusters.len();
    let mut selected = vec![false; m];
    let mut value = vec![0.0; m];
    for c in (0..m).rev() {
        let own = clusters[c].stability();
        let kids = &clusters[c].children;
        if c == 0 && !allow_single_cluster {
            break;
        }
        if kids.is_empty() {
            selected[c] = true;
            value[c] = own;
            continue;
        }
        let below = canonical_sum(kids.iter().map(|&k| value[k]).collect());
        if below > own {
            value[c] = below;
        } else {
            value[c] = own;
            selected[c] = true;
            let mut stack = kids.clone();
            while let Some(k) = stack.pop() {
                selected[k] = false;
                stack.extend(&clusters[k].children);
            }
        }
    }
    if !allow_single_cluster {
        selected[0] = false;
    }
    selected
}

/// Cluster label per point (`None` for noise); ids follow smallest member.
pub fn hdbscan_labels(dm: &DistanceMatrix, params: &ClusteringParams) -> Vec<Option<usize>> {
    let n = dm.len();
    let mcs = params.min_cluster_size;
    let ms = params.min_samples();
    let mut labels = vec![None; n];
    if n == 0 || n < mcs.max(ms) {
        return labels;
    }
    let core = core_distances(dm, ms);
    let edges = mutual_reachability_mst(dm, &core);
    if edges.is_empty() {
        return labels;
    }
    let h = Hierarchy::build(n, &edges);
    debug_assert_eq!(h.size(h.root()), n);
    debug_assert_eq!(h.min_point[h.root()], 0);
    let clusters = condense(&h, mcs);
    let selected = select_eom(&clusters, params.allow_single_cluster);
    let mut groups: Vec<Vec<usize>> = clusters
        .iter()
        .zip(&selected)
        .filter(|(_, &s)| s)
        .map(|(c, _)| c.exits.iter().map(|&(p, _)| p).collect())
        .collect();
    groups.sort_by_key(|g: &Vec<usize>| g[0]);
    for (id, g) in groups.iter().enumerate() {
        for &p in g {
            labels[p] = Some(id);
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{pairwise_distance, Metric};

    fn run(points: &[Vec<f64>], metric: Metric, allow_single: bool) -> Vec<Option<usize>> {
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        let dm = pairwise_distance(&refs, metric).unwrap();
        let params = ClusteringParams {
            metric,
            allow_single_cluster: allow_single,
            ..ClusteringParams::default()
        };
        hdbscan_labels(&dm, &params)
    }

    fn tight_pairs() -> Vec<Vec<f64>> {
        vec![
            vec![1.0, 0.0],
            vec![0.999, 0.01],
            vec![-1.0, 0.0],
            vec![-0.999, -0.01],
        ]
    }

    #[test]
    fn two_tight_pairs() {
        let l = run(&tight_pairs(), Metric::Cosine, true);
        assert_eq!(l, vec![Some(0), Some(0), Some(1), Some(1)]);
    }

    #[test]
    fn orthogonal_point_joins_nearest_pair() {
        let mut pts = tight_pairs();
        pts.push(vec![0.0, 1.0]);
        let l = run(&pts, Metric::Cosine, true);
        assert_eq!(l, vec![Some(0), Some(0), Some(1), Some(1), Some(0)]);
    }

    #[test]
    fn far_point_is_noise() {
        let pts = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.999, 0.01, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.01, 0.999, 0.0],
            vec![-1.0, -1.0, 0.05],
        ];
        let l = run(&pts, Metric::Cosine, true);
        assert_eq!(l, vec![Some(0), Some(0), Some(1), Some(1), None]);
    }

    #[test]
    fn euclidean_blobs_with_outlier() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![5.0, 5.2],
            vec![20.0, -3.0],
        ];
        let l = run(&pts, Metric::Euclidean, true);
        assert_eq!(l, vec![Some(0), Some(0), Some(1), Some(1), Some(1), None]);
    }

    #[test]
    fn single_point_and_single_pair() {
        assert_eq!(run(&[vec![1.0, 2.0]], Metric::Cosine, true), vec![None]);
        let pair = vec![vec![1.0, 0.0], vec![0.99, 0.05]];
        assert_eq!(run(&pair, Metric::Cosine, true), vec![Some(0), Some(0)]);
        assert_eq!(run(&pair, Metric::Cosine, false), vec![None, None]);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![vec![0.3, 0.4, 0.5]; 4];
        assert_eq!(run(&pts, Metric::Cosine, true), vec![Some(0); 4]);
        assert_eq!(run(&pts, Metric::Cosine, false), vec![None; 4]);
    }

    #[test]
    fn two_duplicate_groups_split() {
        let pts = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ];
        assert_eq!(
            run(&pts, Metric::Euclidean, true),
            vec![Some(0), Some(1), Some(0), Some(1)]
        );
    }

    fn cluster(
        parent: Option<usize>,
        birth: f64,
        children: Vec<usize>,
        exits: &[f64],
    ) -> CondensedCluster {
        CondensedCluster {
            parent,
            birth,
            children,
            exits: exits.iter().enumerate().map(|(p, &l)| (p, l)).collect(),
        }
    }

    #[test]
    fn parent_wins_stability_ties() {
        // Root stability 2, each child 1: the children do not beat the parent.
        let tied = vec![
            cluster(None, 0.0, vec![1, 2], &[0.5, 0.5, 0.5, 0.5]),
            cluster(Some(0), 0.5, vec![], &[1.5, 0.5]),
            cluster(Some(0), 0.5, vec![], &[1.0, 1.0]),
        ];
        assert_eq!(select_eom(&tied, true), vec![true, false, false]);
        assert_eq!(select_eom(&tied, false), vec![false, true, true]);
        let mut split = tied.clone();
        split[2].exits[0].1 = 1.25;
        assert_eq!(select_eom(&split, true), vec![false, true, true]);
    }

    #[test]
    fn core_distance_counts_self() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 3.0].iter().map(|&x| vec![x]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let dm = pairwise_distance(&refs, Metric::Euclidean).unwrap();
        assert_eq!(core_distances(&dm, 1), vec![0.0, 0.0, 0.0]);
        assert_eq!(core_distances(&dm, 2), vec![1.0, 1.0, 2.0]);
        assert_eq!(core_distances(&dm, 3), vec![3.0, 2.0, 3.0]);
    }

    #[test]
    fn mst_weights_are_mutual_reachability() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 3.0, 7.0].iter().map(|&x| vec![x]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let dm = pairwise_distance(&refs, Metric::Euclidean).unwrap();
        let core = core_distances(&dm, 2);
        let mst = mutual_reachability_mst(&dm, &core);
        let w: Vec<f64> = mst.iter().map(|e| e.weight).collect();
        assert_eq!(w, vec![1.0, 2.0, 4.0]);
        assert_eq!((mst[2].lo, mst[2].hi), (2, 3));
    }
}
