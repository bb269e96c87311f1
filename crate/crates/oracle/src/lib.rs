//! Deliberately naive reference Mapper used to cross-check the real one.
//!
//! Everything here favours obviousness over speed: every bin is tested
//! against every point, the HDBSCAN hierarchy is found by threshold search
//! with breadth-first connectivity, edges come from comparing every node
//! pair, and metrics are plain counting loops. Inputs are expected to be
//! small (a few hundred points).

use std::collections::VecDeque;

/// Expanded interval `i` of one dimension.
pub fn interval(i: usize, r: usize, epsilon: f64) -> (f64, f64) {
    let r = r as f64;
    let pad = epsilon / (2.0 * r);
    (i as f64 / r - pad, (i + 1) as f64 / r + pad)
}

/// Flat row-major indices of every bin whose closed box holds `v`,
/// found by checking all `r^k` bins.
pub fn bins_containing(v: &[f64], r: usize, epsilon: f64) -> Vec<usize> {
    let k = v.len();
    let total = r.pow(k as u32);
    (0..total)
        .filter(|&flat| {
            let mut rest = flat;
            let mut idx = vec![0; k];
            for d in (0..k).rev() {
                idx[d] = rest % r;
                rest /= r;
            }
            idx.iter().zip(v).all(|(&i, &x)| {
                let (lo, hi) = interval(i, r, epsilon);
                lo <= x && x <= hi
            })
        })
        .collect()
}

fn sum_sorted(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Connected pieces of `set` using only pairs with `weight(a, b) < limit`
/// (or `<=` when `inclusive`), each sorted, ordered by smallest member.
fn pieces(set: &[usize], mr: &[Vec<f64>], limit: f64, inclusive: bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; set.len()];
    let mut out = Vec::new();
    for start in 0..set.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut piece = vec![set[start]];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 0..set.len() {
                let w = mr[set[u]][set[v]];
                let ok = if inclusive { w <= limit } else { w < limit };
                if !seen[v] && ok {
                    seen[v] = true;
                    piece.push(set[v]);
                    queue.push_back(v);
                }
            }
        }
        piece.sort_unstable();
        out.push(piece);
    }
    out.sort_by_key(|p| p[0]);
    out
}

/// Smallest mutual-reachability level at which `set` is connected.
fn join_level(set: &[usize], mr: &[Vec<f64>]) -> f64 {
    let mut levels: Vec<f64> = Vec::new();
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i + 1..] {
            levels.push(mr[a][b]);
        }
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pieces(set, mr, levels[mid], true).len() == 1 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    levels[lo]
}

struct Cluster {
    birth: f64,
    points: Vec<usize>,
    exits: Vec<f64>,
    children: Vec<usize>,
}

struct Tree {
    clusters: Vec<Cluster>,
    mr: Vec<Vec<f64>>,
    mcs: usize,
}

impl Tree {
    /// Follows `set` (already part of cluster `c`) down the hierarchy.
    fn descend(&mut self, set: Vec<usize>, c: usize) {
        let level = join_level(&set, &self.mr);
        let lam = if level > 0.0 {
            1.0 / level
        } else {
            f64::INFINITY
        };
        let parts = pieces(&set, &self.mr, level, false);
        let big: Vec<&Vec<usize>> = parts.iter().filter(|p| p.len() >= self.mcs).collect();
        if big.len() == 1 {
            let keep = big[0].clone();
            for p in &parts {
                if p[0] != keep[0] {
                    self.leave(c, p, lam);
                }
            }
            self.descend(keep, c);
            return;
        }
        let mut spawned = Vec::new();
        for p in &parts {
            self.leave(c, p, lam);
            if p.len() >= self.mcs {
                let id = self.clusters.len();
                self.clusters.push(Cluster {
                    birth: lam,
                    points: p.clone(),
                    exits: Vec::new(),
                    children: Vec::new(),
                });
                self.clusters[c].children.push(id);
                spawned.push((p.clone(), id));
            }
        }
        for (p, id) in spawned {
            self.descend(p, id);
        }
    }

    fn leave(&mut self, c: usize, points: &[usize], lam: f64) {
        let birth = self.clusters[c].birth;
        self.clusters[c]
            .exits
            .extend(points.iter().map(|_| lam - birth));
    }

    fn stability(&self, c: usize) -> f64 {
        sum_sorted(self.clusters[c].exits.clone())
    }

    /// (best achievable stability, selected clusters) for the subtree at `c`.
    fn best(&self, c: usize) -> (f64, Vec<usize>) {
        let own = self.stability(c);
        if self.clusters[c].children.is_empty() {
            return (own, vec![c]);
        }
        let results: Vec<(f64, Vec<usize>)> = self.clusters[c]
            .children
            .iter()
            .map(|&k| self.best(k))
            .collect();
        let below = sum_sorted(results.iter().map(|r| r.0).collect());
        if below > own {
            (below, results.into_iter().flat_map(|r| r.1).collect())
        } else {
            (own, vec![c])
        }
    }
}

/// Reference HDBSCAN on a full distance matrix. Returns a cluster id per
/// point (`None` for noise), ids ordered by smallest member.
pub fn hdbscan(
    dist: &[Vec<f64>],
    min_cluster_size: usize,
    min_samples: usize,
    allow_single_cluster: bool,
) -> Vec<Option<usize>> {
    let n = dist.len();
    let mut labels = vec![None; n];
    if n == 0 || n < min_cluster_size.max(min_samples) || n < 2 {
        return labels;
    }
    let core: Vec<f64> = dist
        .iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            sorted[(min_samples - 1).min(n - 1)]
        })
        .collect();
    let mr: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    if a == b {
                        0.0
                    } else {
                        dist[a][b].max(core[a]).max(core[b])
                    }
                })
                .collect()
        })
        .collect();
    let mut tree = Tree {
        clusters: vec![Cluster {
            birth: 0.0,
            points: (0..n).collect(),
            exits: Vec::new(),
            children: Vec::new(),
        }],
        mr,
        mcs: min_cluster_size,
    };
    tree.descend((0..n).collect(), 0);
    let chosen: Vec<usize> = if allow_single_cluster {
        tree.best(0).1
    } else {
        let kids = tree.clusters[0].children.clone();
        kids.into_iter().flat_map(|k| tree.best(k).1).collect()
    };
    let mut groups: Vec<Vec<usize>> = chosen
        .iter()
        .map(|&c| tree.clusters[c].points.clone())
        .collect();
    groups.sort_by_key(|g| g[0]);
    for (id, g) in groups.iter().enumerate() {
        for &p in g {
            labels[p] = Some(id);
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub bin: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub nodes: Vec<Node>,
    /// `(a, b, shared)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize, usize)>,
    pub components: Vec<Vec<usize>>,
}

/// Parameters of the reference pipeline.
#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub r: usize,
    pub epsilon: f64,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub allow_single_cluster: bool,
}

/// Reference Mapper. `lens[i]` is the lens value of point `i`, and
/// `dist(i, j)` the distance between points `i` and `j`.
pub fn mapper(lens: &[Vec<f64>], dist: &dyn Fn(usize, usize) -> f64, p: Params) -> Graph {
    let n = lens.len();
    let k = lens.first().map_or(1, Vec::len);
    let mut nodes = Vec::new();
    for bin in 0..p.r.pow(k as u32) {
        let members: Vec<usize> = (0..n)
            .filter(|&i| bins_containing(&lens[i], p.r, p.epsilon).contains(&bin))
            .collect();
        if members.is_empty() {
            continue;
        }
        let local: Vec<Vec<f64>> = members
            .iter()
            .map(|&a| {
                members
                    .iter()
                    .map(|&b| if a == b { 0.0 } else { dist(a, b) })
                    .collect()
            })
            .collect();
        let labels = hdbscan(
            &local,
            p.min_cluster_size,
            p.min_samples,
            p.allow_single_cluster,
        );
        let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
        for c in 0..count {
            let rows = members
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == Some(c))
                .map(|(&m, _)| m)
                .collect();
            nodes.push(Node { bin, members: rows });
        }
    }
    let mut edges = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let shared = nodes[a]
                .members
                .iter()
                .filter(|x| nodes[b].members.contains(x))
                .count();
            if shared > 0 {
                edges.push((a, b, shared));
            }
        }
    }
    let components = components(nodes.len(), &edges);
    Graph {
        nodes,
        edges,
        components,
    }
}

/// Breadth-first components, each sorted, ordered by smallest node.
pub fn components(n: usize, edges: &[(usize, usize, usize)]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &(a, b, _) in edges {
                let v = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Majority label of a list of rows: `Some(label)` on a strict majority,
/// `None` on a tie.
pub fn majority(rows: &[usize], labels: &[u8]) -> Option<u8> {
    let ones = rows.iter().filter(|&&r| labels[r] == 1).count();
    let zeros = rows.len() - ones;
    if ones > zeros {
        Some(1)
    } else if zeros > ones {
        Some(0)
    } else {
        None
    }
}

fn component_rows(g: &Graph, comp: &[usize]) -> Vec<usize> {
    let mut rows = Vec::new();
    for &id in comp {
        rows.extend_from_slice(&g.nodes[id].members);
    }
    rows
}

/// Purity of each component: dominant-label count over the multiset size.
pub fn component_purity(g: &Graph, labels: &[u8]) -> Vec<f64> {
    g.components
        .iter()
        .map(|comp| {
            let rows = component_rows(g, comp);
            let ones = rows.iter().filter(|&&r| labels[r] == 1).count();
            let zeros = rows.len() - ones;
            ones.max(zeros) as f64 / rows.len() as f64
        })
        .collect()
}

pub fn edge_agreement(g: &Graph, labels: &[u8]) -> Option<f64> {
    if g.edges.is_empty() {
        return None;
    }
    let mut agree = 0;
    for &(a, b, _) in &g.edges {
        let ma = majority(&g.nodes[a].members, labels);
        let mb = majority(&g.nodes[b].members, labels);
        if ma.is_some() && ma == mb {
            agree += 1;
        }
    }
    Some(agree as f64 / g.edges.len() as f64)
}

pub fn majority_match(g: &Graph, gold: &[u8], pred: &[u8]) -> Option<f64> {
    if g.components.is_empty() {
        return None;
    }
    let mut hits = 0;
    for comp in &g.components {
        let rows = component_rows(g, comp);
        let mg = majority(&rows, gold);
        if mg.is_some() && mg == majority(&rows, pred) {
            hits += 1;
        }
    }
    Some(hits as f64 / g.components.len() as f64)
}

pub fn percent_at_least(purities: &[f64], threshold: f64) -> Option<f64> {
    if purities.is_empty() {
        return None;
    }
    let hits = purities.iter().filter(|&&p| p >= threshold).count();
    Some(100.0 * hits as f64 / purities.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|a| {
                points
                    .iter()
                    .map(|b| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn reference_hdbscan_on_blobs() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
            vec![5.0, 5.2],
            vec![20.0, -3.0],
        ];
        let l = hdbscan(&euclid(&pts), 2, 2, true);
        assert_eq!(l, vec![Some(0), Some(0), Some(1), Some(1), Some(1), None]);
    }

    #[test]
    fn reference_cover() {
        assert_eq!(bins_containing(&[0.26], 4, 0.3), vec![0, 1]);
        assert_eq!(bins_containing(&[0.5], 2, 0.0), vec![0, 1]);
        assert_eq!(bins_containing(&[0.5, 0.1], 2, 0.0), vec![0, 2]);
    }

    #[test]
    fn reference_metrics() {
        let g = Graph {
            nodes: vec![
                Node {
                    bin: 0,
                    members: vec![0, 1],
                },
                Node {
                    bin: 1,
                    members: vec![1, 2],
                },
            ],
            edges: vec![(0, 1, 1)],
            components: vec![vec![0, 1]],
        };
        assert_eq!(component_purity(&g, &[1, 1, 0]), vec![0.75]);
        assert_eq!(edge_agreement(&g, &[1, 1, 0]), Some(0.0));
        assert_eq!(majority_match(&g, &[1, 1, 0], &[1, 1, 1]), Some(1.0));
    }
}
