//! Nerve graph of the per-bin clusters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::BinClustering;
use crate::dataset::Label;
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapperNode {
    pub id: usize,
    pub bin: usize,
    /// Cluster id within the bin.
    pub cluster: usize,
    /// Dataset row indices, ascending and unique.
    pub members: Vec<usize>,
}

impl MapperNode {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub shared_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapperGraph {
    pub nodes: Vec<MapperNode>,
    /// Sorted by `(a, b)` with `a < b`.
    pub edges: Vec<Edge>,
    /// Sorted node ids per component, ordered by smallest id.
    pub components: Vec<Vec<usize>>,
}

/// One node per (bin, cluster), ordered by bin then cluster id; an edge for
/// every pair of nodes sharing at least one row.
pub fn build_graph(clusterings: &[BinClustering]) -> MapperGraph {
    let mut sorted: Vec<&BinClustering> = clusterings.iter().collect();
    sorted.sort_by_key(|bc| bc.bin);
    let mut nodes = Vec::new();
    for bc in sorted {
        for (cluster, mut members) in bc.clusters().into_iter().enumerate() {
            members.sort_unstable();
            members.dedup();
            nodes.push(MapperNode {
                id: nodes.len(),
                bin: bc.bin,
                cluster,
                members,
            });
        }
    }
    let edges = edges_from_members(&nodes);
    let components = components_of(nodes.len(), &edges);
    MapperGraph {
        nodes,
        edges,
        components,
    }
}

fn edges_from_members(nodes: &[MapperNode]) -> Vec<Edge> {
    let mut by_row: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in nodes {
        for &row in &node.members {
            by_row.entry(row).or_default().push(node.id);
        }
    }
    let mut shared: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for ids in by_row.values() {
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                *shared.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
    }
    shared
        .into_iter()
        .map(|((a, b), shared_count)| Edge { a, b, shared_count })
        .collect()
}

fn components_of(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for e in edges {
        uf.union(e.a, e.b);
    }
    uf.groups()
}

/// Recomputes components from the edge list.
pub fn connected_components(g: &MapperGraph) -> Vec<Vec<usize>> {
    components_of(g.nodes.len(), &g.edges)
}

impl MapperGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn singleton_count(&self) -> usize {
        self.components.iter().filter(|c| c.len() == 1).count()
    }

    /// Multiset of rows over the component's nodes; a row in two nodes
    /// appears twice.
    pub fn component_points(&self, component: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = component
            .iter()
            .flat_map(|&id| self.nodes[id].members.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    Class(Label),
    Mixed,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Class(Label::Zero) => "0",
            NodeClass::Class(Label::One) => "1",
            NodeClass::Mixed => "mixed",
        }
    }

    pub fn is_mixed(self) -> bool {
        self == NodeClass::Mixed
    }

    /// Agreement in the conservative sense: equal, and neither is mixed.
    pub fn agrees(self, other: NodeClass) -> bool {
        !self.is_mixed() && self == other
    }
}

/// Strict-majority class of a list of row indices; an exact tie is mixed.
pub fn majority_of(rows: &[usize], labels: &[Label]) -> NodeClass {
    let ones = rows.iter().filter(|&&r| labels[r] == Label::One).count();
    let zeros = rows.len() - ones;
    match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => NodeClass::Class(Label::One),
        std::cmp::Ordering::Less => NodeClass::Class(Label::Zero),
        std::cmp::Ordering::Equal => NodeClass::Mixed,
    }
}

pub fn node_majority(node: &MapperNode, labels: &[Label]) -> NodeClass {
    majority_of(&node.members, labels)
}
