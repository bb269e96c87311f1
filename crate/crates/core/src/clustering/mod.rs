//! Per-bin density clustering in the original embedding space.

pub mod hdbscan;

use std::collections::BTreeMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::linalg::{cosine_distance_with_norms, norm, squared_euclidean};

pub use hdbscan::hdbscan_labels;

/// Rows above which the distance matrix is filled in parallel.
const PARALLEL_ROWS: usize = 256;
/// Rows per side of a distance tile.
const TILE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringParams {
    pub min_cluster_size: usize,
    /// Defaults to `min_cluster_size` when unset.
    pub min_samples: Option<usize>,
    pub metric: Metric,
    /// Whether the root of the condensed tree may be selected as a cluster.
    pub allow_single_cluster: bool,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            min_samples: None,
            metric: Metric::Cosine,
            allow_single_cluster: true,
        }
    }
}

impl ClusteringParams {
    pub fn min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "min_cluster_size must be at least 2, got {}",
                self.min_cluster_size
            )));
        }
        if self.min_samples() < 1 {
            return Err(Error::InvalidParameter(
                "min_samples must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Dense symmetric distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from a full row-major matrix; the caller guarantees symmetry
    /// and a zero diagonal.
    pub fn from_full(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Pairwise distances. Cosine distances are clamped to `[0, 2]` and need
/// nonzero norms; a zero-norm vector is reported by its position.
pub fn pairwise_distance(points: &[&[f64]], metric: Metric) -> Result<DistanceMatrix> {
    let n = points.len();
    let norms: Vec<f64> = match metric {
        Metric::Cosine => points
            .iter()
            .enumerate()
            .map(|(row, p)| {
                let len = norm(p);
                if len == 0.0 {
                    Err(Error::ZeroNorm { row })
                } else {
                    Ok(len)
                }
            })
            .collect::<Result<_>>()?,
        Metric::Euclidean => Vec::new(),
    };
    let dist = |i: usize, j: usize| -> f64 {
        match metric {
            Metric::Cosine => cosine_distance_with_norms(points[i], points[j], norms[i], norms[j]),
            Metric::Euclidean => squared_euclidean(points[i], points[j]).sqrt(),
        }
    };
    // Upper triangle first, then mirrored, so d(i, j) and d(j, i) are the same bits.
    // Rows are handled in square tiles so both blocks stay cache resident.
    let upper_tile = |t: usize| -> Vec<Vec<f64>> {
        let rows = t * TILE..((t + 1) * TILE).min(n);
        let mut out: Vec<Vec<f64>> = rows
            .clone()
            .map(|i| Vec::with_capacity(n - i - 1))
            .collect();
        for cols in (t * TILE..n).step_by(TILE) {
            for (k, i) in rows.clone().enumerate() {
                for j in cols.max(i + 1)..(cols + TILE).min(n) {
                    out[k].push(dist(i, j));
                }
            }
        }
        out
    };
    let tiles = n.div_ceil(TILE);
    let upper: Vec<Vec<f64>> = if n > PARALLEL_ROWS {
        (0..tiles)
            .into_par_iter()
            .flat_map_iter(upper_tile)
            .collect()
    } else {
        (0..tiles).flat_map(upper_tile).collect()
    };
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, data })
}

/// Clusters a point list directly.
pub fn hdbscan(points: &[&[f64]], params: &ClusteringParams) -> Result<Vec<Option<usize>>> {
    params.validate()?;
    let dm = pairwise_distance(points, params.metric)?;
    Ok(hdbscan_labels(&dm, params))
}

/// Clustering result of one nonempty bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinClustering {
    pub bin: usize,
    /// Dataset row indices of the bin members, ascending.
    pub members: Vec<usize>,
    /// Cluster id per member, `None` for noise.
    pub labels: Vec<Option<usize>>,
}

impl BinClustering {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |m| m + 1)
    }

    /// Dataset rows of every cluster, indexed by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (&row, label) in self.members.iter().zip(&self.labels) {
            if let Some(c) = label {
                out[*c].push(row);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

/// Clusters every nonempty bin independently; results are ordered by bin.
pub fn cluster_all_bins(
    ds: &EmbeddingDataset,
    assignments: &[Vec<usize>],
    params: &ClusteringParams,
) -> Result<Vec<BinClustering>> {
    params.validate()?;
    if assignments.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: assignments.len(),
        });
    }
    let mut by_bin: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (row, bins) in assignments.iter().enumerate() {
        for &b in bins {
            by_bin.entry(b).or_default().push(row);
        }
    }
    let bins: Vec<(usize, Vec<usize>)> = by_bin.into_iter().collect();
    bins.into_par_iter()
        .map(|(bin, members)| {
            let points: Vec<&[f64]> = members.iter().map(|&i| ds.row(i)).collect();
            let dm = pairwise_distance(&points, params.metric).map_err(|e| match e {
                Error::ZeroNorm { row } => Error::ZeroNorm { row: members[row] },
                other => other,
            })?;
            let labels = hdbscan_labels(&dm, params);
            Ok(BinClustering {
                bin,
                members,
                labels,
            })
        })
        .collect()
}

/// Whether each of `n` rows belongs to at least one cluster.
pub fn clustered_mask(n: usize, clusterings: &[BinClustering]) -> Vec<bool> {
    let mut seen = vec![false; n];
    for bc in clusterings {
        for (&row, label) in bc.members.iter().zip(&bc.labels) {
            if label.is_some() {
                seen[row] = true;
            }
        }
    }
    seen
}

/// Fraction of the `n` rows that are noise in every bin they fall into.
pub fn noise_rate(n: usize, clusterings: &[BinClustering]) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let noise = clustered_mask(n, clusterings)
        .iter()
        .filter(|&&c| !c)
        .count();
    noise as f64 / n as f64
}

/// `(bin, members, noise)` per clustered bin.
pub fn per_bin_noise(clusterings: &[BinClustering]) -> Vec<(usize, usize, usize)> {
    clusterings
        .iter()
        .map(|bc| (bc.bin, bc.members.len(), bc.noise_count()))
        .collect()
}
