//! End-to-end Mapper on precomputed lens values.

use crate::clustering::{cluster_all_bins, noise_rate, BinClustering, ClusteringParams};
use crate::cover::{assign_bins, build_cover, Cover, CoverSpec};
use crate::dataset::{Channel, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::graph::{build_graph, MapperGraph};
use crate::lenses::LensValues;
use crate::metrics::MetricsReport;

#[derive(Debug, Clone)]
pub struct MapperRun {
    pub cover: Cover,
    pub assignments: Vec<Vec<usize>>,
    pub clusterings: Vec<BinClustering>,
    pub graph: MapperGraph,
    pub noise_rate: f64,
}

/// Covers the lens image, clusters every bin and builds the nerve graph.
pub fn run_mapper(
    ds: &EmbeddingDataset,
    values: &LensValues,
    r: usize,
    epsilon: f64,
    params: &ClusteringParams,
) -> Result<MapperRun> {
    if values.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: values.len(),
        });
    }
    let cover = build_cover(CoverSpec::new(values.dims(), r, epsilon)?)?;
    let assignments = assign_bins(values, &cover)?;
    let clusterings = cluster_all_bins(ds, &assignments, params)?;
    let graph = build_graph(&clusterings);
    let noise_rate = noise_rate(ds.len(), &clusterings);
    Ok(MapperRun {
        cover,
        assignments,
        clusterings,
        graph,
        noise_rate,
    })
}

impl MapperRun {
    /// Metrics under gold labels, plus the prediction channel when present.
    pub fn report(&self, ds: &EmbeddingDataset, threshold: f64) -> Result<MetricsReport> {
        let gold = ds.channel(Channel::Gold)?;
        let pred = ds.pred();
        MetricsReport::compute(
            &self.graph,
            &gold,
            pred.as_deref(),
            self.noise_rate,
            threshold,
        )
    }
}
