//! Mapper graphs over labeled embedding sets.
//!
//! The pipeline fits lens statistics on a training split, projects test
//! embeddings through a lens into `[0, 1]^k`, covers that box with
//! overlapping bins, clusters each bin's preimage with HDBSCAN, and joins
//! clusters that share instances into a graph. Purity metrics then measure
//! how well gold and predicted labels line up with the graph's components.

pub mod clustering;
pub mod cover;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod lenses;
pub mod linalg;
pub mod mapper;
pub mod metrics;
pub mod union_find;

pub use clustering::{
    cluster_all_bins, hdbscan, noise_rate, pairwise_distance, BinClustering, ClusteringParams,
    DistanceMatrix, Metric,
};
pub use cover::{assign_bins, build_cover, Bin, Cover, CoverSpec};
pub use dataset::{
    filter_by_agreement, join, Agreement, Channel, EmbeddingDataset, EmbeddingMatrix, Label,
    LabelRecord,
};
pub use error::{Error, Result};
pub use graph::{
    build_graph, connected_components, node_majority, MapperGraph, MapperNode, NodeClass,
};
pub use lenses::{evaluate_lens, fit_train_stats, LensKind, LensSpec, LensValues, TrainStatistics};
pub use mapper::{run_mapper, MapperRun};
pub use metrics::{
    aggregate_over_lenses, component_purity, edge_agreement, majority_match,
    purity_threshold_summary, MetricsReport, Summary,
};
