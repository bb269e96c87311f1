//! Single runs and sweeps, from input files to an output directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use mapper_core::clustering::per_bin_noise;
use mapper_core::cover::{build_cover, CoverSpec};
use mapper_core::dataset::{load_embeddings, load_labels, EmbeddingFormat};
use mapper_core::error::JoinSide;
use mapper_core::metrics::{aggregate_over_lenses, Summary};
use mapper_core::{
    evaluate_lens, join, run_mapper, EmbeddingDataset, Error as CoreError, LabelRecord, LensKind,
    LensSpec, LensValues, MetricsReport, TrainStatistics,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExportFormat, LabelSource, RunConfig, Snapshot, SweepConfig};
use crate::export::{self, GraphContext, MetricsRow};

/// Train and test splits joined with their labels.
pub struct Inputs {
    pub train: EmbeddingDataset,
    pub test: EmbeddingDataset,
}

fn load_matrix(path: &Path) -> Result<mapper_core::EmbeddingMatrix> {
    load_embeddings(path, EmbeddingFormat::from_path(path))
        .with_context(|| format!("loading embeddings from {}", path.display()))
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let train_m = load_matrix(&cfg.train)?;
    let test_m = load_matrix(&cfg.test)?;
    if train_m.dim() != test_m.dim() {
        bail!(
            "train embeddings have dimension {} but test embeddings have {}",
            train_m.dim(),
            test_m.dim()
        );
    }
    let read =
        |p: &Path| load_labels(p).with_context(|| format!("loading labels from {}", p.display()));
    let (train_l, test_l) = match &cfg.labels {
        LabelSource::Split { train, test } => (read(train)?, read(test)?),
        LabelSource::Shared(path) => split_labels(read(path)?, train_m.ids(), test_m.ids())
            .with_context(|| format!("matching labels in {}", path.display()))?,
    };
    let train = join(train_m, train_l).context("joining training embeddings with labels")?;
    let test = join(test_m, test_l).context("joining test embeddings with labels")?;
    Ok(Inputs { train, test })
}

/// Splits one label file between the two embedding sets. A record whose id
/// is in neither set is an error.
fn split_labels(
    records: Vec<LabelRecord>,
    train_ids: &[String],
    test_ids: &[String],
) -> std::result::Result<(Vec<LabelRecord>, Vec<LabelRecord>), CoreError> {
    let train: HashSet<&str> = train_ids.iter().map(String::as_str).collect();
    let test: HashSet<&str> = test_ids.iter().map(String::as_str).collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for rec in records {
        let (in_a, in_b) = (
            train.contains(rec.id.as_str()),
            test.contains(rec.id.as_str()),
        );
        if !in_a && !in_b {
            return Err(CoreError::UnmatchedId {
                id: rec.id,
                missing_from: JoinSide::Embeddings,
            });
        }
        if in_a && in_b {
            a.push(rec.clone());
        } else if in_a {
            a.push(rec);
            continue;
        }
        if in_b {
            b.push(rec);
        }
    }
    Ok((a, b))
}

pub fn fit_stats(cfg: &RunConfig, train: &EmbeddingDataset) -> Result<TrainStatistics> {
    let kinds: Vec<LensKind> = cfg.lenses.iter().map(|l| l.kind).collect();
    TrainStatistics::fit(train, cfg.seed, &kinds)
        .context("fitting lens statistics on the training set")
}

/// File-name stem for a lens.
fn lens_stem(spec: &LensSpec) -> &'static str {
    spec.kind.name()
}

/// Tiers analysed: the requested one, every tier when the test labels carry
/// agreement tags, otherwise the whole test set.
pub fn tiers(cfg: &RunConfig, test: &EmbeddingDataset) -> Result<Vec<(String, Vec<usize>)>> {
    let list = match cfg.agreement {
        Some(t) => vec![(t.as_str().to_string(), test.agreement_indices(t)?)],
        None if test.has_agreement() => mapper_core::Agreement::ALL
            .iter()
            .map(|&t| Ok((t.as_str().to_string(), test.agreement_indices(t)?)))
            .collect::<Result<_>>()?,
        None => vec![("all".to_string(), (0..test.len()).collect())],
    };
    for (name, idx) in &list {
        if idx.is_empty() {
            warn!("tier {name} has no test instances");
        }
    }
    Ok(list)
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("starting worker pool")
}

/// Files are rendered in memory first and written by one thread, in order.
struct Bundle {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Bundle {
    fn new() -> Self {
        Bundle { files: Vec::new() }
    }

    fn add(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((rel.into(), bytes));
    }

    /// Writes into a staging directory beside `out`, then moves it into
    /// place. Nothing is left behind on failure.
    fn commit(&self, out: &Path) -> Result<()> {
        let name = out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let parent = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        let result = (|| -> Result<()> {
            if staging.exists() {
                std::fs::remove_dir_all(&staging)?;
            }
            for (rel, bytes) in &self.files {
                let path = staging.join(rel);
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(&path, bytes)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if out.is_dir() {
                std::fs::remove_dir(out).with_context(|| format!("replacing {}", out.display()))?;
            }
            std::fs::rename(&staging, out)
                .with_context(|| format!("moving output to {}", out.display()))?;
            Ok(())
        })();
        if result.is_err() && staging.exists() {
            let _ = std::fs::remove_dir_all(&staging);
        }
        result
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Debug, Clone)]
pub struct LensResult {
    pub lens: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct TierResult {
    pub tier: String,
    pub n: usize,
    pub lenses: Vec<LensResult>,
    pub aggregate: Vec<(&'static str, Summary)>,
}

#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub tiers: Vec<TierResult>,
}

struct Rendered {
    report: MetricsReport,
    files: Vec<(PathBuf, Vec<u8>)>,
}

fn render_cell(
    cfg: &RunConfig,
    spec: &LensSpec,
    tier: &str,
    ds: &EmbeddingDataset,
    values: &LensValues,
) -> Result<Rendered> {
    let run = run_mapper(ds, values, cfg.r, cfg.epsilon, &cfg.clustering)?;
    let report = run.report(ds, cfg.threshold)?;
    let gold = ds.gold();
    let pred = ds.pred();
    let ctx = GraphContext {
        ids: ds.ids(),
        gold: &gold,
        pred: pred.as_deref(),
    };
    let stem = lens_stem(spec);
    let dir = PathBuf::from(tier);
    let mut files = Vec::new();
    for fmt in &cfg.exports {
        match fmt {
            ExportFormat::Json => {
                let mut buf = Vec::new();
                export::write_json(&run.graph, &ctx, &mut buf)?;
                files.push((dir.join(format!("{stem}.graph.json")), buf));
            }
            ExportFormat::Dot => {
                let mut buf = Vec::new();
                export::write_dot(&run.graph, &ctx, &mut buf)?;
                files.push((dir.join(format!("{stem}.graph.dot")), buf));
            }
            // The node table below is always written.
            ExportFormat::CsvNodes => {}
        }
    }
    files.push((
        dir.join(format!("{stem}.nodes.csv")),
        csv_bytes(|b| export::write_nodes_csv(&run.graph, &run.cover, &ctx, b))?,
    ));
    files.push((
        dir.join(format!("{stem}.components.csv")),
        csv_bytes(|b| export::write_components_csv(&run.graph, &report, b))?,
    ));
    files.push((
        dir.join(format!("{stem}.bins.csv")),
        csv_bytes(|b| export::write_bins_csv(&per_bin_noise(&run.clusterings), b))?,
    ));
    let row = MetricsRow {
        lens: stem,
        tier,
        n: ds.len(),
        r: cfg.r,
        epsilon: cfg.epsilon,
        report: &report,
    };
    files.push((
        dir.join(format!("{stem}.metrics.csv")),
        csv_bytes(|b| export::write_metrics_csv(&[row], b))?,
    ));
    Ok(Rendered { report, files })
}

fn snapshot_bytes(snapshot: &impl Serialize) -> Result<Vec<u8>> {
    Ok(toml::to_string(snapshot)
        .context("serializing config snapshot")?
        .into_bytes())
}

/// Full analysis: one graph, node table and metrics per (tier, lens), an
/// aggregate per tier and a cross-tier summary.
pub fn run_analysis(cfg: &RunConfig) -> Result<AnalysisResult> {
    let pool = worker_pool(cfg.workers)?;
    let (result, bundle) = pool.install(|| analyse(cfg))?;
    bundle.commit(&cfg.out)?;
    info!("wrote {}", cfg.out.display());
    Ok(result)
}

fn analyse(cfg: &RunConfig) -> Result<(AnalysisResult, Bundle)> {
    let inputs = load_inputs(cfg)?;
    let stats = fit_stats(cfg, &inputs.train)?;
    let tiers = tiers(cfg, &inputs.test)?;
    let values: Vec<LensValues> = cfg
        .lenses
        .par_iter()
        .map(|spec| {
            evaluate_lens(&inputs.test, spec, &stats)
                .with_context(|| format!("lens {spec}: evaluation"))
        })
        .collect::<Result<_>>()?;

    let subsets: Vec<EmbeddingDataset> = tiers
        .iter()
        .map(|(_, idx)| inputs.test.subset(idx))
        .collect();
    let cells: Vec<(usize, usize)> = (0..tiers.len())
        .flat_map(|t| (0..cfg.lenses.len()).map(move |l| (t, l)))
        .collect();
    let rendered: Vec<Rendered> = cells
        .par_iter()
        .map(|&(t, l)| {
            let spec = &cfg.lenses[l];
            let tier = &tiers[t].0;
            let vals = values[l].subset(&tiers[t].1);
            render_cell(cfg, spec, tier, &subsets[t], &vals)
                .with_context(|| format!("lens {spec}, tier {tier}: mapper"))
        })
        .collect::<Result<_>>()?;

    let mut bundle = Bundle::new();
    bundle.add("run_config.toml", snapshot_bytes(&cfg.snapshot())?);
    let mut out_tiers = Vec::new();
    let mut rendered = rendered.into_iter();
    for (t, (tier, idx)) in tiers.iter().enumerate() {
        let mut lenses = Vec::new();
        for spec in &cfg.lenses {
            let cell = rendered.next().expect("one cell per tier and lens");
            for (path, bytes) in cell.files {
                bundle.add(path, bytes);
            }
            lenses.push(LensResult {
                lens: lens_stem(spec).to_string(),
                report: cell.report,
            });
        }
        let reports: Vec<MetricsReport> = lenses.iter().map(|l| l.report.clone()).collect();
        let aggregate = aggregate_over_lenses(&reports)?;
        bundle.add(
            Path::new(tier).join("aggregate.csv"),
            csv_bytes(|b| export::write_aggregate_csv(&aggregate, b))?,
        );
        debug_assert_eq!(subsets[t].len(), idx.len());
        out_tiers.push(TierResult {
            tier: tier.clone(),
            n: idx.len(),
            lenses,
            aggregate,
        });
    }
    let summary: Vec<export::TierAggregate> = out_tiers
        .iter()
        .map(|t| (t.tier.clone(), t.lenses.len(), t.aggregate.clone()))
        .collect();
    bundle.add(
        "summary.csv",
        csv_bytes(|b| export::write_summary_csv(&summary, b))?,
    );
    Ok((AnalysisResult { tiers: out_tiers }, bundle))
}

pub const SWEEP_HEADER: [&str; 17] = [
    "lens",
    "tier",
    "r",
    "epsilon",
    "nodes",
    "edges",
    "components",
    "singletons",
    "noise_rate",
    "cp_gt_pct",
    "cp_pred_pct",
    "mm_pct",
    "ea",
    "cp_gt_mean",
    "cp_pred_mean",
    "total_bin_measure",
    "error",
];

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lens: String,
    pub tier: String,
    pub r: usize,
    pub epsilon: f64,
    pub total_bin_measure: f64,
    pub outcome: std::result::Result<MetricsReport, String>,
}

impl SweepRow {
    fn fields(&self) -> Vec<String> {
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![
            self.lens.clone(),
            self.tier.clone(),
            self.r.to_string(),
            self.epsilon.to_string(),
        ];
        match &self.outcome {
            Ok(rep) => {
                row.extend([
                    rep.shape.nodes.to_string(),
                    rep.shape.edges.to_string(),
                    rep.shape.components.to_string(),
                    rep.shape.singletons.to_string(),
                    rep.noise_rate.to_string(),
                    o(rep.cp_gold_pct),
                    o(rep.cp_pred_pct),
                    o(rep.mm_pct()),
                    o(rep.ea),
                    o(rep.cp_gold_mean()),
                    o(rep.cp_pred_mean()),
                    self.total_bin_measure.to_string(),
                    String::new(),
                ]);
            }
            Err(msg) => {
                row.extend(vec![String::new(); 11]);
                row.push(self.total_bin_measure.to_string());
                row.push(msg.clone());
            }
        }
        row
    }
}

#[derive(Serialize)]
struct SweepSnapshot {
    #[serde(flatten)]
    base: Snapshot,
    sweep_r: Vec<usize>,
    sweep_eps: Vec<f64>,
}

/// Runs every (lens, r, epsilon) cell; failing cells are recorded in their
/// row and the sweep carries on.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let pool = worker_pool(cfg.base.workers)?;
    let (rows, bundle) = pool.install(|| sweep(cfg))?;
    bundle.commit(&cfg.base.out)?;
    Ok(rows)
}

fn sweep(cfg: &SweepConfig) -> Result<(Vec<SweepRow>, Bundle)> {
    let base = &cfg.base;
    let inputs = load_inputs(base)?;
    let stats = fit_stats(base, &inputs.train)?;
    let (tier, idx) = match base.agreement {
        Some(t) => (t.as_str().to_string(), inputs.test.agreement_indices(t)?),
        None => ("all".to_string(), (0..inputs.test.len()).collect()),
    };
    let ds = inputs.test.subset(&idx);
    let values: Vec<std::result::Result<LensValues, String>> = base
        .lenses
        .par_iter()
        .map(|spec| {
            evaluate_lens(&inputs.test, spec, &stats)
                .map(|v| v.subset(&idx))
                .map_err(|e| e.to_string())
        })
        .collect();
    let cells: Vec<(usize, usize, f64)> = (0..base.lenses.len())
        .flat_map(|l| {
            cfg.r_grid
                .iter()
                .flat_map(move |&r| cfg.eps_grid.iter().map(move |&e| (l, r, e)))
        })
        .collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(l, r, epsilon)| {
            let spec = &base.lenses[l];
            let measure = CoverSpec::new(spec.dims(), r, epsilon)
                .and_then(build_cover)
                .map(|c| c.total_measure())
                .unwrap_or(f64::NAN);
            let outcome = values[l].clone().and_then(|v| {
                run_mapper(&ds, &v, r, epsilon, &base.clustering)
                    .and_then(|run| run.report(&ds, base.threshold))
                    .map_err(|e| e.to_string())
            });
            if let Err(msg) = &outcome {
                warn!("sweep cell {spec} r={r} epsilon={epsilon}: {msg}");
            }
            SweepRow {
                lens: lens_stem(spec).to_string(),
                tier: tier.clone(),
                r,
                epsilon,
                total_bin_measure: measure,
                outcome,
            }
        })
        .collect();

    let mut bundle = Bundle::new();
    let snap = SweepSnapshot {
        base: base.snapshot(),
        sweep_r: cfg.r_grid.clone(),
        sweep_eps: cfg.eps_grid.clone(),
    };
    bundle.add("run_config.toml", snapshot_bytes(&snap)?);
    bundle.add(
        "sweep.csv",
        csv_bytes(|b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(SWEEP_HEADER)?;
            for row in &rows {
                w.write_record(row.fields())?;
            }
            w.flush()?;
            Ok(())
        })?,
    );
    Ok((rows, bundle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mapper_core::Label;

    fn rec(id: &str) -> LabelRecord {
        LabelRecord {
            id: id.into(),
            gold: Label::One,
            pred: None,
            agreement: None,
        }
    }

    #[test]
    fn shared_label_file_is_split_by_id() {
        let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let (a, b) = split_labels(
            vec![rec("t1"), rec("s1"), rec("t2"), rec("both")],
            &ids(&["t1", "t2", "both"]),
            &ids(&["s1", "both"]),
        )
        .unwrap();
        let names = |v: &[LabelRecord]| v.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        assert_eq!(names(&a), vec!["t1", "t2", "both"]);
        assert_eq!(names(&b), vec!["s1", "both"]);
        assert!(split_labels(vec![rec("zz")], &ids(&["t1"]), &ids(&["s1"])).is_err());
    }

    #[test]
    fn failed_commit_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = Bundle::new();
        bundle.add("a.txt", b"x".to_vec());
        // A path component that is a file makes the final move impossible.
        std::fs::write(dir.path().join("blocker"), "").unwrap();
        let out = dir.path().join("blocker").join("out");
        assert!(bundle.commit(&out).is_err());
        let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
