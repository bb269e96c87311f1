//! Graph and metric serialization.

use std::io::Write;

use mapper_core::cover::Cover;
use mapper_core::graph::{node_majority, MapperGraph, NodeClass};
use mapper_core::metrics::{MetricsReport, Summary};
use mapper_core::Label;
use serde::Serialize;

/// Labels and ids of the rows a graph was built on.
pub struct GraphContext<'a> {
    pub ids: &'a [String],
    pub gold: &'a [Label],
    pub pred: Option<&'a [Label]>,
}

impl GraphContext<'_> {
    fn classes(&self, g: &MapperGraph) -> Vec<(NodeClass, Option<NodeClass>)> {
        g.nodes
            .iter()
            .map(|n| {
                (
                    node_majority(n, self.gold),
                    self.pred.map(|p| node_majority(n, p)),
                )
            })
            .collect()
    }
}

fn component_of(g: &MapperGraph) -> Vec<usize> {
    let mut out = vec![0; g.nodes.len()];
    for (c, comp) in g.components.iter().enumerate() {
        for &id in comp {
            out[id] = c;
        }
    }
    out
}

#[derive(Serialize)]
struct JsonNode<'a> {
    id: usize,
    bin: usize,
    size: usize,
    members: Vec<&'a str>,
    gold_majority: &'static str,
    pred_majority: Option<&'static str>,
    mixed_flags: MixedFlags,
}

#[derive(Serialize)]
struct MixedFlags {
    gold: bool,
    pred: Option<bool>,
}

#[derive(Serialize)]
struct JsonEdge {
    a: usize,
    b: usize,
    shared_count: usize,
}

#[derive(Serialize)]
struct JsonGraph<'a> {
    nodes: Vec<JsonNode<'a>>,
    edges: Vec<JsonEdge>,
    components: &'a [Vec<usize>],
}

pub fn write_json<W: Write>(g: &MapperGraph, ctx: &GraphContext, mut w: W) -> std::io::Result<()> {
    let classes = ctx.classes(g);
    let doc = JsonGraph {
        nodes: g
            .nodes
            .iter()
            .zip(&classes)
            .map(|(n, (gold, pred))| JsonNode {
                id: n.id,
                bin: n.bin,
                size: n.size(),
                members: n.members.iter().map(|&r| ctx.ids[r].as_str()).collect(),
                gold_majority: gold.as_str(),
                pred_majority: pred.map(NodeClass::as_str),
                mixed_flags: MixedFlags {
                    gold: gold.is_mixed(),
                    pred: pred.map(NodeClass::is_mixed),
                },
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| JsonEdge {
                a: e.a,
                b: e.b,
                shared_count: e.shared_count,
            })
            .collect(),
        components: &g.components,
    };
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)
}

pub fn write_dot<W: Write>(g: &MapperGraph, ctx: &GraphContext, mut w: W) -> std::io::Result<()> {
    let classes = ctx.classes(g);
    let comp = component_of(g);
    writeln!(w, "graph mapper {{")?;
    for (n, (gold, pred)) in g.nodes.iter().zip(&classes) {
        write!(
            w,
            "  n{} [bin={}, size={}, component={}, class=\"{}\"",
            n.id,
            n.bin,
            n.size(),
            comp[n.id],
            gold.as_str()
        )?;
        if let Some(p) = pred {
            write!(w, ", pred_class=\"{}\"", p.as_str())?;
        }
        writeln!(w, "];")?;
    }
    for e in &g.edges {
        writeln!(
            w,
            "  n{} -- n{} [shared_count={}];",
            e.a, e.b, e.shared_count
        )?;
    }
    writeln!(w, "}}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per node.
pub fn write_nodes_csv<W: Write>(
    g: &MapperGraph,
    cover: &Cover,
    ctx: &GraphContext,
    w: W,
) -> csv::Result<()> {
    let classes = ctx.classes(g);
    let comp = component_of(g);
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "node",
        "bin",
        "bin_index",
        "cluster",
        "size",
        "component",
        "gold_majority",
        "pred_majority",
        "gold_ones",
        "pred_ones",
        "members",
    ])?;
    for (n, (gold, pred)) in g.nodes.iter().zip(&classes) {
        let ones = |labels: &[Label]| {
            n.members
                .iter()
                .filter(|&&r| labels[r] == Label::One)
                .count()
        };
        let index: Vec<String> = cover.bins()[n.bin]
            .index
            .iter()
            .map(|i| i.to_string())
            .collect();
        let members: Vec<&str> = n.members.iter().map(|&r| ctx.ids[r].as_str()).collect();
        out.write_record([
            n.id.to_string(),
            n.bin.to_string(),
            index.join(";"),
            n.cluster.to_string(),
            n.size().to_string(),
            comp[n.id].to_string(),
            gold.as_str().to_string(),
            pred.map(|p| p.as_str().to_string()).unwrap_or_default(),
            ones(ctx.gold).to_string(),
            ctx.pred.map(|p| ones(p).to_string()).unwrap_or_default(),
            members.join(";"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per connected component.
pub fn write_components_csv<W: Write>(
    g: &MapperGraph,
    report: &MetricsReport,
    w: W,
) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "component",
        "nodes",
        "points",
        "cp_gt",
        "dominant_gt",
        "cp_pred",
        "dominant_pred",
    ])?;
    for (c, comp) in g.components.iter().enumerate() {
        let gold = report.cp_gold[c];
        let pred = report.cp_pred.as_ref().map(|p| p[c]);
        let ids: Vec<String> = comp.iter().map(|i| i.to_string()).collect();
        out.write_record([
            c.to_string(),
            ids.join(";"),
            gold.size.to_string(),
            gold.purity.to_string(),
            gold.dominant.to_string(),
            opt(pred.map(|p| p.purity)),
            pred.map(|p| p.dominant.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `(bin, members, noise)` rows for every clustered bin.
pub fn write_bins_csv<W: Write>(rows: &[(usize, usize, usize)], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin", "members", "noise"])?;
    for (bin, members, noise) in rows {
        out.write_record([bin.to_string(), members.to_string(), noise.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub const METRICS_HEADER: [&str; 17] = [
    "lens",
    "tier",
    "n",
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
    "threshold",
];

pub struct MetricsRow<'a> {
    pub lens: &'a str,
    pub tier: &'a str,
    pub n: usize,
    pub r: usize,
    pub epsilon: f64,
    pub report: &'a MetricsReport,
}

impl MetricsRow<'_> {
    pub fn fields(&self) -> Vec<String> {
        let r = self.report;
        vec![
            self.lens.to_string(),
            self.tier.to_string(),
            self.n.to_string(),
            self.r.to_string(),
            self.epsilon.to_string(),
            r.shape.nodes.to_string(),
            r.shape.edges.to_string(),
            r.shape.components.to_string(),
            r.shape.singletons.to_string(),
            r.noise_rate.to_string(),
            opt(r.cp_gold_pct),
            opt(r.cp_pred_pct),
            opt(r.mm_pct()),
            opt(r.ea),
            opt(r.cp_gold_mean()),
            opt(r.cp_pred_mean()),
            r.threshold.to_string(),
        ]
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for row in rows {
        out.write_record(row.fields())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[(&str, Summary)], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "mean", "std", "count"])?;
    for (name, s) in rows {
        out.write_record([
            name.to_string(),
            opt(s.mean),
            opt(s.std),
            s.count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "tier",
    "n_lenses",
    "cp_gt_pct_mean",
    "cp_gt_pct_std",
    "cp_pred_pct_mean",
    "cp_pred_pct_std",
    "mm_pct_mean",
    "mm_pct_std",
];

/// Tier name, lens count and the tier's cross-lens aggregate.
pub type TierAggregate<'a> = (String, usize, Vec<(&'a str, Summary)>);

/// Cross-lens mean and std of the three headline columns, one row per tier.
pub fn write_summary_csv<W: Write>(tiers: &[TierAggregate<'_>], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for (tier, n_lenses, agg) in tiers {
        let find = |name: &str| agg.iter().find(|(n, _)| *n == name).map(|(_, s)| *s);
        let mut row = vec![tier.clone(), n_lenses.to_string()];
        for name in ["cp_gt_pct", "cp_pred_pct", "mm_pct"] {
            let s = find(name);
            row.push(opt(s.and_then(|s| s.mean)));
            row.push(opt(s.and_then(|s| s.std)));
        }
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}
