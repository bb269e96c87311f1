//! Run and sweep configuration: TOML file, command-line overrides, validation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use mapper_core::{Agreement, ClusteringParams, LensKind, LensSpec, Metric};
use serde::{Deserialize, Serialize};

pub const DEFAULT_RESOLUTION: usize = 40;
pub const DEFAULT_OVERLAP: f64 = 0.3;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_R_GRID: &str = "10:90:10";
pub const DEFAULT_EPS_GRID: &str = "0.1:0.9:0.1";

/// Problems detected before any computation starts.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("{0}: file not found")]
    NotFound(PathBuf),
    #[error("cannot read config {path}: {message}")]
    Unreadable { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Parser, Default)]
#[command(
    name = "mapper-diag",
    version,
    about = "Mapper graph diagnostics for labeled embedding sets"
)]
pub struct Cli {
    /// TOML configuration file; flags given here override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training embeddings (.csv, anything else is read as binary).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test embeddings to analyse.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// One label file covering both splits, or `train,test`.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<PathBuf>,
    /// Lens names, comma separated; `external_2d=<coords.csv>` for external coordinates.
    #[arg(long, value_delimiter = ',')]
    pub lens: Vec<String>,
    /// Intervals per lens dimension.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Fractional bin overlap in [0, 1).
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Smallest cluster HDBSCAN keeps inside a bin.
    #[arg(long)]
    pub min_cluster_size: Option<usize>,
    /// Neighbourhood size for core distances; defaults to the minimum cluster size.
    #[arg(long)]
    pub min_samples: Option<usize>,
    /// cosine or euclidean.
    #[arg(long)]
    pub metric: Option<String>,
    /// Seed for the random-direction lenses.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restrict the analysis to one tier: A0, A+ or A++.
    #[arg(long)]
    pub agreement: Option<String>,
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Graph formats: json, dot, csv-nodes.
    #[arg(long, value_delimiter = ',')]
    pub export: Vec<String>,
    /// Purity threshold for the percent-of-pure-components columns.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Run a resolution/overlap sweep with the default grids.
    #[arg(long)]
    pub sweep: bool,
    /// Resolution grid `start:stop:step` (implies a sweep).
    #[arg(long)]
    pub sweep_r: Option<String>,
    /// Overlap grid `start:stop:step` (implies a sweep).
    #[arg(long)]
    pub sweep_eps: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
    #[default]
    None,
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
            OneOrMany::None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub r: Option<String>,
    pub eps: Option<String>,
}

/// Contents of a TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub labels: OneOrMany,
    #[serde(default)]
    pub lens: OneOrMany,
    pub resolution: Option<usize>,
    pub overlap: Option<f64>,
    pub min_cluster_size: Option<usize>,
    pub min_samples: Option<usize>,
    pub metric: Option<String>,
    pub seed: Option<u64>,
    pub agreement: Option<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub export: OneOrMany,
    pub threshold: Option<f64>,
    pub workers: Option<usize>,
    pub sweep: Option<SweepSection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // Relative paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.train.as_mut().map(rebase);
        cfg.test.as_mut().map(rebase);
        cfg.out.as_mut().map(rebase);
        let rebase_str = |s: String| -> String {
            if Path::new(&s).is_relative() {
                base.join(s).to_string_lossy().into_owned()
            } else {
                s
            }
        };
        cfg.labels = OneOrMany::Many(cfg.labels.into_vec().into_iter().map(rebase_str).collect());
        cfg.lens = OneOrMany::Many(
            cfg.lens
                .into_vec()
                .into_iter()
                .map(|l| match l.split_once('=') {
                    Some((name, p)) => format!("{name}={}", rebase_str(p.trim().to_string())),
                    None => l,
                })
                .collect(),
        );
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExportFormat {
    Json,
    Dot,
    CsvNodes,
}

impl ExportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Dot => "dot",
            ExportFormat::CsvNodes => "csv-nodes",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.trim() {
            "json" => Ok(ExportFormat::Json),
            "dot" => Ok(ExportFormat::Dot),
            "csv-nodes" => Ok(ExportFormat::CsvNodes),
            other => Err(invalid("export", format!("unknown format {other:?}"))),
        }
    }
}

/// Where the labels of each split come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LabelSource {
    /// One file holding the records of both splits.
    Shared(PathBuf),
    Split {
        train: PathBuf,
        test: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: PathBuf,
    pub test: PathBuf,
    pub labels: LabelSource,
    pub lenses: Vec<LensSpec>,
    pub r: usize,
    pub epsilon: f64,
    pub clustering: ClusteringParams,
    pub seed: u64,
    pub agreement: Option<Agreement>,
    pub out: PathBuf,
    pub exports: Vec<ExportFormat>,
    pub threshold: f64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub r_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Run(RunConfig),
    Sweep(SweepConfig),
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(key: &'static str, text: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(key, format!("expected start:stop:step, got {text:?}")))?;
    let [start, stop, step] = nums[..] else {
        return Err(invalid(
            key,
            format!("expected start:stop:step, got {text:?}"),
        ));
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(invalid(key, format!("grid {text:?} is empty or unbounded")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(invalid(key, format!("grid {text:?} has too many points")));
    }
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn parse_r_grid(text: &str) -> Result<Vec<usize>, ConfigError> {
    parse_grid("sweep-r", text)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(invalid(
                    "sweep-r",
                    format!("resolution {v} is not a positive integer"),
                ))
            }
        })
        .collect()
}

fn check_overlap(key: &'static str, eps: f64) -> Result<(), ConfigError> {
    if (0.0..1.0).contains(&eps) {
        Ok(())
    } else {
        Err(invalid(
            key,
            format!("overlap must lie in [0, 1), got {eps}"),
        ))
    }
}

fn existing(path: PathBuf) -> Result<PathBuf, ConfigError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(ConfigError::NotFound(path))
    }
}

/// Merges the config file (if any) with flag overrides and validates.
pub fn resolve(cli: Cli) -> Result<Job, ConfigError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let pick_vec = |flag: Vec<String>, from_file: OneOrMany| {
        if flag.is_empty() {
            from_file.into_vec()
        } else {
            flag
        }
    };

    let train = existing(
        cli.train
            .or(file.train)
            .ok_or(ConfigError::Missing("train"))?,
    )?;
    let test = existing(cli.test.or(file.test).ok_or(ConfigError::Missing("test"))?)?;
    let label_paths: Vec<PathBuf> = if cli.labels.is_empty() {
        file.labels
            .into_vec()
            .into_iter()
            .map(PathBuf::from)
            .collect()
    } else {
        cli.labels
    };
    let labels = match label_paths.len() {
        0 => return Err(ConfigError::Missing("labels")),
        1 => LabelSource::Shared(existing(label_paths[0].clone())?),
        2 => LabelSource::Split {
            train: existing(label_paths[0].clone())?,
            test: existing(label_paths[1].clone())?,
        },
        n => {
            return Err(invalid(
                "labels",
                format!("expected one or two files, got {n}"),
            ))
        }
    };

    let lens_names = pick_vec(cli.lens, file.lens);
    let lenses: Vec<LensSpec> = if lens_names.is_empty() {
        LensKind::ONE_D.iter().map(|&k| LensSpec::new(k)).collect()
    } else {
        lens_names
            .iter()
            .map(|s| {
                s.parse::<LensSpec>()
                    .map_err(|e| invalid("lens", e.to_string()))
            })
            .collect::<Result<_, _>>()?
    };
    let mut seen = BTreeSet::new();
    for spec in &lenses {
        if !seen.insert(spec.kind) {
            return Err(invalid("lens", format!("{} listed twice", spec.kind)));
        }
        if let Some(p) = &spec.external_path {
            existing(p.clone())?;
        }
    }

    let r = cli
        .resolution
        .or(file.resolution)
        .unwrap_or(DEFAULT_RESOLUTION);
    if r == 0 {
        return Err(invalid("resolution", "must be at least 1"));
    }
    let epsilon = cli.overlap.or(file.overlap).unwrap_or(DEFAULT_OVERLAP);
    check_overlap("overlap", epsilon)?;

    let metric = match cli.metric.or(file.metric) {
        Some(m) => m
            .parse::<Metric>()
            .map_err(|e| invalid("metric", e.to_string()))?,
        None => Metric::Cosine,
    };
    let clustering = ClusteringParams {
        min_cluster_size: cli.min_cluster_size.or(file.min_cluster_size).unwrap_or(2),
        min_samples: cli.min_samples.or(file.min_samples),
        metric,
        allow_single_cluster: true,
    };
    clustering
        .validate()
        .map_err(|e| invalid("min-cluster-size", e.to_string()))?;

    let agreement = cli
        .agreement
        .or(file.agreement)
        .map(|a| {
            a.parse::<Agreement>()
                .map_err(|e| invalid("agreement", e.to_string()))
        })
        .transpose()?;

    let out = cli.out.or(file.out).ok_or(ConfigError::Missing("out"))?;
    if out.is_file() {
        return Err(invalid("out", format!("{} is a file", out.display())));
    }
    if out.is_dir()
        && std::fs::read_dir(&out)
            .map(|mut d| d.next().is_some())
            .unwrap_or(true)
    {
        return Err(invalid(
            "out",
            format!("{} exists and is not empty", out.display()),
        ));
    }

    let export_names = pick_vec(cli.export, file.export);
    let mut exports: Vec<ExportFormat> = if export_names.is_empty() {
        vec![ExportFormat::Json]
    } else {
        export_names
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?
    };
    exports.sort();
    exports.dedup();

    let threshold = cli
        .threshold
        .or(file.threshold)
        .unwrap_or(DEFAULT_THRESHOLD);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid(
            "threshold",
            format!("must lie in [0, 1], got {threshold}"),
        ));
    }

    let base = RunConfig {
        train,
        test,
        labels,
        lenses,
        r,
        epsilon,
        clustering,
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        agreement,
        out,
        exports,
        threshold,
        workers: cli.workers.or(file.workers).unwrap_or(0),
    };

    let section = file.sweep.unwrap_or_default();
    let r_text = cli.sweep_r.or(section.r);
    let eps_text = cli.sweep_eps.or(section.eps);
    if !(cli.sweep || r_text.is_some() || eps_text.is_some()) {
        return Ok(Job::Run(base));
    }
    let r_grid = parse_r_grid(r_text.as_deref().unwrap_or(DEFAULT_R_GRID))?;
    let eps_grid = parse_grid("sweep-eps", eps_text.as_deref().unwrap_or(DEFAULT_EPS_GRID))?;
    for &e in &eps_grid {
        check_overlap("sweep-eps", e)?;
    }
    Ok(Job::Sweep(SweepConfig {
        base,
        r_grid,
        eps_grid,
    }))
}

/// Resolved settings written next to the outputs.
#[derive(Debug, Serialize)]
pub struct Snapshot {
    pub train: String,
    pub test: String,
    pub labels: Vec<String>,
    pub lens: Vec<String>,
    pub resolution: usize,
    pub overlap: f64,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub metric: String,
    pub seed: u64,
    pub agreement: Option<String>,
    pub export: Vec<String>,
    pub threshold: f64,
}

impl RunConfig {
    pub fn snapshot(&self) -> Snapshot {
        let path = |p: &Path| p.to_string_lossy().into_owned();
        Snapshot {
            train: path(&self.train),
            test: path(&self.test),
            labels: match &self.labels {
                LabelSource::Shared(p) => vec![path(p)],
                LabelSource::Split { train, test } => vec![path(train), path(test)],
            },
            lens: self.lenses.iter().map(ToString::to_string).collect(),
            resolution: self.r,
            overlap: self.epsilon,
            min_cluster_size: self.clustering.min_cluster_size,
            min_samples: self.clustering.min_samples(),
            metric: self.clustering.metric.to_string(),
            seed: self.seed,
            agreement: self.agreement.map(|a| a.as_str().to_string()),
            export: self
                .exports
                .iter()
                .map(|e| e.as_str().to_string())
                .collect(),
            threshold: self.threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Files {
        dir: tempfile::TempDir,
    }

    impl Files {
        fn new() -> Self {
            let dir = tempfile::tempdir().unwrap();
            for f in ["train.csv", "test.csv", "labels.csv", "coords.csv"] {
                std::fs::write(dir.path().join(f), "x").unwrap();
            }
            Files { dir }
        }

        fn p(&self, name: &str) -> PathBuf {
            self.dir.path().join(name)
        }

        fn cli(&self) -> Cli {
            Cli {
                train: Some(self.p("train.csv")),
                test: Some(self.p("test.csv")),
                labels: vec![self.p("labels.csv")],
                out: Some(self.p("out")),
                ..Cli::default()
            }
        }
    }

    fn run(job: Job) -> RunConfig {
        match job {
            Job::Run(r) => r,
            Job::Sweep(_) => panic!("expected a single run"),
        }
    }

    #[test]
    fn defaults() {
        let f = Files::new();
        let cfg = run(resolve(f.cli()).unwrap());
        assert_eq!(cfg.r, 40);
        assert_eq!(cfg.epsilon, 0.3);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.lenses.len(), 6);
        assert_eq!(cfg.clustering.min_cluster_size, 2);
        assert_eq!(cfg.exports, vec![ExportFormat::Json]);
    }

    #[test]
    fn overlap_of_one_is_rejected() {
        let f = Files::new();
        let cli = Cli {
            overlap: Some(1.0),
            ..f.cli()
        };
        assert!(matches!(
            resolve(cli),
            Err(ConfigError::Invalid { key: "overlap", .. })
        ));
    }

    #[test]
    fn missing_input_file() {
        let f = Files::new();
        let cli = Cli {
            train: Some(f.p("nope.csv")),
            ..f.cli()
        };
        assert!(matches!(resolve(cli), Err(ConfigError::NotFound(_))));
    }

    #[test]
    fn flags_override_file() {
        let f = Files::new();
        std::fs::write(
            f.p("run.toml"),
            "train = \"train.csv\"\ntest = \"test.csv\"\nlabels = \"labels.csv\"\nout = \"out\"\n\
             resolution = 20\noverlap = 0.2\nlens = [\"pca_2d\", \"external_2d=coords.csv\"]\n",
        )
        .unwrap();
        let cli = Cli {
            config: Some(f.p("run.toml")),
            resolution: Some(12),
            ..Cli::default()
        };
        let cfg = run(resolve(cli).unwrap());
        assert_eq!(cfg.r, 12);
        assert_eq!(cfg.epsilon, 0.2);
        assert_eq!(cfg.lenses[1], LensSpec::external(f.p("coords.csv")));
        assert_eq!(cfg.train, f.p("train.csv"));
    }

    #[test]
    fn unknown_config_key() {
        let f = Files::new();
        std::fs::write(f.p("bad.toml"), "resolutoin = 3\n").unwrap();
        let cli = Cli {
            config: Some(f.p("bad.toml")),
            ..f.cli()
        };
        assert!(matches!(resolve(cli), Err(ConfigError::Unreadable { .. })));
    }

    #[test]
    fn grids() {
        assert_eq!(
            parse_r_grid("10:90:10").unwrap(),
            (1..=9).map(|i| i * 10).collect::<Vec<_>>()
        );
        let eps = parse_grid("e", "0.1:0.9:0.1").unwrap();
        assert_eq!(eps.len(), 9);
        assert_eq!(eps[2], 0.3);
        assert_eq!(eps[8], 0.9);
        assert!(parse_grid("e", "0.5:0.1:0.1").is_err());
        assert!(parse_grid("e", "0.1:0.5").is_err());
        assert!(parse_r_grid("1.5:3:1").is_err());
    }

    #[test]
    fn sweep_defaults_and_overlap_check() {
        let f = Files::new();
        let cli = Cli {
            sweep: true,
            ..f.cli()
        };
        let Job::Sweep(s) = resolve(cli).unwrap() else {
            panic!("expected a sweep")
        };
        assert_eq!((s.r_grid.len(), s.eps_grid.len()), (9, 9));
        let cli = Cli {
            sweep_eps: Some("0.5:1.0:0.5".into()),
            ..f.cli()
        };
        assert!(resolve(cli).is_err());
    }

    #[test]
    fn lens_and_label_validation() {
        let f = Files::new();
        let dup = Cli {
            lens: vec!["pca_1d".into(), "pca_1d".into()],
            ..f.cli()
        };
        assert!(resolve(dup).is_err());
        let three = Cli {
            labels: vec![f.p("labels.csv"); 3],
            ..f.cli()
        };
        assert!(resolve(three).is_err());
        let two = Cli {
            labels: vec![f.p("labels.csv"), f.p("labels.csv")],
            ..f.cli()
        };
        assert!(matches!(
            run(resolve(two).unwrap()).labels,
            LabelSource::Split { .. }
        ));
    }

    #[test]
    fn non_empty_output_is_rejected() {
        let f = Files::new();
        std::fs::create_dir(f.p("out")).unwrap();
        assert!(resolve(f.cli()).is_ok());
        std::fs::write(f.p("out/x"), "").unwrap();
        assert!(resolve(f.cli()).is_err());
    }
}
