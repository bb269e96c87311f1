//! Lens functions and the training statistics they are fitted from.
//!
//! Every lens maps an embedding to one or two raw coordinates. Raw values
//! are min-max rescaled per coordinate with bounds taken from the training
//! rows, then clamped to `[0, 1]`. A constant lens (min equal to max) maps
//! everything to `0.5`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingDataset, Label};
use crate::error::{Error, JoinSide, Result};
use crate::linalg::{cosine_distance_with_norms, dot, norm};

/// Per-row lens body used by the parallel evaluator.
type RowLens<'a> = dyn Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync + 'a;

/// Query rows per block when scanning the training set.
const ECCENTRICITY_BLOCK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LensKind {
    Centroid1d,
    Pca1d,
    Eccentricity1d,
    L2Norm1d,
    Random1_1d,
    Random2_1d,
    CosineC0C1,
    Eccentricity2d,
    Pca2d,
    Random2d,
    External2d,
}

impl LensKind {
    /// The six one-dimensional lenses, in reporting order.
    pub const ONE_D: [LensKind; 6] = [
        LensKind::Centroid1d,
        LensKind::Pca1d,
        LensKind::Eccentricity1d,
        LensKind::L2Norm1d,
        LensKind::Random1_1d,
        LensKind::Random2_1d,
    ];

    /// Two-dimensional lenses computed from the training statistics.
    pub const TWO_D: [LensKind; 4] = [
        LensKind::CosineC0C1,
        LensKind::Eccentricity2d,
        LensKind::Pca2d,
        LensKind::Random2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LensKind::Centroid1d => "centroid_1d",
            LensKind::Pca1d => "pca_1d",
            LensKind::Eccentricity1d => "eccentricity_1d",
            LensKind::L2Norm1d => "l2norm_1d",
            LensKind::Random1_1d => "random1_1d",
            LensKind::Random2_1d => "random2_1d",
            LensKind::CosineC0C1 => "cosine_c0_c1",
            LensKind::Eccentricity2d => "eccentricity_2d",
            LensKind::Pca2d => "pca_2d",
            LensKind::Random2d => "random_2d",
            LensKind::External2d => "external_2d",
        }
    }

    pub fn dims(self) -> usize {
        match self {
            LensKind::Centroid1d
            | LensKind::Pca1d
            | LensKind::Eccentricity1d
            | LensKind::L2Norm1d
            | LensKind::Random1_1d
            | LensKind::Random2_1d => 1,
            _ => 2,
        }
    }

    fn needs_centroids(self) -> bool {
        matches!(self, LensKind::Centroid1d | LensKind::CosineC0C1)
    }

    fn needs_pca(self) -> bool {
        matches!(self, LensKind::Pca1d | LensKind::Pca2d)
    }

    fn needs_train_vectors(self) -> bool {
        matches!(self, LensKind::Eccentricity1d | LensKind::Eccentricity2d)
    }
}

impl FromStr for LensKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "centroid_1d" => LensKind::Centroid1d,
            "pca_1d" => LensKind::Pca1d,
            "eccentricity_1d" => LensKind::Eccentricity1d,
            "l2norm_1d" => LensKind::L2Norm1d,
            "random1_1d" => LensKind::Random1_1d,
            "random2_1d" => LensKind::Random2_1d,
            "cosine_c0_c1" => LensKind::CosineC0C1,
            "eccentricity_2d" => LensKind::Eccentricity2d,
            "pca_2d" => LensKind::Pca2d,
            "random_2d" => LensKind::Random2d,
            "external_2d" | "umap_2d" => LensKind::External2d,
            other => return Err(Error::InvalidParameter(format!("unknown lens {other:?}"))),
        };
        Ok(kind)
    }
}

impl std::fmt::Display for LensKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A lens choice; `external_2d` additionally names a coordinate file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LensSpec {
    pub kind: LensKind,
    pub external_path: Option<PathBuf>,
}

impl LensSpec {
    pub fn new(kind: LensKind) -> Self {
        Self {
            kind,
            external_path: None,
        }
    }

    pub fn external(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: LensKind::External2d,
            external_path: Some(path.into()),
        }
    }

    pub fn dims(&self) -> usize {
        self.kind.dims()
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.external_path) {
            (LensKind::External2d, None) => Err(Error::InvalidParameter(
                "external_2d needs a coordinate file (external_2d=<path>)".into(),
            )),
            (LensKind::External2d, Some(_)) => Ok(()),
            (kind, Some(_)) => Err(Error::InvalidParameter(format!(
                "lens {kind} does not take a coordinate file"
            ))),
            (_, None) => Ok(()),
        }
    }
}

/// Parses `name` or `external_2d=<path>` (also accepted as `umap_2d=<path>`).
impl FromStr for LensSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = match s.split_once('=') {
            Some((name, path)) => LensSpec {
                kind: name.trim().parse()?,
                external_path: Some(PathBuf::from(path.trim())),
            },
            None => LensSpec::new(s.parse()?),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl std::fmt::Display for LensSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.external_path {
            Some(p) => write!(f, "{}={}", self.kind, p.display()),
            None => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    fn of(values: impl Iterator<Item = f64>) -> Bounds {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        Bounds { min, max }
    }

    /// Min-max rescale with clamping; degenerate bounds map to 0.5.
    pub fn rescale(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.5;
        }
        ((v - self.min) / span).clamp(0.0, 1.0)
    }
}

/// Quantities fitted on the training split only.
#[derive(Debug, Clone)]
pub struct TrainStatistics {
    seed: u64,
    dim: usize,
    centroids: Option<[Vec<f64>; 2]>,
    pcs: Vec<Vec<f64>>,
    train_unit: Vec<f64>,
    n_train: usize,
    rand_dirs: [Vec<f64>; 2],
    bounds: BTreeMap<LensKind, Vec<Bounds>>,
}

/// Fits statistics and rescaling bounds for every built-in lens.
pub fn fit_train_stats(train: &EmbeddingDataset, seed: u64) -> Result<TrainStatistics> {
    let mut kinds = LensKind::ONE_D.to_vec();
    if train.dim() >= 2 {
        kinds.extend(LensKind::TWO_D);
    } else {
        kinds.extend([
            LensKind::CosineC0C1,
            LensKind::Eccentricity2d,
            LensKind::Random2d,
        ]);
    }
    TrainStatistics::fit(train, seed, &kinds)
}

impl TrainStatistics {
    /// Fits only what `kinds` need. `External2d` entries are ignored since
    /// their bounds come from the coordinate file.
    pub fn fit(train: &EmbeddingDataset, seed: u64, kinds: &[LensKind]) -> Result<TrainStatistics> {
        if train.len() < 2 {
            return Err(Error::InvalidParameter(
                "training set needs at least two instances".into(),
            ));
        }
        let dim = train.dim();

        let centroids = if kinds.iter().any(|k| k.needs_centroids()) {
            Some(class_centroids(train)?)
        } else {
            None
        };

        let pcs = if kinds.iter().any(|k| k.needs_pca()) {
            let wanted = if kinds.contains(&LensKind::Pca2d) {
                2
            } else {
                1
            };
            if wanted > dim {
                return Err(Error::DegenerateLens {
                    lens: LensKind::Pca2d.name().into(),
                    reason: format!("needs two principal directions but d = {dim}"),
                });
            }
            principal_directions(train, wanted)?
        } else {
            Vec::new()
        };

        let (train_unit, n_train) = if kinds.iter().any(|k| k.needs_train_vectors()) {
            (unit_rows(train.embeddings().values(), dim)?, train.len())
        } else {
            (Vec::new(), 0)
        };

        let rand_dirs = [
            random_unit_vector(seed, LensKind::Random1_1d.name(), dim),
            random_unit_vector(seed, LensKind::Random2_1d.name(), dim),
        ];

        let mut stats = TrainStatistics {
            seed,
            dim,
            centroids,
            pcs,
            train_unit,
            n_train,
            rand_dirs,
            bounds: BTreeMap::new(),
        };

        for &kind in kinds {
            if kind == LensKind::External2d || stats.bounds.contains_key(&kind) {
                continue;
            }
            let raw = raw_lens_values(train, kind, &stats)?;
            let k = kind.dims();
            let bounds = (0..k)
                .map(|j| Bounds::of(raw.iter().skip(j).step_by(k).copied()))
                .collect();
            stats.bounds.insert(kind, bounds);
        }
        Ok(stats)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu0(&self) -> Option<&[f64]> {
        self.centroids.as_ref().map(|c| c[0].as_slice())
    }

    pub fn mu1(&self) -> Option<&[f64]> {
        self.centroids.as_ref().map(|c| c[1].as_slice())
    }

    pub fn pcs(&self) -> &[Vec<f64>] {
        &self.pcs
    }

    pub fn rand_dirs(&self) -> &[Vec<f64>; 2] {
        &self.rand_dirs
    }

    pub fn train_count(&self) -> usize {
        self.n_train
    }

    pub fn bounds(&self, kind: LensKind) -> Option<&[Bounds]> {
        self.bounds.get(&kind).map(Vec::as_slice)
    }

    fn centroids(&self, kind: LensKind) -> Result<&[Vec<f64>; 2]> {
        self.centroids
            .as_ref()
            .ok_or_else(|| Error::UnfittedLens(kind.name().into()))
    }

    fn train_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.train_unit.chunks_exact(self.dim.max(1))
    }
}

fn class_centroids(train: &EmbeddingDataset) -> Result<[Vec<f64>; 2]> {
    let dim = train.dim();
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for (i, rec) in train.labels().iter().enumerate() {
        let c = rec.gold.index();
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(train.row(i)) {
            *s += v;
        }
    }
    for label in [Label::Zero, Label::One] {
        if counts[label.index()] == 0 {
            return Err(Error::MissingClass(label.as_u8()));
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        let n = count as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    Ok(sums)
}

/// Top principal directions of the mean-centered training covariance.
///
/// Eigenvalue ties keep the lower eigen-index first. Each direction is
/// signed so that its largest-magnitude coefficient is positive, ties going
/// to the lowest coordinate index.
fn principal_directions(train: &EmbeddingDataset, count: usize) -> Result<Vec<Vec<f64>>> {
    let n = train.len();
    let dim = train.dim();
    let mut x = DMatrix::from_row_slice(n, dim, train.embeddings().values());
    for j in 0..dim {
        let mut col = x.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    if cov.trace() <= 0.0 {
        return Err(Error::DegenerateLens {
            lens: LensKind::Pca1d.name().into(),
            reason: "training data has zero total variance".into(),
        });
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .take(count)
        .map(|idx| {
            let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let len = norm(&v);
            v.iter_mut().for_each(|c| *c /= len);
            fix_sign(&mut v);
            v
        })
        .collect())
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, c) in v.iter().enumerate() {
        if c.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
}

fn unit_rows(values: &[f64], dim: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    for (row, x) in values.chunks_exact(dim).enumerate() {
        let len = norm(x);
        if len == 0.0 {
            return Err(Error::ZeroNorm { row });
        }
        out.extend(x.iter().map(|v| v / len));
    }
    Ok(out)
}

/// Stable 64-bit FNV-1a, used to name random substreams.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// A uniformly distributed unit vector drawn from the `(seed, name)` substream.
pub fn random_unit_vector(seed: u64, name: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 0.0 {
            v.iter_mut().for_each(|c| *c /= len);
            return v;
        }
    }
}

/// Scalar projection onto the direction from `mu0` to `mu1`.
pub fn lens_centroid(x: &[f64], stats: &TrainStatistics) -> Result<f64> {
    let [mu0, mu1] = stats.centroids(LensKind::Centroid1d)?;
    let diff: Vec<f64> = mu1.iter().zip(mu0).map(|(a, b)| a - b).collect();
    let len = norm(&diff);
    if len == 0.0 {
        return Err(Error::DegenerateLens {
            lens: LensKind::Centroid1d.name().into(),
            reason: "class centroids coincide".into(),
        });
    }
    Ok(dot(x, &diff) / len)
}

/// Projection onto the first one or two principal directions; no centering.
pub fn lens_pca(x: &[f64], stats: &TrainStatistics, dims: usize) -> Result<Vec<f64>> {
    if dims == 0 || dims > 2 {
        return Err(Error::InvalidParameter(format!(
            "pca lens dims must be 1 or 2, got {dims}"
        )));
    }
    if stats.pcs.len() < dims {
        let kind = if dims == 1 {
            LensKind::Pca1d
        } else {
            LensKind::Pca2d
        };
        return Err(Error::UnfittedLens(kind.name().into()));
    }
    Ok(stats.pcs[..dims].iter().map(|u| dot(u, x)).collect())
}

/// Maximum cosine distance from `x` to any training row, by full scan.
pub fn lens_eccentricity(x: &[f64], stats: &TrainStatistics) -> Result<f64> {
    eccentricity_pair(x, stats, 0).map(|(max, _)| max)
}

fn eccentricity_pair(x: &[f64], stats: &TrainStatistics, row: usize) -> Result<(f64, f64)> {
    if stats.n_train == 0 {
        return Err(Error::UnfittedLens(LensKind::Eccentricity1d.name().into()));
    }
    let len = norm(x);
    if len == 0.0 {
        return Err(Error::ZeroNorm { row });
    }
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for t in stats.train_rows() {
        let d = cosine_distance_with_norms(x, t, len, 1.0);
        max = max.max(d);
        sum += d;
    }
    Ok((max, sum / stats.n_train as f64))
}

pub fn lens_l2norm(x: &[f64]) -> f64 {
    norm(x)
}

/// Projection onto seeded random direction 1 or 2.
pub fn lens_random(x: &[f64], stats: &TrainStatistics, which: usize) -> Result<f64> {
    match which {
        1 | 2 => Ok(dot(&stats.rand_dirs[which - 1], x)),
        _ => Err(Error::InvalidParameter(format!(
            "random lens index must be 1 or 2, got {which}"
        ))),
    }
}

/// Cosine distances to the two class centroids.
pub fn lens_cosine_c0_c1(x: &[f64], stats: &TrainStatistics) -> Result<[f64; 2]> {
    let [mu0, mu1] = stats.centroids(LensKind::CosineC0C1)?;
    let (n0, n1) = (norm(mu0), norm(mu1));
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::DegenerateLens {
            lens: LensKind::CosineC0C1.name().into(),
            reason: "a class centroid has zero norm".into(),
        });
    }
    let len = norm(x);
    if len == 0.0 {
        return Err(Error::ZeroNorm { row: 0 });
    }
    Ok([
        cosine_distance_with_norms(x, mu0, len, n0),
        cosine_distance_with_norms(x, mu1, len, n1),
    ])
}

/// Raw (unscaled) lens values for every row, row-major `n x k`.
pub fn raw_lens_values(
    ds: &EmbeddingDataset,
    kind: LensKind,
    stats: &TrainStatistics,
) -> Result<Vec<f64>> {
    let n = ds.len();
    let per_row = |f: &RowLens<'_>| -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| f(i, ds.row(i)))
            .collect::<Result<_>>()?;
        Ok(rows.concat())
    };
    let with_row = |row: usize, e: Error| match e {
        Error::ZeroNorm { .. } => Error::ZeroNorm { row },
        other => other,
    };
    match kind {
        LensKind::Centroid1d => {
            lens_centroid(&vec![0.0; ds.dim()], stats)?;
            per_row(&|_, x| Ok(vec![lens_centroid(x, stats)?]))
        }
        LensKind::Pca1d => per_row(&|_, x| lens_pca(x, stats, 1)),
        LensKind::Pca2d => per_row(&|_, x| lens_pca(x, stats, 2)),
        LensKind::L2Norm1d => per_row(&|_, x| Ok(vec![lens_l2norm(x)])),
        LensKind::Random1_1d => per_row(&|_, x| Ok(vec![lens_random(x, stats, 1)?])),
        LensKind::Random2_1d => per_row(&|_, x| Ok(vec![lens_random(x, stats, 2)?])),
        LensKind::Random2d => {
            per_row(&|_, x| Ok(vec![lens_random(x, stats, 1)?, lens_random(x, stats, 2)?]))
        }
        LensKind::CosineC0C1 => per_row(&|i, x| {
            lens_cosine_c0_c1(x, stats)
                .map(|v| v.to_vec())
                .map_err(|e| with_row(i, e))
        }),
        LensKind::Eccentricity1d => {
            let pairs = eccentricity_batch(ds, stats)?;
            Ok(pairs.into_iter().map(|(max, _)| max).collect())
        }
        LensKind::Eccentricity2d => {
            let pairs = eccentricity_batch(ds, stats)?;
            Ok(pairs
                .into_iter()
                .flat_map(|(max, mean)| [max, mean])
                .collect())
        }
        LensKind::External2d => Err(Error::InvalidParameter(
            "external_2d values come from a coordinate file".into(),
        )),
    }
}

/// (max, mean) cosine distance to the training rows for every dataset row.
///
/// Rows are processed in fixed blocks through a dense product, so results
/// do not depend on the number of worker threads.
fn eccentricity_batch(ds: &EmbeddingDataset, stats: &TrainStatistics) -> Result<Vec<(f64, f64)>> {
    if stats.n_train == 0 {
        return Err(Error::UnfittedLens(LensKind::Eccentricity1d.name().into()));
    }
    if ds.dim() != stats.dim {
        return Err(Error::DimensionMismatch {
            expected: stats.dim,
            found: ds.dim(),
        });
    }
    let dim = stats.dim;
    let queries = unit_rows(ds.embeddings().values(), dim)?;
    let train = DMatrix::from_column_slice(dim, stats.n_train, &stats.train_unit);
    let n_train = stats.n_train as f64;
    let blocks: Vec<Vec<(f64, f64)>> = queries
        .par_chunks(ECCENTRICITY_BLOCK * dim)
        .map(|block| {
            let q = DMatrix::from_column_slice(dim, block.len() / dim, block);
            let cos = q.tr_mul(&train);
            (0..cos.nrows())
                .map(|r| {
                    let mut max = 0.0f64;
                    let mut sum = 0.0;
                    for c in 0..cos.ncols() {
                        let d = (1.0 - cos[(r, c)]).clamp(0.0, 2.0);
                        max = max.max(d);
                        sum += d;
                    }
                    (max, sum / n_train)
                })
                .collect()
        })
        .collect();
    Ok(blocks.concat())
}

/// Per-row lens coordinates in `[0, 1]^k`, aligned to dataset rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LensValues {
    dims: usize,
    values: Vec<f64>,
}

impl LensValues {
    pub fn new(dims: usize, values: Vec<f64>) -> Result<Self> {
        if dims == 0 || values.len() % dims != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form rows of width {dims}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::row(pos / dims, "lens value outside [0, 1]"));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn subset(&self, indices: &[usize]) -> LensValues {
        let mut values = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        LensValues {
            dims: self.dims,
            values,
        }
    }
}

/// Evaluates a lens on every row and rescales with the training bounds.
pub fn evaluate_lens(
    ds: &EmbeddingDataset,
    spec: &LensSpec,
    stats: &TrainStatistics,
) -> Result<LensValues> {
    spec.validate()?;
    let k = spec.dims();
    let (raw, bounds) = match spec.kind {
        LensKind::External2d => {
            let path = spec.external_path.as_deref().expect("validated");
            let coords = load_external_coords(path)?;
            let raw = coords.aligned_to(ds.ids())?;
            (raw, coords.bounds())
        }
        kind => {
            let bounds = stats
                .bounds(kind)
                .ok_or_else(|| Error::UnfittedLens(kind.name().into()))?
                .to_vec();
            (raw_lens_values(ds, kind, stats)?, bounds)
        }
    };
    let values = raw
        .chunks_exact(k)
        .flat_map(|row| row.iter().zip(&bounds).map(|(&v, b)| b.rescale(v)))
        .collect();
    LensValues::new(k, values)
}

/// Externally computed 2D coordinates keyed by instance id.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCoords {
    ids: Vec<String>,
    coords: Vec<[f64; 2]>,
}

pub fn load_external_coords(path: &Path) -> Result<ExternalCoords> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_external_coords(BufReader::new(file))
}

/// Reads `id,x0,x1` rows.
pub fn read_external_coords<R: Read>(reader: R) -> Result<ExternalCoords> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["id", "x0", "x1"] {
        return Err(Error::Format(format!(
            "coordinate header must be id,x0,x1, found {}",
            names.join(",")
        )));
    }
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::row(row, e.to_string()))?;
        let parse = |j: usize| -> Result<f64> {
            let field = rec.get(j).unwrap_or("");
            field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::row(row, format!("invalid coordinate {field:?}")))
        };
        let id = rec.get(0).unwrap_or("").to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        coords.push([parse(1)?, parse(2)?]);
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    Ok(ExternalCoords { ids, coords })
}

impl ExternalCoords {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Per-axis bounds over every row of the file.
    pub fn bounds(&self) -> Vec<Bounds> {
        (0..2)
            .map(|j| Bounds::of(self.coords.iter().map(|c| c[j])))
            .collect()
    }

    /// Coordinates reordered to `ids`; both id sets must match exactly.
    pub fn aligned_to(&self, ids: &[String]) -> Result<Vec<f64>> {
        let index: std::collections::HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut out = Vec::with_capacity(ids.len() * 2);
        for id in ids {
            let i = *index.get(id.as_str()).ok_or_else(|| Error::UnmatchedId {
                id: id.clone(),
                missing_from: JoinSide::Labels,
            })?;
            out.extend_from_slice(&self.coords[i]);
        }
        if self.ids.len() != ids.len() {
            let wanted: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
            let extra = self
                .ids
                .iter()
                .find(|id| !wanted.contains(id.as_str()))
                .cloned()
                .unwrap_or_default();
            return Err(Error::UnmatchedId {
                id: extra,
                missing_from: JoinSide::Embeddings,
            });
        }
        Ok(out)
    }
}
