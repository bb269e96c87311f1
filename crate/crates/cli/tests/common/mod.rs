//! Synthetic datasets and file helpers shared by the integration targets.
#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use mapper_cli::config::{ExportFormat, LabelSource, RunConfig};
use mapper_core::dataset::{write_embeddings_binary, write_embeddings_csv, write_labels};
use mapper_core::{
    Agreement, ClusteringParams, EmbeddingMatrix, Label, LabelRecord, LensKind, LensSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Labeled rows ready to be written out.
#[derive(Debug, Clone)]
pub struct Split {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub gold: Vec<u8>,
    pub pred: Option<Vec<u8>>,
    pub agreement: Option<Vec<Agreement>>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn matrix(&self) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(self.ids.clone(), &self.rows).unwrap()
    }

    pub fn records(&self) -> Vec<LabelRecord> {
        (0..self.len())
            .map(|i| LabelRecord {
                id: self.ids[i].clone(),
                gold: Label::from_u8(self.gold[i]).unwrap(),
                pred: self.pred.as_ref().map(|p| Label::from_u8(p[i]).unwrap()),
                agreement: self.agreement.as_ref().map(|a| a[i]),
            })
            .collect()
    }
}

/// Two Gaussian blobs around random unit centres. Blob membership is the
/// clean label; `spread` is the per-coordinate noise scale.
pub fn two_blobs(
    rng: &mut ChaCha8Rng,
    centres: &[Vec<f64>; 2],
    n_per: usize,
    spread: f64,
    prefix: &str,
) -> Split {
    let d = centres[0].len();
    let mut rows = Vec::with_capacity(2 * n_per);
    let mut gold = Vec::with_capacity(2 * n_per);
    for i in 0..2 * n_per {
        let class = (i % 2) as u8;
        let noise = gaussian(rng, d);
        rows.push(
            centres[class as usize]
                .iter()
                .zip(&noise)
                .map(|(c, e)| c + spread * e)
                .collect(),
        );
        gold.push(class);
    }
    Split {
        ids: (0..2 * n_per).map(|i| format!("{prefix}{i:05}")).collect(),
        rows,
        gold,
        pred: None,
        agreement: None,
    }
}

pub fn centres(rng: &mut ChaCha8Rng, d: usize) -> [Vec<f64>; 2] {
    // Orthogonalise so the blobs are far apart in angle.
    let a = unit(gaussian(rng, d));
    let b = gaussian(rng, d);
    let proj: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let b = unit(b.iter().zip(&a).map(|(y, x)| y - proj * x).collect());
    [a, b]
}

pub fn write_matrix(path: &Path, m: &EmbeddingMatrix) {
    let w = BufWriter::new(File::create(path).unwrap());
    if path.extension().is_some_and(|e| e == "csv") {
        write_embeddings_csv(m, w).unwrap();
    } else {
        write_embeddings_binary(m, w).unwrap();
    }
}

pub fn write_label_file(path: &Path, records: &[LabelRecord]) {
    write_labels(records, BufWriter::new(File::create(path).unwrap())).unwrap();
}

/// Files for one train/test pair inside `dir`.
pub struct Written {
    pub train: PathBuf,
    pub test: PathBuf,
    pub labels: PathBuf,
}

/// Writes both splits and a single shared label file.
pub fn write_pair(dir: &Path, train: &Split, test: &Split, binary: bool) -> Written {
    let ext = if binary { "bin" } else { "csv" };
    let w = Written {
        train: dir.join(format!("train.{ext}")),
        test: dir.join(format!("test.{ext}")),
        labels: dir.join("labels.csv"),
    };
    write_matrix(&w.train, &train.matrix());
    write_matrix(&w.test, &test.matrix());
    let mut recs = train.records();
    recs.extend(test.records());
    write_label_file(&w.labels, &recs);
    w
}

pub fn run_config(
    files: &Written,
    out: PathBuf,
    lenses: &[LensKind],
    r: usize,
    epsilon: f64,
) -> RunConfig {
    RunConfig {
        train: files.train.clone(),
        test: files.test.clone(),
        labels: LabelSource::Shared(files.labels.clone()),
        lenses: lenses.iter().map(|&k| LensSpec::new(k)).collect(),
        r,
        epsilon,
        clustering: ClusteringParams::default(),
        seed: 42,
        agreement: None,
        out,
        exports: vec![ExportFormat::Json],
        threshold: 0.9,
        workers: 0,
    }
}

/// Every file under `root` with its bytes, sorted by relative path.
pub fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path
                    .strip_prefix(base)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Reads a CSV into header plus rows of strings.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}
