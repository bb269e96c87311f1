//! Embedding matrices, label records and the strict id join between them.
//!
//! Two embedding encodings are supported:
//!
//! * binary: the magic bytes `MPE1`, little-endian `u32` row count `n` and
//!   dimensionality `d`, `n * d` little-endian `f32` values in row-major
//!   order, then `n` newline-terminated UTF-8 ids;
//! * CSV: a header `id,e0,e1,...,e{d-1}` followed by one row per instance.
//!
//! Labels are CSV with the header `id,gold[,pred][,agreement]`.
//!
//! Values are widened to `f64` on load; everything downstream is 64-bit.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, JoinSide, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"MPE1";

/// A binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Zero,
    One,
}

impl Label {
    pub fn from_u8(value: u8) -> Option<Label> {
        match value {
            0 => Some(Label::Zero),
            1 => Some(Label::One),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Zero => 0,
            Label::One => 1,
        }
    }

    pub fn index(self) -> usize {
        self.as_u8() as usize
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Zero => Label::One,
            Label::One => Label::Zero,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Annotator agreement tier: 3/5, 4/5 or 5/5 of annotators agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Agreement {
    #[serde(rename = "A0")]
    A0,
    #[serde(rename = "A+")]
    APlus,
    #[serde(rename = "A++")]
    APlusPlus,
}

impl Agreement {
    pub const ALL: [Agreement; 3] = [Agreement::A0, Agreement::APlus, Agreement::APlusPlus];

    pub fn as_str(self) -> &'static str {
        match self {
            Agreement::A0 => "A0",
            Agreement::APlus => "A+",
            Agreement::APlusPlus => "A++",
        }
    }
}

impl FromStr for Agreement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A0" => Ok(Agreement::A0),
            "A+" => Ok(Agreement::APlus),
            "A++" => Ok(Agreement::APlusPlus),
            other => Err(Error::Format(format!("unknown agreement tier {other:?}"))),
        }
    }
}

impl std::fmt::Display for Agreement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which label column a metric reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Gold,
    Pred,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Channel::Gold => f.write_str("gold"),
            Channel::Pred => f.write_str("pred"),
        }
    }
}

/// Row-major `n x d` matrix of finite values with one unique id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
    dim: usize,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if dim == 0 {
            return Err(Error::Format("dimensionality must be at least 1".into()));
        }
        if values.len() != ids.len() * dim {
            return Err(Error::Format(format!(
                "expected {} values for {} rows of dimension {}, found {}",
                ids.len() * dim,
                ids.len(),
                dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::row(pos / dim, "non-finite value"));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(Self { ids, values, dim })
    }

    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::row(
                    i,
                    format!("expected {dim} columns, found {}", row.len()),
                ));
            }
            values.extend_from_slice(row);
        }
        Self::new(ids, values, dim)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    fn select(&self, indices: &[usize]) -> EmbeddingMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            ids.push(self.ids[i].clone());
        }
        EmbeddingMatrix {
            ids,
            values,
            dim: self.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    Binary,
    Csv,
}

impl EmbeddingFormat {
    /// Guesses the format from a file extension; anything but `.csv` is binary.
    pub fn from_path(path: &Path) -> EmbeddingFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        EmbeddingFormat::Binary => read_embeddings_binary(reader),
        EmbeddingFormat::Csv => read_embeddings_csv(reader),
    }
}

pub fn read_embeddings_binary<R: Read>(mut reader: R) -> Result<EmbeddingMatrix> {
    let mut header = [0u8; 12];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..4] != BINARY_MAGIC {
        return Err(Error::Format("bad magic bytes, expected MPE1".into()));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if dim == 0 {
        return Err(Error::Format("dimensionality must be at least 1".into()));
    }

    let mut values = Vec::with_capacity(n * dim);
    let mut buf = vec![0u8; dim * 4];
    for row in 0..n {
        reader
            .read_exact(&mut buf)
            .map_err(|_| Error::row(row, "truncated value block"))?;
        for chunk in buf.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::row(row, "non-finite value"));
            }
            values.push(f64::from(v));
        }
    }

    let mut reader = BufReader::new(reader);
    let mut ids = Vec::with_capacity(n);
    let mut line = String::new();
    for row in 0..n {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::row(row, format!("unreadable id: {e}")))?;
        if read == 0 || !line.ends_with('\n') {
            return Err(Error::row(row, "missing newline-terminated id"));
        }
        ids.push(line.trim_end_matches('\n').to_string());
    }
    EmbeddingMatrix::new(ids, values, dim)
}

/// Writes the binary encoding. Values are narrowed to `f32`.
pub fn write_embeddings_binary<W: Write>(
    matrix: &EmbeddingMatrix,
    writer: W,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(matrix.len() as u32).to_le_bytes())?;
    w.write_all(&(matrix.dim() as u32).to_le_bytes())?;
    for &v in matrix.values() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    for id in matrix.ids() {
        w.write_all(id.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_embeddings_csv<R: Read>(reader: R) -> Result<EmbeddingMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    if headers.get(0) != Some("id") {
        return Err(Error::Format("header must start with \"id\"".into()));
    }
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::Format("header has no embedding columns".into()));
    }
    for (j, name) in headers.iter().skip(1).enumerate() {
        if name != format!("e{j}") {
            return Err(Error::Format(format!(
                "header column {} is {name:?}, expected \"e{j}\"",
                j + 1
            )));
        }
    }

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::row(row, e.to_string()))?;
        if record.len() != dim + 1 {
            return Err(Error::row(
                row,
                format!("expected {} columns, found {}", dim + 1, record.len()),
            ));
        }
        ids.push(record[0].to_string());
        for field in record.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::row(row, format!("unparseable value {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::row(row, "non-finite value"));
            }
            values.push(v);
        }
    }
    EmbeddingMatrix::new(ids, values, dim)
}

pub fn write_embeddings_csv<W: Write>(matrix: &EmbeddingMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((0..matrix.dim()).map(|j| format!("e{j}")));
    let map_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(map_err)?;
    for (id, row) in matrix.ids().iter().zip(matrix.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(map_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub gold: Label,
    pub pred: Option<Label>,
    pub agreement: Option<Agreement>,
}

pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(BufReader::new(file))
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<LabelRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header: {e}")))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = column("id").ok_or_else(|| Error::MissingColumn("id".into()))?;
    let gold_col = column("gold").ok_or_else(|| Error::MissingColumn("gold".into()))?;
    let pred_col = column("pred");
    let agreement_col = column("agreement");

    let parse_label = |row: usize, field: &str, what: &str| -> Result<Label> {
        field
            .trim()
            .parse::<u8>()
            .ok()
            .and_then(Label::from_u8)
            .ok_or_else(|| Error::row(row, format!("{what} must be 0 or 1, found {field:?}")))
    };

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::row(row, e.to_string()))?;
        let id = rec
            .get(id_col)
            .ok_or_else(|| Error::row(row, "missing id"))?
            .to_string();
        let gold = parse_label(row, rec.get(gold_col).unwrap_or(""), "gold")?;
        let pred = match pred_col.and_then(|c| rec.get(c)) {
            Some(f) if !f.trim().is_empty() => Some(parse_label(row, f, "pred")?),
            _ => None,
        };
        let agreement = match agreement_col.and_then(|c| rec.get(c)) {
            Some(f) if !f.trim().is_empty() => Some(
                f.trim()
                    .parse::<Agreement>()
                    .map_err(|e| Error::row(row, e.to_string()))?,
            ),
            _ => None,
        };
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        records.push(LabelRecord {
            id,
            gold,
            pred,
            agreement,
        });
    }
    Ok(records)
}

pub fn write_labels<W: Write>(records: &[LabelRecord], writer: W) -> Result<()> {
    let has_pred = records.iter().any(|r| r.pred.is_some());
    let has_agreement = records.iter().any(|r| r.agreement.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let map_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["id", "gold"];
    if has_pred {
        header.push("pred");
    }
    if has_agreement {
        header.push("agreement");
    }
    w.write_record(&header).map_err(map_err)?;
    for r in records {
        let mut rec = vec![r.id.clone(), r.gold.to_string()];
        if has_pred {
            rec.push(r.pred.map(|p| p.to_string()).unwrap_or_default());
        }
        if has_agreement {
            rec.push(r.agreement.map(|a| a.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(map_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Embeddings joined row-for-row with their label records.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    embeddings: EmbeddingMatrix,
    labels: Vec<LabelRecord>,
}

/// Inner-joins labels onto embedding rows by id.
///
/// The join is strict: an id present on only one side is an error. Row
/// order follows the embedding matrix, so label-file order is irrelevant.
pub fn join(embeddings: EmbeddingMatrix, labels: Vec<LabelRecord>) -> Result<EmbeddingDataset> {
    let mut by_id: HashMap<String, LabelRecord> = HashMap::with_capacity(labels.len());
    for rec in labels {
        if by_id.contains_key(&rec.id) {
            return Err(Error::DuplicateId(rec.id));
        }
        by_id.insert(rec.id.clone(), rec);
    }
    let mut aligned = Vec::with_capacity(embeddings.len());
    for id in embeddings.ids() {
        match by_id.remove(id) {
            Some(rec) => aligned.push(rec),
            None => {
                return Err(Error::UnmatchedId {
                    id: id.clone(),
                    missing_from: JoinSide::Labels,
                })
            }
        }
    }
    if let Some(id) = by_id.into_keys().min() {
        return Err(Error::UnmatchedId {
            id,
            missing_from: JoinSide::Embeddings,
        });
    }
    Ok(EmbeddingDataset {
        embeddings,
        labels: aligned,
    })
}

/// Keeps the instances of one agreement tier, preserving order.
///
/// An empty result is legal and only logged.
pub fn filter_by_agreement(ds: &EmbeddingDataset, tier: Agreement) -> Result<EmbeddingDataset> {
    let indices = ds.agreement_indices(tier)?;
    if indices.is_empty() {
        log::warn!("agreement filter {tier} selected no instances");
    }
    Ok(ds.subset(&indices))
}

impl EmbeddingDataset {
    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn labels(&self) -> &[LabelRecord] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.embeddings.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.embeddings.row(i)
    }

    pub fn gold(&self) -> Vec<Label> {
        self.labels.iter().map(|r| r.gold).collect()
    }

    /// Predicted labels, if every record carries one.
    pub fn pred(&self) -> Option<Vec<Label>> {
        self.labels.iter().map(|r| r.pred).collect()
    }

    pub fn has_pred(&self) -> bool {
        self.labels.iter().all(|r| r.pred.is_some())
    }

    pub fn has_agreement(&self) -> bool {
        self.labels.iter().any(|r| r.agreement.is_some())
    }

    pub fn channel(&self, channel: Channel) -> Result<Vec<Label>> {
        match channel {
            Channel::Gold => Ok(self.gold()),
            Channel::Pred => self.pred().ok_or(Error::MissingChannel(Channel::Pred)),
        }
    }

    /// Row indices of one agreement tier, in row order.
    pub fn agreement_indices(&self, tier: Agreement) -> Result<Vec<usize>> {
        if !self.has_agreement() {
            return Err(Error::NoAgreementColumn);
        }
        Ok(self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, r)| r.agreement == Some(tier))
            .map(|(i, _)| i)
            .collect())
    }

    /// A new dataset holding the given rows in the given order.
    ///
    /// Unlike [`EmbeddingMatrix::new`] this may produce an empty dataset.
    pub fn subset(&self, indices: &[usize]) -> EmbeddingDataset {
        EmbeddingDataset {
            embeddings: self.embeddings.select(indices),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}
