//! Attention trace records and their line-oriented on-disk format.
//!
//! A trace file starts with a header line `{"schema_version":1}` followed by
//! one JSON object per record. Only the final prompt position's attention row
//! is stored per layer and head, along with the norm of each position's
//! attention contribution to that final position. Files may be gzip
//! compressed; compression is detected from the magic bytes on read and
//! chosen from a `.gz` extension on write.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Default tolerance on attention row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// Attention tensor indexed `[layer][head][prompt position]`.
pub type Tensor3 = Vec<Vec<Vec<f64>>>;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("record {id}: {invariant}")]
    Validation { id: String, invariant: String },
    #[error("unsupported trace schema version {0}")]
    Schema(u32),
}

impl TraceError {
    fn invalid(id: &str, invariant: impl Into<String>) -> Self {
        TraceError::Validation { id: id.to_string(), invariant: invariant.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerifierKind {
    ExactMatch,
    CharStartsWith,
    CharEndsWith,
    KbLookup,
}

/// One constraint of a query: a prompt token span plus how to verify it.
///
/// `target` payloads by verifier:
/// - `ExactMatch`: accepted answers separated by `|`
/// - `CharStartsWith` / `CharEndsWith`: a single letter
/// - `KbLookup`: `field=value`, checked against the entity named by the completion
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub name: String,
    pub token_start: usize,
    pub token_end: usize,
    pub verifier: VerifierKind,
    pub target: String,
    #[serde(default)]
    pub satisfied: Option<bool>,
}

impl ConstraintSpec {
    pub fn span(&self) -> std::ops::Range<usize> {
        self.token_start..self.token_end
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.target.split('|')
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub model_name: String,
    pub n_layers: usize,
    pub n_heads: usize,
    pub model_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popularity: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constrainedness: Option<u64>,
    /// Producer-specific annotations, preserved verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl TraceMeta {
    pub fn new(model_name: impl Into<String>, n_layers: usize, n_heads: usize, model_dim: usize) -> Self {
        Self {
            model_name: model_name.into(),
            n_layers,
            n_heads,
            model_dim,
            popularity: None,
            constrainedness: None,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub prompt_tokens: Vec<String>,
    pub constraints: Vec<ConstraintSpec>,
    pub completion_tokens: Vec<String>,
    pub completion_logprobs: Vec<f64>,
    pub attn_weights: Tensor3,
    pub attn_contrib_norms: Tensor3,
    pub meta: TraceMeta,
}

impl TraceRecord {
    pub fn n_layers(&self) -> usize {
        self.meta.n_layers
    }

    pub fn n_heads(&self) -> usize {
        self.meta.n_heads
    }

    pub fn prompt_len(&self) -> usize {
        self.prompt_tokens.len()
    }

    /// True iff every constraint is labeled satisfied. `None` if any is unlabeled.
    pub fn all_satisfied(&self) -> Option<bool> {
        self.constraints.iter().try_fold(true, |acc, c| c.satisfied.map(|s| acc && s))
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        self.validate_with(ROW_SUM_TOLERANCE)
    }

    /// Checks every record invariant, naming the first one that fails.
    pub fn validate_with(&self, row_sum_tol: f64) -> Result<(), TraceError> {
        let id = self.id.as_str();
        let t = self.prompt_len();
        if t == 0 {
            return Err(TraceError::invalid(id, "prompt must contain at least one token"));
        }
        if self.constraints.is_empty() {
            return Err(TraceError::invalid(id, "record must carry at least one constraint"));
        }
        for c in &self.constraints {
            if c.token_start >= c.token_end || c.token_end > t {
                return Err(TraceError::invalid(
                    id,
                    format!("constraint {} span {}..{} outside prompt of length {t}", c.name, c.token_start, c.token_end),
                ));
            }
        }
        let mut spans: Vec<_> = self.constraints.iter().collect();
        spans.sort_by_key(|c| c.token_start);
        for pair in spans.windows(2) {
            if pair[1].token_start < pair[0].token_end {
                return Err(TraceError::invalid(
                    id,
                    format!("constraint spans {} and {} overlap", pair[0].name, pair[1].name),
                ));
            }
        }
        let (l, h) = (self.meta.n_layers, self.meta.n_heads);
        if l == 0 || h == 0 {
            return Err(TraceError::invalid(id, "meta n_layers and n_heads must be positive"));
        }
        check_shape(id, "attn_weights", &self.attn_weights, l, h, t)?;
        check_shape(id, "attn_contrib_norms", &self.attn_contrib_norms, l, h, t)?;
        for (li, layer) in self.attn_weights.iter().enumerate() {
            for (hi, row) in layer.iter().enumerate() {
                if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(TraceError::invalid(
                        id,
                        format!("attn_weights[{li}][{hi}] has a negative or non-finite entry"),
                    ));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > row_sum_tol {
                    return Err(TraceError::invalid(
                        id,
                        format!("attn_weights[{li}][{hi}] row sum {sum} differs from 1 by more than {row_sum_tol}"),
                    ));
                }
            }
        }
        let bad_norm = self.attn_contrib_norms.iter().flatten().flatten().any(|&v| !v.is_finite() || v < 0.0);
        if bad_norm {
            return Err(TraceError::invalid(id, "attn_contrib_norms has a negative or non-finite entry"));
        }
        if self.completion_logprobs.len() != self.completion_tokens.len() {
            return Err(TraceError::invalid(
                id,
                format!(
                    "completion_logprobs length {} differs from completion_tokens length {}",
                    self.completion_logprobs.len(),
                    self.completion_tokens.len()
                ),
            ));
        }
        if self.completion_logprobs.iter().any(|&lp| lp.is_nan() || lp > 0.0) {
            return Err(TraceError::invalid(id, "completion_logprobs entries must be <= 0"));
        }
        Ok(())
    }
}

fn check_shape(id: &str, field: &str, tensor: &Tensor3, l: usize, h: usize, t: usize) -> Result<(), TraceError> {
    let ok = tensor.len() == l && tensor.iter().all(|layer| layer.len() == h && layer.iter().all(|row| row.len() == t));
    if ok {
        Ok(())
    } else {
        Err(TraceError::invalid(id, format!("{field} shape does not match [{l}][{h}][{t}]")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceDataset {
    pub records: Vec<TraceRecord>,
    pub schema_version: u32,
}

impl Default for TraceDataset {
    fn default() -> Self {
        Self { records: Vec::new(), schema_version: SCHEMA_VERSION }
    }
}

impl TraceDataset {
    /// Builds a dataset, validating every record and the cross-record invariants.
    pub fn new(records: Vec<TraceRecord>) -> Result<Self, TraceError> {
        let ds = Self { records, schema_version: SCHEMA_VERSION };
        ds.validate(ROW_SUM_TOLERANCE)?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(n_layers, n_heads)` shared by all records, or `None` when empty.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.records.first().map(|r| (r.n_layers(), r.n_heads()))
    }

    pub fn validate(&self, row_sum_tol: f64) -> Result<(), TraceError> {
        let mut ids = HashSet::with_capacity(self.records.len());
        let dims = self.dims();
        for r in &self.records {
            r.validate_with(row_sum_tol)?;
            if Some((r.n_layers(), r.n_heads())) != dims {
                return Err(TraceError::invalid(&r.id, "layer/head counts differ from the rest of the dataset"));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(TraceError::invalid(&r.id, "duplicate record id"));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
}

/// Knobs for [`read_traces_with`].
#[derive(Clone, Debug)]
pub struct ReadOptions {
    pub row_sum_tolerance: f64,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self { row_sum_tolerance: ROW_SUM_TOLERANCE }
    }
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<TraceDataset, TraceError> {
    read_traces_with(path, &ReadOptions::default())
}

pub fn read_traces_with(path: impl AsRef<Path>, opts: &ReadOptions) -> Result<TraceDataset, TraceError> {
    let path = path.as_ref();
    let io_err = |source| TraceError::Io { path: path.to_path_buf(), source };
    let mut file = BufReader::new(File::open(path).map_err(io_err)?);
    let gz = file.fill_buf().map_err(io_err)?.starts_with(&[0x1f, 0x8b]);
    let reader: Box<dyn Read> = if gz { Box::new(MultiGzDecoder::new(file)) } else { Box::new(file) };
    parse_traces(BufReader::new(reader), opts).map_err(|e| match e {
        TraceError::Io { source, .. } => io_err(source),
        other => other,
    })
}

/// Parses trace lines from any buffered reader. Blank lines are ignored.
pub fn parse_traces(reader: impl BufRead, opts: &ReadOptions) -> Result<TraceDataset, TraceError> {
    let mut ds = TraceDataset::default();
    let mut seen_content = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| TraceError::Io { path: PathBuf::new(), source })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if let Ok(header) = serde_json::from_str::<Header>(trimmed) {
                if header.schema_version != SCHEMA_VERSION {
                    return Err(TraceError::Schema(header.schema_version));
                }
                ds.schema_version = header.schema_version;
                continue;
            }
        }
        let record: TraceRecord = serde_json::from_str(trimmed)
            .map_err(|e| TraceError::Parse { line: line_no, message: e.to_string() })?;
        ds.records.push(record);
    }
    ds.validate(opts.row_sum_tolerance)?;
    Ok(ds)
}

/// Writes the dataset; an empty dataset produces an empty file.
pub fn write_traces(ds: &TraceDataset, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    let io_err = |source| TraceError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    if gz {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        emit_traces(ds, &mut enc).map_err(io_err)?;
        enc.finish().and_then(|mut w| w.flush()).map_err(io_err)
    } else {
        let mut w = BufWriter::new(file);
        emit_traces(ds, &mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }
}

/// Serializes the dataset in the trace line format.
pub fn emit_traces(ds: &TraceDataset, out: &mut impl Write) -> io::Result<()> {
    if ds.records.is_empty() {
        return Ok(());
    }
    serde_json::to_writer(&mut *out, &Header { schema_version: ds.schema_version })?;
    out.write_all(b"\n")?;
    for r in &ds.records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
