//! Embedding matrices and their on-disk formats.
//!
//! Two formats are supported. `EMBX v1` is a little-endian binary layout:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EMBX" (45 4D 42 58)
//!      4     4  u32 version = 1
//!      8     8  u64 count
//!     16     4  u32 dim
//!     20     4  u32 dtype tag = 1 (f32)
//!     24     -  count * dim f32, row-major
//! ```
//!
//! CSV is one vector per line, comma separated, no header unless the caller
//! asks for the first line to be skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMBX_MAGIC: [u8; 4] = *b"EMBX";
pub const EMBX_VERSION: u32 = 1;
pub const EMBX_DTYPE_F32: u32 = 1;
pub const EMBX_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// Guess the format from a file extension; anything but `.csv` is binary.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "embx" => Ok(Format::Binary),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown embedding format '{other}'"))),
        }
    }
}

/// Dense row-major `count x dim` matrix of finite f32 values.
///
/// Row indices are the identity of each vector in every downstream table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    count: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(count: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dim must be positive".into()));
        }
        if data.len() != count * dim {
            return Err(Error::InvalidInput(format!(
                "data length {} does not equal count {count} x dim {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { count, dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidInput(
                "cannot infer dim from zero rows".into(),
            ));
        };
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.count {
                return Err(Error::InvalidInput(format!(
                    "row {i} out of range for {} rows",
                    self.count
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            count: indices.len(),
            dim: self.dim,
            data,
        })
    }

    /// Stack `other` below `self`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dim {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            count: self.count + other.count,
            dim: self.dim,
            data,
        })
    }

    pub fn to_embx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(EMBX_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&EMBX_MAGIC);
        out.extend_from_slice(&EMBX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&EMBX_DTYPE_F32.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parse an EMBX v1 buffer. Acceptance depends only on the header and
    /// the payload length; values are then checked for finiteness.
    pub fn from_embx_bytes(bytes: &[u8]) -> Result<Self> {
        let header = parse_embx_header(bytes)?;
        let payload = &bytes[EMBX_HEADER_LEN..];
        let expected = header
            .count
            .checked_mul(header.dim as u64)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format {
                offset: 8,
                reason: "count x dim overflows".into(),
            })?;
        if (payload.len() as u64) < expected {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                reason: format!(
                    "payload truncated: expected {expected} bytes, found {}",
                    payload.len()
                ),
            });
        }
        if (payload.len() as u64) > expected {
            return Err(Error::Format {
                offset: EMBX_HEADER_LEN as u64 + expected,
                reason: format!(
                    "{} trailing bytes after payload",
                    payload.len() as u64 - expected
                ),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(header.count as usize, header.dim as usize, data)
    }

    /// Parse CSV text, one row per line. Blank trailing lines are ignored.
    pub fn from_csv_str(text: &str, skip_header: bool) -> Result<Self> {
        let mut dim = None;
        let mut data = Vec::new();
        let mut count = 0usize;
        let mut lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .collect();
        while lines.last().is_some_and(|(_, l)| l.trim().is_empty()) {
            lines.pop();
        }
        let skip = usize::from(skip_header);
        for (line_no, line) in lines.into_iter().skip(skip) {
            let start = data.len();
            for field in line.split(',') {
                let field = field.trim();
                let v: f32 = field.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    reason: format!("cannot parse '{field}' as a number"),
                })?;
                data.push(v);
            }
            let width = data.len() - start;
            match dim {
                None => dim = Some(width),
                Some(d) if d != width => {
                    return Err(Error::Parse {
                        line: line_no,
                        reason: format!("ragged row: {width} fields, expected {d}"),
                    })
                }
                Some(_) => {}
            }
            count += 1;
        }
        let dim = dim.ok_or(Error::Parse {
            line: 1,
            reason: "no data rows".into(),
        })?;
        Self::new(count, dim, data)
    }

    /// CSV text using the shortest decimal form that round-trips each f32.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 8);
        for row in self.rows() {
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbxHeader {
    pub count: u64,
    pub dim: u32,
}

pub fn parse_embx_header(bytes: &[u8]) -> Result<EmbxHeader> {
    if let Some(pos) = bytes
        .iter()
        .zip(EMBX_MAGIC.iter())
        .position(|(a, b)| a != b)
    {
        return Err(Error::Format {
            offset: pos as u64,
            reason: "bad magic, expected \"EMBX\"".into(),
        });
    }
    if bytes.len() < EMBX_HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            reason: format!("header truncated: {} of {EMBX_HEADER_LEN} bytes", bytes.len()),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != EMBX_VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let dim = u32_at(16);
    if dim == 0 {
        return Err(Error::Format {
            offset: 16,
            reason: "dim must be positive".into(),
        });
    }
    let dtype = u32_at(20);
    if dtype != EMBX_DTYPE_F32 {
        return Err(Error::Format {
            offset: 20,
            reason: format!("unsupported dtype tag {dtype}"),
        });
    }
    Ok(EmbxHeader { count, dim })
}

pub fn load_embeddings(path: impl AsRef<Path>, format: Format) -> Result<EmbeddingMatrix> {
    load_embeddings_with(path, format, false)
}

/// Like [`load_embeddings`], optionally skipping a CSV header line.
pub fn load_embeddings_with(
    path: impl AsRef<Path>,
    format: Format,
    csv_header: bool,
) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Binary => EmbeddingMatrix::from_embx_bytes(&bytes),
        Format::Csv => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Format {
                offset: e.valid_up_to() as u64,
                reason: "CSV is not valid UTF-8".into(),
            })?;
            EmbeddingMatrix::from_csv_str(text, csv_header)
        }
    }
}

pub fn save_embeddings(
    matrix: &EmbeddingMatrix,
    path: impl AsRef<Path>,
    format: Format,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        Format::Binary => matrix.to_embx_bytes(),
        Format::Csv => matrix.to_csv_string().into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Check that a training/generated pair can be matched against each other.
pub fn validate_pair(training: &EmbeddingMatrix, generated: &EmbeddingMatrix) -> Result<()> {
    if training.dim() != generated.dim() {
        return Err(Error::PairDims {
            training: training.dim(),
            generated: generated.dim(),
        });
    }
    if training.is_empty() {
        return Err(Error::EmptySet("training"));
    }
    if generated.is_empty() {
        return Err(Error::EmptySet("generated"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub id: String,
}

/// Optional mapping from row indices to opaque external identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn from_ids<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        Self {
            entries: ids
                .into_iter()
                .enumerate()
                .map(|(index, id)| ManifestEntry {
                    index,
                    id: id.into(),
                })
                .collect(),
        }
    }

    /// Indices must be exactly `0..count`, each once.
    pub fn validate(&self, count: usize) -> Result<()> {
        if self.entries.len() != count {
            return Err(Error::InvalidInput(format!(
                "manifest has {} entries for {count} rows",
                self.entries.len()
            )));
        }
        let mut seen = vec![false; count];
        for e in &self.entries {
            match seen.get_mut(e.index) {
                Some(s) if !*s => *s = true,
                Some(_) => {
                    return Err(Error::InvalidInput(format!(
                        "manifest index {} appears twice",
                        e.index
                    )))
                }
                None => {
                    return Err(Error::InvalidInput(format!(
                        "manifest index {} out of range",
                        e.index
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn id_of(&self, index: usize) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.index == index)
            .map(|e| e.id.as_str())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
