//! EMB1 embedding files: `"EMB1"`, u32 LE rows, u32 LE columns, then
//! row-major f32 LE values with no trailing bytes.

use std::fs;
use std::path::Path;

use super::{BlockKind, FeatureError, FeatureMatrix};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(n_rows: usize, dim: usize, values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != n_rows * dim {
            return Err(FeatureError::ShapeMismatch {
                n_rows,
                width: dim,
                len: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteValue {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(EmbeddingMatrix {
            n_rows,
            dim,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_features(&self) -> FeatureMatrix {
        FeatureMatrix::single_block(
            BlockKind::Embedding,
            self.n_rows,
            self.dim,
            self.values.clone(),
        )
        .expect("finite")
    }

    /// Reinterprets every column of a feature matrix as an embedding.
    pub fn from_features(m: &FeatureMatrix) -> Self {
        EmbeddingMatrix {
            n_rows: m.n_rows(),
            dim: m.width(),
            values: m.values().to_vec(),
        }
    }
}

/// Reads an EMB1 file and checks its row count against `expected_rows`.
pub fn load_embeddings(path: &Path, expected_rows: usize) -> Result<EmbeddingMatrix, FeatureError> {
    let bytes = fs::read(path).map_err(|e| FeatureError::Io(path.display().to_string(), e))?;
    read_embeddings(&bytes, expected_rows)
}

pub fn read_embeddings(
    bytes: &[u8],
    expected_rows: usize,
) -> Result<EmbeddingMatrix, FeatureError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != EMB1_MAGIC {
            return Err(FeatureError::BadMagic(
                bytes[..4].try_into().expect("4 bytes"),
            ));
        }
        return Err(FeatureError::TruncatedFile {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != EMB1_MAGIC {
        return Err(FeatureError::BadMagic(magic));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if n != expected_rows {
        return Err(FeatureError::RowCountMismatch {
            expected: expected_rows,
            found: n,
        });
    }
    let expected = HEADER_LEN + n * d * 4;
    if bytes.len() < expected {
        return Err(FeatureError::TruncatedFile {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FeatureError::TrailingBytes(bytes.len() - expected));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    EmbeddingMatrix::new(n, d, values)
}

/// Encodes a matrix as EMB1 bytes; values are rounded to f32.
pub fn write_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.values.len() * 4);
    out.extend_from_slice(EMB1_MAGIC);
    out.extend_from_slice(&(m.n_rows as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim as u32).to_le_bytes());
    for v in &m.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}
