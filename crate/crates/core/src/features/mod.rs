//! Feature construction: TF-IDF, encoder embeddings, PCA, metadata and
//! column-block assembly.

mod embedding;
mod matrix;
mod pca;
mod tfidf;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CommentRecord, Corpus};

pub use embedding::{
    load_embeddings, read_embeddings, write_embeddings, EmbeddingMatrix, EMB1_MAGIC,
};
pub use matrix::{assemble_features, Block, BlockKind, FeatureMatrix};
pub use pca::{apply_pca, fit_pca, PcaModel};
pub use tfidf::{fit_tfidf, transform_tfidf, Vocabulary};
pub use tokenize::tokenize;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit on an empty corpus")]
    EmptyCorpus,
    #[error("max_features must be positive")]
    BadMaxFeatures,
    #[error("io error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("bad magic bytes {0:?}, expected \"EMB1\"")]
    BadMagic([u8; 4]),
    #[error("row count mismatch: expected {expected}, found {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("k = {k} is out of range for {n_rows} rows of dimension {dim}")]
    BadK { k: usize, n_rows: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("value buffer of length {len} does not match shape {n_rows}x{width}")]
    ShapeMismatch {
        n_rows: usize,
        width: usize,
        len: usize,
    },
}

/// Transform applied to like/report counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataTransform {
    #[default]
    Log1p,
    Raw,
}

/// `[ln(1 + likes), ln(1 + reports)]`, or the raw counts.
pub fn metadata_features(record: &CommentRecord, transform: MetadataTransform) -> [f64; 2] {
    let (l, r) = (record.like_count as f64, record.report_count as f64);
    match transform {
        MetadataTransform::Log1p => [l.ln_1p(), r.ln_1p()],
        MetadataTransform::Raw => [l, r],
    }
}

/// Metadata block for every record of a corpus.
pub fn metadata_matrix(corpus: &Corpus, transform: MetadataTransform) -> FeatureMatrix {
    let values = corpus
        .records()
        .iter()
        .flat_map(|r| metadata_features(r, transform))
        .collect();
    FeatureMatrix::single_block(BlockKind::Metadata, corpus.len(), 2, values)
        .expect("finite metadata")
}
