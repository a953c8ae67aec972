use std::fmt;

use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Tfidf,
    Embedding,
    Pca,
    Metadata,
    Pseudo,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Tfidf => "tfidf",
            BlockKind::Embedding => "embedding",
            BlockKind::Pca => "pca",
            BlockKind::Metadata => "metadata",
            BlockKind::Pseudo => "pseudo",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub width: usize,
}

/// Dense row-major feature matrix with named column blocks. Row `i` is
/// record `i` of the corpus the matrix was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    blocks: Vec<Block>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, blocks: Vec<Block>, values: Vec<f64>) -> Result<Self, FeatureError> {
        let width: usize = blocks.iter().map(|b| b.width).sum();
        if values.len() != n_rows * width {
            return Err(FeatureError::ShapeMismatch {
                n_rows,
                width,
                len: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteValue {
                row: pos / width,
                col: pos % width,
            });
        }
        Ok(FeatureMatrix {
            n_rows,
            blocks,
            values,
        })
    }

    pub fn single_block(
        kind: BlockKind,
        n_rows: usize,
        width: usize,
        values: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        Self::new(n_rows, vec![Block { kind, width }], values)
    }

    /// A matrix with rows but no columns, the identity for assembly.
    pub fn empty(n_rows: usize) -> Self {
        FeatureMatrix {
            n_rows,
            blocks: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| b.width).sum()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width() + col]
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let w = self.width();
        let mut values = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            values.extend_from_slice(&self.values[r * w..(r + 1) * w]);
        }
        FeatureMatrix {
            n_rows: rows.len(),
            blocks: self.blocks.clone(),
            values,
        }
    }

    /// Appends one column as a new block of width 1.
    pub fn with_column(
        &self,
        kind: BlockKind,
        column: &[f64],
    ) -> Result<FeatureMatrix, FeatureError> {
        let col = FeatureMatrix::single_block(kind, column.len(), 1, column.to_vec())?;
        assemble_features(&[self.clone(), col])
    }

    /// Keeps only the blocks whose kind satisfies `keep`.
    pub fn filter_blocks(&self, keep: impl Fn(BlockKind) -> bool) -> FeatureMatrix {
        let w = self.width();
        let mut spans = Vec::new();
        let mut start = 0;
        for b in &self.blocks {
            if keep(b.kind) {
                spans.push((*b, start));
            }
            start += b.width;
        }
        let new_w: usize = spans.iter().map(|(b, _)| b.width).sum();
        let mut values = Vec::with_capacity(self.n_rows * new_w);
        for i in 0..self.n_rows {
            let row = &self.values[i * w..(i + 1) * w];
            for (b, s) in &spans {
                values.extend_from_slice(&row[*s..s + b.width]);
            }
        }
        FeatureMatrix {
            n_rows: self.n_rows,
            blocks: spans.into_iter().map(|(b, _)| b).collect(),
            values,
        }
    }
}

/// Concatenates column blocks left to right, keeping block kinds and order.
pub fn assemble_features(parts: &[FeatureMatrix]) -> Result<FeatureMatrix, FeatureError> {
    let Some(first) = parts.first() else {
        return Ok(FeatureMatrix::empty(0));
    };
    let n_rows = first.n_rows;
    if let Some(bad) = parts.iter().find(|p| p.n_rows != n_rows) {
        return Err(FeatureError::RowCountMismatch {
            expected: n_rows,
            found: bad.n_rows,
        });
    }
    let blocks: Vec<Block> = parts
        .iter()
        .flat_map(|p| p.blocks.iter().copied())
        .collect();
    let width: usize = blocks.iter().map(|b| b.width).sum();
    let mut values = Vec::with_capacity(n_rows * width);
    for i in 0..n_rows {
        for p in parts {
            values.extend_from_slice(p.row(i));
        }
    }
    Ok(FeatureMatrix {
        n_rows,
        blocks,
        values,
    })
}
