use std::fmt::Write as _;
use std::path::Path;

use super::{check_len, EvalError};
use crate::features::{apply_pca, fit_pca, EmbeddingMatrix};

/// Two-component projection as tab-separated text with header
/// `x\ty\tlabel\tflagged`. The flagged column is empty when `flagged` is
/// `None`.
pub fn scatter_text(
    e: &EmbeddingMatrix,
    labels: &[bool],
    flagged: Option<&[bool]>,
) -> Result<String, EvalError> {
    check_len(e.n_rows(), labels.len(), "embeddings vs labels")?;
    if let Some(f) = flagged {
        check_len(e.n_rows(), f.len(), "embeddings vs flags")?;
    }
    let model = fit_pca(e, 2.min(e.dim()))?;
    let proj = apply_pca(&model, e)?;
    let mut out = String::from("x\ty\tlabel\tflagged\n");
    for i in 0..e.n_rows() {
        let row = proj.row(i);
        let y = row.get(1).copied().unwrap_or(0.0);
        let flag = flagged.map_or("", |f| if f[i] { "1" } else { "0" });
        writeln!(
            out,
            "{:.6}\t{:.6}\t{}\t{}",
            row[0], y, labels[i] as u8, flag
        )
        .expect("writing to a String");
    }
    Ok(out)
}

pub fn pca_scatter_export(
    e: &EmbeddingMatrix,
    labels: &[bool],
    flagged: Option<&[bool]>,
    out_path: &Path,
) -> Result<(), EvalError> {
    std::fs::write(out_path, scatter_text(e, labels, flagged)?)?;
    Ok(())
}
