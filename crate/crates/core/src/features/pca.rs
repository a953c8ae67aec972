use nalgebra::{DMatrix, SymmetricEigen};

use super::{BlockKind, EmbeddingMatrix, FeatureError, FeatureMatrix};

/// Principal axes of mean-centered data.
///
/// `explained_variance` holds eigenvalues of the population covariance
/// (divisor `n`), so the mean squared reconstruction error of the fit data
/// equals the sum of discarded eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` rows of length `dim`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn project_row(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.components
            .iter()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maps projected coordinates back into the input space.
    pub fn reconstruct_row(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, &zi) in self.components.iter().zip(z) {
            for (xj, cj) in x.iter_mut().zip(c) {
                *xj += zi * cj;
            }
        }
        x
    }
}

/// Fits the top `k` principal axes. Each axis is signed so that its
/// largest-magnitude entry (first one on ties) is positive.
pub fn fit_pca(x: &EmbeddingMatrix, k: usize) -> Result<PcaModel, FeatureError> {
    let (n, d) = (x.n_rows(), x.dim());
    if k == 0 || n < 2 || k > n.min(d) {
        return Err(FeatureError::BadK {
            k,
            n_rows: n,
            dim: d,
        });
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| x.row(i)[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / n as f64;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut axis: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let mut pivot = 0;
        for (j, v) in axis.iter().enumerate() {
            if v.abs() > axis[pivot].abs() {
                pivot = j;
            }
        }
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(axis);
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// Projects rows of `x` onto the model's components.
pub fn apply_pca(model: &PcaModel, x: &EmbeddingMatrix) -> Result<FeatureMatrix, FeatureError> {
    if x.dim() != model.dim() {
        return Err(FeatureError::DimMismatch {
            expected: model.dim(),
            found: x.dim(),
        });
    }
    let values = (0..x.n_rows())
        .flat_map(|i| model.project_row(x.row(i)))
        .collect();
    FeatureMatrix::single_block(BlockKind::Pca, x.n_rows(), model.k(), values)
}
