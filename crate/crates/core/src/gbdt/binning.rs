use super::GbdtError;
use crate::features::FeatureMatrix;

/// Per-feature bin boundaries.
///
/// Feature `f` has `edges[f].len() + 1` bins; a value `x` falls in the first
/// bin `b` with `x <= edges[f][b]`, or in the last bin if it exceeds every
/// edge. Edges are midpoints between consecutive distinct training values.
#[derive(Clone, Debug, PartialEq)]
pub struct BinMapper {
    edges: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn from_edges(edges: Vec<Vec<f64>>) -> Result<Self, GbdtError> {
        for (f, e) in edges.iter().enumerate() {
            if e.len() > 254
                || e.windows(2)
                    .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
                || e.iter().any(|v| !v.is_finite())
            {
                return Err(GbdtError::BadParams(format!(
                    "bin edges of feature {f} are not strictly increasing finite values"
                )));
            }
        }
        Ok(BinMapper { edges })
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn num_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    #[inline]
    pub fn bin(&self, feature: usize, x: f64) -> u8 {
        self.edges[feature].partition_point(|&e| x > e) as u8
    }
}

/// Column-major bin indices.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedMatrix {
    pub n_rows: usize,
    pub columns: Vec<Vec<u8>>,
}

fn feature_edges(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in values.iter().copied() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let mid = |a: f64, b: f64| a + (b - a) / 2.0;
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| mid(w[0].0, w[1].0)).collect();
    }
    // equal-count quantile edges over the sorted sample
    let n = values.len();
    let mut edges = Vec::with_capacity(max_bins - 1);
    let mut cum = 0usize;
    for i in 0..distinct.len() - 1 {
        cum += distinct[i].1;
        let closed = edges.len();
        if closed + 1 < max_bins && cum * max_bins >= (closed + 1) * n {
            edges.push(mid(distinct[i].0, distinct[i + 1].0));
        }
    }
    edges
}

/// Bins every feature of `x` into at most `max_bins` quantile bins.
pub fn bin_features(x: &FeatureMatrix, max_bins: usize) -> (BinnedMatrix, BinMapper) {
    let (n, w) = (x.n_rows(), x.width());
    let max_bins = max_bins.clamp(2, 255);
    let mut edges = Vec::with_capacity(w);
    let mut columns = Vec::with_capacity(w);
    for f in 0..w {
        let col: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
        let e = feature_edges(col.clone(), max_bins);
        columns.push(
            col.iter()
                .map(|&v| e.partition_point(|&edge| v > edge) as u8)
                .collect(),
        );
        edges.push(e);
    }
    (BinnedMatrix { n_rows: n, columns }, BinMapper { edges })
}
