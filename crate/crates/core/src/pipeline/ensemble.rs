use super::{OofPredictions, PipelineError};
use crate::evalx::{f1_score, unit_grid, Averaging};

/// Convex combination weights, in member order.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleWeights {
    pub weights: Vec<(String, f64)>,
}

impl EnsembleWeights {
    pub fn get(&self, producer: &str) -> Option<f64> {
        self.weights
            .iter()
            .find(|(p, _)| p == producer)
            .map(|w| w.1)
    }
}

fn blend_row(weights: &[f64], probs: &[&[f64]], i: usize) -> f64 {
    let (mut lo, mut hi, mut acc) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for (w, p) in weights.iter().zip(probs) {
        let v = p[i];
        lo = lo.min(v);
        hi = hi.max(v);
        acc += w * v;
    }
    // rounding may push the sum a hair outside the members' range
    acc.clamp(lo, hi)
}

fn blend(weights: &[f64], probs: &[&[f64]], rows: impl Iterator<Item = usize>) -> Vec<f64> {
    rows.map(|i| blend_row(weights, probs, i)).collect()
}

fn f1_of(
    weights: &[f64],
    probs: &[&[f64]],
    y: &[bool],
    rows: &[usize],
    averaging: Averaging,
) -> f64 {
    let pred: Vec<bool> = blend(weights, probs, rows.iter().copied())
        .into_iter()
        .map(|p| p >= 0.5)
        .collect();
    let truth: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
    f1_score(&truth, &pred, averaging).expect("aligned, non-empty")
}

/// Coordinate ascent over the grid simplex, scoring only `rows`. Starts at
/// the best single model, then moves one grid unit between pairs of models
/// (sweeping pairs in member order) while F1 strictly improves.
fn search(
    probs: &[&[f64]],
    y: &[bool],
    rows: &[usize],
    grid_step: f64,
    averaging: Averaging,
) -> Result<Vec<f64>, PipelineError> {
    let m = probs.len();
    let steps = unit_grid(grid_step)
        .map_err(|e| PipelineError::BadConfig(e.to_string()))?
        .len()
        - 1;
    let to_weights = |u: &[usize]| {
        u.iter()
            .map(|&v| v as f64 / steps as f64)
            .collect::<Vec<f64>>()
    };
    let mut units = vec![0usize; m];
    let mut best = f64::NEG_INFINITY;
    for i in 0..m {
        let mut u = vec![0; m];
        u[i] = steps;
        let f = f1_of(&to_weights(&u), probs, y, rows, averaging);
        if f > best {
            best = f;
            units = u;
        }
    }
    loop {
        let mut improved = false;
        for from in 0..m {
            for to in 0..m {
                if from == to || units[from] == 0 {
                    continue;
                }
                let mut u = units.clone();
                u[from] -= 1;
                u[to] += 1;
                let f = f1_of(&to_weights(&u), probs, y, rows, averaging);
                if f > best {
                    best = f;
                    units = u;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(to_weights(&units))
}

fn check_members(oof: &[&OofPredictions], n: usize) -> Result<(), PipelineError> {
    if oof.is_empty() {
        return Err(PipelineError::NoModels);
    }
    if let Some(bad) = oof.iter().find(|o| o.probs.len() != n) {
        return Err(PipelineError::LengthMismatch(format!(
            "{} has {} predictions for {n} labels",
            bad.producer,
            bad.probs.len()
        )));
    }
    Ok(())
}

/// Weights maximizing the F1 of the 0.5-thresholded blend of OOF
/// probabilities.
pub fn fit_ensemble_weights(
    oof: &[&OofPredictions],
    y: &[bool],
    grid_step: f64,
    averaging: Averaging,
) -> Result<EnsembleWeights, PipelineError> {
    check_members(oof, y.len())?;
    if y.is_empty() {
        return Err(PipelineError::LengthMismatch("no labels".into()));
    }
    let probs: Vec<&[f64]> = oof.iter().map(|o| o.probs.as_slice()).collect();
    let rows: Vec<usize> = (0..y.len()).collect();
    let w = search(&probs, y, &rows, grid_step, averaging)?;
    Ok(EnsembleWeights {
        weights: oof.iter().map(|o| o.producer.clone()).zip(w).collect(),
    })
}

/// Per-record convex combination of the named prediction vectors.
pub fn ensemble_predict(
    weights: &EnsembleWeights,
    preds: &[(&str, &[f64])],
) -> Result<Vec<f64>, PipelineError> {
    if weights.weights.is_empty() {
        return Err(PipelineError::NoModels);
    }
    let mut ws = Vec::with_capacity(weights.weights.len());
    let mut ps = Vec::with_capacity(weights.weights.len());
    for (name, w) in &weights.weights {
        let p = preds
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| PipelineError::ModelMismatch(format!("no predictions for {name}")))?;
        ws.push(*w);
        ps.push(p.1);
    }
    if let Some((extra, _)) = preds.iter().find(|(n, _)| weights.get(n).is_none()) {
        return Err(PipelineError::ModelMismatch(format!(
            "no weight for {extra}"
        )));
    }
    let n = ps[0].len();
    if ps.iter().any(|p| p.len() != n) {
        return Err(PipelineError::LengthMismatch(
            "prediction vectors differ in length".into(),
        ));
    }
    Ok(blend(&ws, &ps, 0..n))
}

/// Leakage-free ensemble OOF: the weights used for fold `j` are fit on
/// the members' fold-`j` vectors restricted to rows outside fold `j`.
/// Returns the ensemble predictions (with fold-wise vectors) and the
/// per-fold weights.
pub fn ensemble_foldwise(
    oof: &[&OofPredictions],
    y: &[bool],
    grid_step: f64,
    averaging: Averaging,
    producer: &str,
) -> Result<(OofPredictions, Vec<EnsembleWeights>), PipelineError> {
    check_members(oof, y.len())?;
    let folds = &oof[0].folds;
    if oof.iter().any(|o| &o.folds != folds) {
        return Err(PipelineError::ModelMismatch(
            "members use different folds".into(),
        ));
    }
    let mut fw_members = Vec::with_capacity(oof.len());
    for o in oof {
        fw_members.push(
            o.foldwise
                .as_ref()
                .ok_or_else(|| PipelineError::MissingFoldwise(o.producer.clone()))?,
        );
    }
    let n = y.len();
    let mut probs = vec![0.0; n];
    let mut foldwise = Vec::with_capacity(folds.k());
    let mut per_fold = Vec::with_capacity(folds.k());
    for j in 0..folds.k() {
        let member: Vec<&[f64]> = fw_members.iter().map(|fw| fw[j].as_slice()).collect();
        let rows = folds.rows_outside(j);
        if rows.is_empty() {
            return Err(PipelineError::FoldTooSmall(j));
        }
        let w = search(&member, y, &rows, grid_step, averaging)?;
        let full = blend(&w, &member, 0..n);
        for r in folds.rows_in(j) {
            probs[r] = full[r];
        }
        foldwise.push(full);
        per_fold.push(EnsembleWeights {
            weights: oof.iter().map(|o| o.producer.clone()).zip(w).collect(),
        });
    }
    let out = OofPredictions {
        producer: producer.to_owned(),
        probs,
        folds: folds.clone(),
        foldwise: Some(foldwise),
    };
    Ok((out, per_fold))
}
