use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_len, EvalError};

/// How per-class F1 values are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// F1 of the abusive class.
    #[default]
    Positive,
    Macro,
    /// Per-class F1 weighted by true class support.
    Weighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub false_positive_rate: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn class_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

impl MetricReport {
    pub fn compute(y_true: &[bool], y_pred: &[bool]) -> Result<Self, EvalError> {
        check_len(y_true.len(), y_pred.len(), "labels vs predictions")?;
        if y_true.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let f1 = class_f1(tp, fp, fn_);
        let f1_neg = class_f1(tn, fn_, fp);
        let n = y_true.len() as f64;
        Ok(MetricReport {
            tp,
            fp,
            fn_,
            tn,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1,
            macro_f1: (f1 + f1_neg) / 2.0,
            weighted_f1: (f1 * (tp + fn_) as f64 + f1_neg * (tn + fp) as f64) / n,
            false_positive_rate: ratio(fp, fp + tn),
        })
    }

    pub fn f1_for(&self, averaging: Averaging) -> f64 {
        match averaging {
            Averaging::Positive => self.f1,
            Averaging::Macro => self.macro_f1,
            Averaging::Weighted => self.weighted_f1,
        }
    }
}

/// One `name=value` pair per line.
impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tp={}", self.tp)?;
        writeln!(f, "fp={}", self.fp)?;
        writeln!(f, "fn={}", self.fn_)?;
        writeln!(f, "tn={}", self.tn)?;
        writeln!(f, "precision={:.6}", self.precision)?;
        writeln!(f, "recall={:.6}", self.recall)?;
        writeln!(f, "f1={:.6}", self.f1)?;
        writeln!(f, "macro_f1={:.6}", self.macro_f1)?;
        writeln!(f, "weighted_f1={:.6}", self.weighted_f1)?;
        writeln!(f, "false_positive_rate={:.6}", self.false_positive_rate)
    }
}

/// F1 under the given averaging. A class that is neither predicted nor
/// present scores 0.
pub fn f1_score(y_true: &[bool], y_pred: &[bool], averaging: Averaging) -> Result<f64, EvalError> {
    Ok(MetricReport::compute(y_true, y_pred)?.f1_for(averaging))
}
