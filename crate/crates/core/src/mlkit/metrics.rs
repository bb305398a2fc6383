//! Binary classification and regression metrics. ASD is the positive class.

use serde::{Deserialize, Serialize};

use super::{MlError, Result};
use crate::recording::Diagnosis;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            accuracy: ratio(c.tp + c.tn, c.total()),
            confusion: c,
        }
    }
}

pub fn compute_metrics(preds: &[Diagnosis], labels: &[Diagnosis]) -> Result<Metrics> {
    if preds.len() != labels.len() {
        return Err(MlError::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(MlError::Empty);
    }
    let mut c = Confusion::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (Diagnosis::Asd, Diagnosis::Asd) => c.tp += 1,
            (Diagnosis::Asd, Diagnosis::Td) => c.fp += 1,
            (Diagnosis::Td, Diagnosis::Asd) => c.fn_ += 1,
            (Diagnosis::Td, Diagnosis::Td) => c.tn += 1,
        }
    }
    Ok(Metrics::from_confusion(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// r², MAE and RMSE of `preds` against `targets`. r² is undefined (error)
/// for a constant target.
pub fn regression_metrics<T: Real>(preds: &[T], targets: &[T]) -> Result<RegressionMetrics> {
    if preds.len() != targets.len() {
        return Err(MlError::Shape(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(MlError::Empty);
    }
    let n = preds.len() as f64;
    let mean = targets.iter().map(|t| t.as_f64()).sum::<f64>() / n;
    let ss_tot: f64 = targets.iter().map(|t| (t.as_f64() - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MlError::ConstantTarget);
    }
    let resid: Vec<f64> = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| p.as_f64() - t.as_f64())
        .collect();
    let ss_res: f64 = resid.iter().map(|r| r * r).sum();
    Ok(RegressionMetrics {
        r2: 1.0 - ss_res / ss_tot,
        mae: resid.iter().map(|r| r.abs()).sum::<f64>() / n,
        rmse: (ss_res / n).sqrt(),
    })
}
