use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    compute_metrics, regression_metrics, Classifier, ClassifierModel, Metrics, MlError,
    RegressionMetrics, Regressor, RegressorModel, Result,
};
use crate::features::FeatureTable;
use crate::recording::Diagnosis;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvScheme {
    KFold(usize),
    Loocv,
}

/// Test-set indices for each fold, each sorted ascending.
///
/// LOOCV yields `[0], [1], …` in order. k-fold shuffles with `seed`; when
/// `labels` are given and every class has at least `k` members, each
/// class is dealt round-robin across folds so class ratios are preserved.
pub fn fold_indices(n: usize, labels: Option<&[Diagnosis]>, scheme: CvScheme, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(MlError::Empty);
    }
    let k = match scheme {
        CvScheme::Loocv => return Ok((0..n).map(|i| vec![i]).collect()),
        CvScheme::KFold(k) => k,
    };
    if k < 2 || k > n {
        return Err(MlError::BadParam(format!("{k} folds for {n} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deal = Vec::with_capacity(n);
    let stratified = labels.and_then(|y| {
        let groups: Vec<Vec<usize>> = super::class_order(y)
            .into_iter()
            .map(|c| (0..n).filter(|&i| y[i] == c).collect())
            .collect();
        if groups.iter().all(|g| g.len() >= k) {
            Some(groups)
        } else {
            log::warn!("a class has fewer than {k} samples; using unstratified folds");
            None
        }
    });
    match stratified {
        Some(groups) => {
            for mut g in groups {
                g.shuffle(&mut rng);
                deal.extend(g);
            }
        }
        None => {
            deal.extend(0..n);
            deal.shuffle(&mut rng);
        }
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in deal.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| test.binary_search(i).is_err()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    /// Out-of-fold prediction for every row.
    pub predictions: Vec<Diagnosis>,
    pub metrics: Metrics,
}

/// Out-of-fold predictions pooled over all folds. Folds run in parallel;
/// the result does not depend on scheduling.
pub fn cross_validate<T: Real, C: Classifier<T>>(
    table: &FeatureTable<T>,
    clf: &C,
    scheme: CvScheme,
    seed: u64,
) -> Result<CvResult> {
    let y = table.labels().ok_or(MlError::MissingTargets("labels"))?;
    let n = table.n_rows();
    let folds = fold_indices(n, Some(y), scheme, seed)?;
    let x = table.rows();
    let per_fold: Vec<Vec<(usize, Diagnosis)>> = folds
        .par_iter()
        .map(|test| {
            let train = complement(n, test);
            let ytr: Vec<Diagnosis> = train.iter().map(|&i| y[i]).collect();
            let model = clf.fit(x.select(Axis(0), &train).view(), &ytr)?;
            Ok(test.iter().map(|&i| (i, model.predict(x.row(i)))).collect())
        })
        .collect::<Result<_>>()?;
    let mut predictions = vec![Diagnosis::Td; n];
    for (i, p) in per_fold.into_iter().flatten() {
        predictions[i] = p;
    }
    let metrics = compute_metrics(&predictions, y)?;
    Ok(CvResult { predictions, metrics })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionCvResult {
    pub predictions: Vec<f64>,
    pub metrics: RegressionMetrics,
}

/// Cross-validated regression on the table's ADOS-2 scores.
pub fn cross_validate_regression<T: Real, R: Regressor<T>>(
    table: &FeatureTable<T>,
    reg: &R,
    scheme: CvScheme,
    seed: u64,
) -> Result<RegressionCvResult> {
    let scores = table.scores().ok_or(MlError::MissingTargets("scores"))?;
    let y: Vec<T> = scores.iter().map(|&s| T::from_usize_lossy(s as usize)).collect();
    let n = table.n_rows();
    let folds = fold_indices(n, None, scheme, seed)?;
    let x = table.rows();
    let per_fold: Vec<Vec<(usize, T)>> = folds
        .par_iter()
        .map(|test| {
            let train = complement(n, test);
            let ytr: Vec<T> = train.iter().map(|&i| y[i]).collect();
            let model = reg.fit(x.select(Axis(0), &train).view(), &ytr)?;
            Ok(test.iter().map(|&i| (i, model.predict(x.row(i)))).collect())
        })
        .collect::<Result<_>>()?;
    let mut predictions = vec![T::zero(); n];
    for (i, p) in per_fold.into_iter().flatten() {
        predictions[i] = p;
    }
    let metrics = regression_metrics(&predictions, &y)?;
    Ok(RegressionCvResult { predictions: predictions.iter().map(|p| p.as_f64()).collect(), metrics })
}
