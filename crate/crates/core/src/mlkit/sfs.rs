use super::{cross_validate, class_order, Classifier, CvScheme, MlError, Result};
use crate::features::FeatureTable;
use crate::scalar::Real;

/// Greedy sequential forward selection by cross-validated accuracy.
///
/// Each step adds the feature giving the highest accuracy (lowest index on
/// ties). Stops at `max_features` or when no candidate improves on the
/// current subset.
pub fn sfs_select<T: Real, C: Classifier<T>>(
    table: &FeatureTable<T>,
    clf: &C,
    max_features: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let d = table.n_features();
    if max_features > d {
        return Err(MlError::BadParam(format!("max_features {max_features} > {d} features")));
    }
    if folds < 2 {
        return Err(MlError::BadParam(format!("{folds} folds")));
    }
    let labels = table.labels().ok_or(MlError::MissingTargets("labels"))?;
    if class_order(labels).len() < 2 {
        return Err(MlError::SingleClass);
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut current = f64::NEG_INFINITY;
    while selected.len() < max_features {
        let mut best: Option<(usize, f64)> = None;
        for f in (0..d).filter(|f| !selected.contains(f)) {
            let mut cols = selected.clone();
            cols.push(f);
            let acc = cross_validate(&table.select_columns(&cols), clf, CvScheme::KFold(folds), seed)?
                .metrics
                .accuracy;
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((f, acc));
            }
        }
        match best {
            Some((f, acc)) if acc > current => {
                selected.push(f);
                current = acc;
            }
            _ => break,
        }
    }
    Ok(selected)
}
