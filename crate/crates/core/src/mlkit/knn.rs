use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_xy, class_order, Classifier, ClassifierModel, MlError, Result};
use crate::recording::Diagnosis;
use crate::scalar::Real;

/// k-nearest-neighbour majority vote under Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Knn {
    pub k: usize,
}

impl Default for Knn {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct KnnModel<T> {
    pub k: usize,
    pub x: Array2<T>,
    pub y: Vec<Diagnosis>,
}

impl<T: Real> Classifier<T> for Knn {
    type Model = KnnModel<T>;

    fn fit(&self, x: ArrayView2<'_, T>, y: &[Diagnosis]) -> Result<KnnModel<T>> {
        check_xy(x, y.len())?;
        if self.k == 0 || self.k > x.nrows() {
            return Err(MlError::BadParam(format!("k = {} with {} samples", self.k, x.nrows())));
        }
        Ok(KnnModel { k: self.k, x: x.to_owned(), y: y.to_vec() })
    }
}

impl<T: Real> KnnModel<T> {
    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
}

impl<T: Real> ClassifierModel<T> for KnnModel<T> {
    fn predict(&self, row: ArrayView1<'_, T>) -> Diagnosis {
        let mut dist: Vec<(T, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let d2: T = r.iter().zip(row.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        // Stable sort keeps training order among equal distances.
        dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let nearest = &dist[..self.k];
        let order = class_order(&self.y);
        let tally: Vec<(usize, T)> = order
            .iter()
            .map(|&c| {
                let ds: Vec<T> = nearest.iter().filter(|(_, i)| self.y[*i] == c).map(|(d, _)| *d).collect();
                let mean = if ds.is_empty() {
                    T::infinity()
                } else {
                    ds.iter().copied().sum::<T>() / T::from_usize_lossy(ds.len())
                };
                (ds.len(), mean)
            })
            .collect();
        let mut best = 0;
        for (c, &(votes, mean)) in tally.iter().enumerate().skip(1) {
            let (bv, bm) = tally[best];
            if votes > bv || (votes == bv && mean < bm) {
                best = c;
            }
        }
        order[best]
    }
}
