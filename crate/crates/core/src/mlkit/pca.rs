use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::symmetric_eigen;
use super::{MlError, Result};
use crate::scalar::Real;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Components {
    Count(usize),
    /// Smallest count whose cumulative explained variance reaches the fraction.
    VarianceFraction(f64),
}

impl Default for Components {
    fn default() -> Self {
        Self::VarianceFraction(0.95)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct PcaModel<T> {
    /// `k × d`, orthonormal rows.
    pub components: Array2<T>,
    pub means: Vec<T>,
    pub explained_variance: Vec<T>,
    pub total_variance: T,
}

/// Principal components of the column-centred sample covariance.
pub fn pca_fit<T: Real>(x: ArrayView2<'_, T>, k: Components) -> Result<PcaModel<T>> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(MlError::BadParam(format!("PCA needs at least 2 rows, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite);
    }
    let max_k = (n - 1).min(d);
    let means: Vec<T> = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let centred = Array2::from_shape_fn((n, d), |(i, j)| x[[i, j]] - means[j]);
    let denom = T::from_usize_lossy(n - 1);
    let cov = centred.t().dot(&centred).mapv(|v| v / denom);
    let (vals, vecs) = symmetric_eigen(&cov);
    let vals: Vec<T> = vals.into_iter().map(|v| v.max(T::zero())).collect();
    let total: T = vals.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(MlError::ZeroVariance);
    }
    let k = match k {
        Components::Count(k) => {
            if k == 0 || k > max_k {
                return Err(MlError::BadParam(format!("k = {k} outside 1..={max_k}")));
            }
            k
        }
        Components::VarianceFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(MlError::BadParam(format!("variance fraction {f}")));
            }
            let mut acc = T::zero();
            let mut k = max_k;
            for (i, &v) in vals.iter().enumerate().take(max_k) {
                acc = acc + v;
                if (acc / total).as_f64() >= f - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };
    let mut components = Array2::<T>::zeros((k, d));
    for c in 0..k {
        let col = vecs.column(c);
        let pivot = col
            .iter()
            .copied()
            .fold(T::zero(), |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < T::zero() { -T::one() } else { T::one() };
        for j in 0..d {
            components[[c, j]] = sign * col[j];
        }
    }
    Ok(PcaModel {
        components,
        means,
        explained_variance: vals[..k].to_vec(),
        total_variance: total,
    })
}

impl<T: Real> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn explained_variance_ratio(&self) -> Vec<T> {
        self.explained_variance.iter().map(|&v| v / self.total_variance).collect()
    }

    /// `(rows − means)·componentsᵀ`.
    pub fn transform(&self, rows: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if rows.ncols() != self.means.len() {
            return Err(MlError::Shape(format!(
                "{} columns, model expects {}",
                rows.ncols(),
                self.means.len()
            )));
        }
        let centred = Array2::from_shape_fn(rows.dim(), |(i, j)| rows[[i, j]] - self.means[j]);
        Ok(centred.dot(&self.components.t()))
    }

    pub fn inverse_transform(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if z.ncols() != self.n_components() {
            return Err(MlError::Shape(format!(
                "{} columns, model has {} components",
                z.ncols(),
                self.n_components()
            )));
        }
        let mut out = z.dot(&self.components);
        for mut row in out.rows_mut() {
            for (v, &m) in row.iter_mut().zip(&self.means) {
                *v = *v + m;
            }
        }
        Ok(out)
    }
}
