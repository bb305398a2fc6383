use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::linalg::cholesky_solve;
use super::{check_xy, MlError, Regressor, RegressorModel, Result};
use crate::scalar::Real;

/// Least squares through the normal equations. A small ridge on the
/// coefficients (never the intercept) keeps the system well conditioned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearRegression {
    /// Ridge used when rows exceed columns, relative to the mean diagonal.
    pub ridge: f64,
    /// Absolute ridge used when rows do not exceed columns.
    pub fallback_ridge: f64,
}

impl Default for LinearRegression {
    fn default() -> Self {
        Self { ridge: 1e-14, fallback_ridge: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct LinregModel<T> {
    pub coefficients: Vec<T>,
    pub intercept: T,
}

impl<T: Real> Regressor<T> for LinearRegression {
    type Model = LinregModel<T>;

    fn fit(&self, x: ArrayView2<'_, T>, y: &[T]) -> Result<LinregModel<T>> {
        check_xy(x, y.len())?;
        if y.iter().all(|&v| v == y[0]) {
            return Err(MlError::ConstantTarget);
        }
        let (n, d) = x.dim();
        let mut a = Array2::<T>::zeros((d + 1, d + 1));
        let mut rhs = Array1::<T>::zeros(d + 1);
        for (row, &t) in x.rows().into_iter().zip(y) {
            let aug = |j: usize| if j < d { row[j] } else { T::one() };
            for i in 0..=d {
                rhs[i] = rhs[i] + aug(i) * t;
                for j in 0..=d {
                    a[[i, j]] = a[[i, j]] + aug(i) * aug(j);
                }
            }
        }
        let ridge = if n > d {
            let mean_diag = (0..d).map(|i| a[[i, i]]).sum::<T>() / T::from_usize_lossy(d.max(1));
            T::lit(self.ridge) * mean_diag
        } else {
            T::lit(self.fallback_ridge)
        };
        for i in 0..d {
            a[[i, i]] = a[[i, i]] + ridge;
        }
        let sol = cholesky_solve(&a, &rhs).ok_or(MlError::Singular)?;
        Ok(LinregModel { coefficients: sol.iter().take(d).copied().collect(), intercept: sol[d] })
    }
}

impl<T: Real> RegressorModel<T> for LinregModel<T> {
    fn predict(&self, row: ArrayView1<'_, T>) -> T {
        row.iter().zip(&self.coefficients).map(|(&a, &w)| a * w).sum::<T>() + self.intercept
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn exact_line() {
        let x = arr2(&[[0.0], [1.0], [2.0], [3.0], [4.0]]);
        let y: Vec<f64> = x.column(0).iter().map(|v| 2.0 * v + 1.0).collect();
        let m = LinearRegression::default().fit(x.view(), &y).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn underdetermined_uses_fallback() {
        let x = arr2(&[[1.0f64, 2.0], [2.0, 1.0]]);
        let m = LinearRegression::default().fit(x.view(), &[1.0, 2.0]).unwrap();
        let p = m.predict_all(x.view());
        assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn constant_target() {
        let x = arr2(&[[1.0], [2.0], [3.0]]);
        assert!(matches!(
            LinearRegression::default().fit(x.view(), &[4.0, 4.0, 4.0]),
            Err(MlError::ConstantTarget)
        ));
    }
}
