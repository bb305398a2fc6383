use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_xy, class_order, Classifier, ClassifierModel, MlError, Result};
use crate::recording::Diagnosis;
use crate::scalar::Real;

/// Gaussian naive Bayes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct GnbModel<T> {
    /// Classes in training order.
    pub classes: Vec<Diagnosis>,
    pub log_priors: Vec<T>,
    /// Per class, per feature.
    pub means: Vec<Vec<T>>,
    pub vars: Vec<Vec<T>>,
}

impl<T: Real> Classifier<T> for GaussianNb {
    type Model = GnbModel<T>;

    fn fit(&self, x: ArrayView2<'_, T>, y: &[Diagnosis]) -> Result<GnbModel<T>> {
        check_xy(x, y.len())?;
        let classes = class_order(y);
        if classes.len() < 2 {
            return Err(MlError::SingleClass);
        }
        let n = x.nrows();
        let d = x.ncols();
        let nf = T::from_usize_lossy(n);
        let floors: Vec<T> = (0..d)
            .map(|j| {
                let col = x.column(j);
                let mu = col.sum() / nf;
                let var = col.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / nf;
                T::lit(1e-9) * (var + T::lit(1e-12))
            })
            .collect();
        let mut log_priors = Vec::new();
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for &c in &classes {
            let idx: Vec<usize> = (0..n).filter(|&i| y[i] == c).collect();
            let m = T::from_usize_lossy(idx.len());
            log_priors.push((m / nf).ln());
            let mu: Vec<T> = (0..d).map(|j| idx.iter().map(|&i| x[[i, j]]).sum::<T>() / m).collect();
            let var: Vec<T> = (0..d)
                .map(|j| {
                    let v = idx.iter().map(|&i| (x[[i, j]] - mu[j]) * (x[[i, j]] - mu[j])).sum::<T>() / m;
                    v.max(floors[j])
                })
                .collect();
            means.push(mu);
            vars.push(var);
        }
        Ok(GnbModel { classes, log_priors, means, vars })
    }
}

impl<T: Real> GnbModel<T> {
    pub fn n_features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Joint log-likelihood `ln p(c) + Σ ln N(x_j; μ_cj, σ²_cj)` per class.
    pub fn joint_log_likelihood(&self, row: ArrayView1<'_, T>) -> Vec<T> {
        let two_pi = T::lit(2.0) * T::PI();
        let half = T::lit(0.5);
        self.classes
            .iter()
            .enumerate()
            .map(|(c, _)| {
                let ll: T = row
                    .iter()
                    .zip(self.means[c].iter().zip(&self.vars[c]))
                    .map(|(&x, (&mu, &var))| -half * ((two_pi * var).ln() + (x - mu) * (x - mu) / var))
                    .sum();
                self.log_priors[c] + ll
            })
            .collect()
    }

    /// Posterior probability per class, in training order.
    pub fn posterior(&self, row: ArrayView1<'_, T>) -> Vec<(Diagnosis, T)> {
        let jll = self.joint_log_likelihood(row);
        let top = jll.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = jll.iter().map(|&l| (l - top).exp()).collect();
        let z: T = exps.iter().copied().sum();
        self.classes.iter().copied().zip(exps.into_iter().map(|e| e / z)).collect()
    }
}

impl<T: Real> ClassifierModel<T> for GnbModel<T> {
    fn predict(&self, row: ArrayView1<'_, T>) -> Diagnosis {
        let jll = self.joint_log_likelihood(row);
        let mut best = 0;
        for (c, &l) in jll.iter().enumerate() {
            if l > jll[best] {
                best = c;
            }
        }
        self.classes[best]
    }
}
