use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{check_xy, Classifier, ClassifierModel, MlError, Result};
use crate::recording::Diagnosis;
use crate::scalar::Real;

/// L2-regularized logistic regression fitted by gradient descent.
/// ASD is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticRegression {
    pub l2: f64,
    pub lr: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        Self { l2: 1e-3, lr: 0.1, max_iter: 5000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct LogisticModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub iterations: usize,
    pub converged: bool,
    /// Loss after each accepted step, starting from the initial point.
    #[serde(skip)]
    pub loss_history: Vec<T>,
}

fn target(d: Diagnosis) -> f64 {
    match d {
        Diagnosis::Asd => 1.0,
        Diagnosis::Td => 0.0,
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Real>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Mean cross-entropy plus `(l2/2)·‖w‖²` and its gradient `(∂w, ∂b)`.
pub fn loss_and_gradient<T: Real>(
    x: ArrayView2<'_, T>,
    y: &[Diagnosis],
    w: &[T],
    b: T,
    l2: T,
) -> (T, Vec<T>, T) {
    let n = T::from_usize_lossy(x.nrows());
    let mut loss = T::zero();
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = T::zero();
    for (row, &label) in x.rows().into_iter().zip(y) {
        let t = T::lit(target(label));
        let z = row.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() + b;
        loss = loss + softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, &a) in gw.iter_mut().zip(row.iter()) {
            *g = *g + r * a;
        }
        gb = gb + r;
    }
    let half = T::lit(0.5);
    let reg = w.iter().map(|&v| v * v).sum::<T>();
    let loss = loss / n + half * l2 * reg;
    for (g, &v) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * v;
    }
    (loss, gw, gb / n)
}

impl<T: Real> Classifier<T> for LogisticRegression {
    type Model = LogisticModel<T>;

    fn fit(&self, x: ArrayView2<'_, T>, y: &[Diagnosis]) -> Result<LogisticModel<T>> {
        check_xy(x, y.len())?;
        if !(self.lr > 0.0 && self.l2 >= 0.0 && self.tol > 0.0) {
            return Err(MlError::BadParam(format!("{self:?}")));
        }
        let l2 = T::lit(self.l2);
        let tol = T::lit(self.tol);
        let mut w = vec![T::zero(); x.ncols()];
        let mut b = T::zero();
        let (mut loss, mut gw, mut gb) = loss_and_gradient(x, y, &w, b, l2);
        let mut history = vec![loss];
        let mut lr = T::lit(self.lr);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.max_iter {
            let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
            if gmax < tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut accepted = false;
            for _ in 0..60 {
                let w_new: Vec<T> = w.iter().zip(&gw).map(|(&v, &g)| v - lr * g).collect();
                let b_new = b - lr * gb;
                let (l_new, gw_new, gb_new) = loss_and_gradient(x, y, &w_new, b_new, l2);
                if l_new <= loss {
                    w = w_new;
                    b = b_new;
                    loss = l_new;
                    gw = gw_new;
                    gb = gb_new;
                    accepted = true;
                    break;
                }
                lr = lr * T::lit(0.5);
            }
            if !accepted {
                break;
            }
            history.push(loss);
        }
        Ok(LogisticModel { weights: w, bias: b, iterations, converged, loss_history: history })
    }
}

impl<T: Real> LogisticModel<T> {
    /// Probability of the positive (ASD) class.
    pub fn probability(&self, row: ArrayView1<'_, T>) -> T {
        let z = row.iter().zip(&self.weights).map(|(&a, &w)| a * w).sum::<T>() + self.bias;
        sigmoid(z)
    }
}

impl<T: Real> ClassifierModel<T> for LogisticModel<T> {
    fn predict(&self, row: ArrayView1<'_, T>) -> Diagnosis {
        if self.probability(row) >= T::lit(0.5) {
            Diagnosis::Asd
        } else {
            Diagnosis::Td
        }
    }
}
