//! Feature selection, classifiers, regression, cross-validation and metrics.
//!
//! Fitters are plain configuration values implementing [`Classifier`] or
//! [`Regressor`]; fitting returns an immutable model that can be shared
//! across threads and exported as JSON.

mod cv;
mod gnb;
mod knn;
pub mod linalg;
mod linreg;
mod logistic;
mod metrics;
mod pca;
mod sfs;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recording::Diagnosis;
use crate::scalar::Real;

pub use cv::{
    cross_validate, cross_validate_regression, fold_indices, CvResult, CvScheme,
    RegressionCvResult,
};
pub use gnb::{GaussianNb, GnbModel};
pub use knn::{Knn, KnnModel};
pub use linreg::{LinearRegression, LinregModel};
pub use logistic::{loss_and_gradient, LogisticModel, LogisticRegression};
pub use metrics::{compute_metrics, regression_metrics, Confusion, Metrics, RegressionMetrics};
pub use pca::{pca_fit, Components, PcaModel};
pub use sfs::sfs_select;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("empty input")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("target is constant; r² is undefined")]
    ConstantTarget,
    #[error("parameter out of range: {0}")]
    BadParam(String),
    #[error("data has zero variance")]
    ZeroVariance,
    #[error("feature table has no {0}")]
    MissingTargets(&'static str),
    #[error("non-finite feature value")]
    NonFinite,
    #[error("linear system is singular")]
    Singular,
    #[error("model serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = MlError> = std::result::Result<T, E>;

/// A classifier configuration that can be fitted to labelled rows.
pub trait Classifier<T: Real>: Sync {
    type Model: ClassifierModel<T>;

    fn fit(&self, x: ArrayView2<'_, T>, y: &[Diagnosis]) -> Result<Self::Model>;
}

pub trait ClassifierModel<T: Real>: Send + Sync {
    fn predict(&self, row: ArrayView1<'_, T>) -> Diagnosis;

    fn predict_all(&self, x: ArrayView2<'_, T>) -> Vec<Diagnosis> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }
}

/// A regressor configuration that can be fitted to rows and targets.
pub trait Regressor<T: Real>: Sync {
    type Model: RegressorModel<T>;

    fn fit(&self, x: ArrayView2<'_, T>, y: &[T]) -> Result<Self::Model>;
}

pub trait RegressorModel<T: Real>: Send + Sync {
    fn predict(&self, row: ArrayView1<'_, T>) -> T;

    fn predict_all(&self, x: ArrayView2<'_, T>) -> Vec<T> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }
}

/// Any of the supported classifiers, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierKind {
    Gnb,
    Logistic(LogisticRegression),
    Knn(Knn),
}

impl ClassifierKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gnb => "gnb",
            Self::Logistic(_) => "logistic",
            Self::Knn(_) => "knn",
        }
    }

    /// Parses `gnb`, `logistic` or `knn` with default hyperparameters.
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gnb" => Some(Self::Gnb),
            "logistic" => Some(Self::Logistic(LogisticRegression::default())),
            "knn" => Some(Self::Knn(Knn::default())),
            _ => None,
        }
    }
}

/// A fitted model of any supported classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(deserialize = "T: Real"))]
pub enum AnyModel<T> {
    Gnb(GnbModel<T>),
    Logistic(LogisticModel<T>),
    Knn(KnnModel<T>),
}

impl<T: Real> Classifier<T> for ClassifierKind {
    type Model = AnyModel<T>;

    fn fit(&self, x: ArrayView2<'_, T>, y: &[Diagnosis]) -> Result<AnyModel<T>> {
        Ok(match self {
            Self::Gnb => AnyModel::Gnb(GaussianNb.fit(x, y)?),
            Self::Logistic(c) => AnyModel::Logistic(c.fit(x, y)?),
            Self::Knn(c) => AnyModel::Knn(c.fit(x, y)?),
        })
    }
}

impl<T: Real> ClassifierModel<T> for AnyModel<T> {
    fn predict(&self, row: ArrayView1<'_, T>) -> Diagnosis {
        match self {
            Self::Gnb(m) => m.predict(row),
            Self::Logistic(m) => m.predict(row),
            Self::Knn(m) => m.predict(row),
        }
    }
}

impl<T: Real> AnyModel<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn n_features(&self) -> usize {
        match self {
            Self::Gnb(m) => m.n_features(),
            Self::Logistic(m) => m.weights.len(),
            Self::Knn(m) => m.n_features(),
        }
    }
}

pub(crate) fn check_xy<T: Real>(x: ArrayView2<'_, T>, n_targets: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(MlError::Empty);
    }
    if x.nrows() != n_targets {
        return Err(MlError::Shape(format!("{} rows for {} targets", x.nrows(), n_targets)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite);
    }
    Ok(())
}

/// Distinct classes in order of first appearance.
pub(crate) fn class_order(y: &[Diagnosis]) -> Vec<Diagnosis> {
    let mut out = Vec::new();
    for &c in y {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}
