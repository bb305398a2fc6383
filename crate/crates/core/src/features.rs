//! Per-channel statistics, amplitude entropy, FFT band features and the
//! feature table they are assembled into.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::BandSpec;
use crate::recording::{Diagnosis, Recording};
use crate::scalar::Real;
use crate::spectrum;

/// Histogram resolution used for entropy features unless overridden.
pub const DEFAULT_ENTROPY_BINS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("band {name} ({lo}..{hi} Hz) extends beyond Nyquist ({nyquist} Hz)")]
    BandBeyondNyquist {
        name: String,
        lo: f64,
        hi: f64,
        nyquist: f64,
    },
    #[error("subject {subject:?} has no {source_name:?} features")]
    MissingSource {
        subject: String,
        source_name: String,
    },
    #[error("subject {subject:?}: {source_name:?} features do not match the first subject's layout")]
    DimensionMismatch {
        subject: String,
        source_name: String,
    },
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// Samples × named features, with optional class labels and ADOS-2 scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<T> {
    feature_names: Vec<String>,
    rows: Array2<T>,
    labels: Option<Vec<Diagnosis>>,
    scores: Option<Vec<u32>>,
    subject_ids: Vec<String>,
}

impl<T: Real> FeatureTable<T> {
    pub fn new(feature_names: Vec<String>, rows: Array2<T>, subject_ids: Vec<String>) -> Result<Self> {
        if feature_names.len() != rows.ncols() {
            return Err(FeatureError::Shape(format!(
                "{} names for {} columns",
                feature_names.len(),
                rows.ncols()
            )));
        }
        if subject_ids.len() != rows.nrows() {
            return Err(FeatureError::Shape(format!(
                "{} subject ids for {} rows",
                subject_ids.len(),
                rows.nrows()
            )));
        }
        Ok(Self {
            feature_names,
            rows,
            labels: None,
            scores: None,
            subject_ids,
        })
    }

    pub fn with_labels(mut self, labels: Vec<Diagnosis>) -> Result<Self> {
        if labels.len() != self.n_rows() {
            return Err(FeatureError::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n_rows()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_scores(mut self, scores: Vec<u32>) -> Result<Self> {
        if scores.len() != self.n_rows() {
            return Err(FeatureError::Shape(format!(
                "{} scores for {} rows",
                scores.len(),
                self.n_rows()
            )));
        }
        self.scores = Some(scores);
        Ok(self)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &Array2<T> {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[Diagnosis]> {
        self.labels.as_deref()
    }

    pub fn scores(&self) -> Option<&[u32]> {
        self.scores.as_deref()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            rows: self.rows.select(Axis(1), cols),
            labels: self.labels.clone(),
            scores: self.scores.clone(),
            subject_ids: self.subject_ids.clone(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            rows: self.rows.select(Axis(0), idx),
            labels: self.labels.as_ref().map(|v| idx.iter().map(|&i| v[i]).collect()),
            scores: self.scores.as_ref().map(|v| idx.iter().map(|&i| v[i]).collect()),
            subject_ids: idx.iter().map(|&i| self.subject_ids[i].clone()).collect(),
        }
    }

    /// Stacks tables with identical columns.
    pub fn vstack(tables: &[Self]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| FeatureError::Shape("no tables to stack".into()))?;
        if tables.iter().any(|t| t.feature_names != first.feature_names) {
            return Err(FeatureError::Shape("column names differ".into()));
        }
        let views: Vec<_> = tables.iter().map(|t| t.rows.view()).collect();
        let rows = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| FeatureError::Shape(e.to_string()))?;
        let labels = tables
            .iter()
            .map(|t| t.labels.clone())
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat());
        let scores = tables
            .iter()
            .map(|t| t.scores.clone())
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat());
        Ok(Self {
            feature_names: first.feature_names.clone(),
            rows,
            labels,
            scores,
            subject_ids: tables.iter().flat_map(|t| t.subject_ids.clone()).collect(),
        })
    }

    /// CSV with header `subject_id,label,ados2,<features…>`; absent labels
    /// or scores are written as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id,label,ados2");
        for n in &self.feature_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, row) in self.rows.rows().into_iter().enumerate() {
            out.push_str(&self.subject_ids[i]);
            out.push(',');
            if let Some(l) = &self.labels {
                out.push_str(l[i].as_str());
            }
            out.push(',');
            if let Some(s) = &self.scores {
                let _ = write!(out, "{}", s[i]);
            }
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| FeatureError::Csv {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < 3 || header[0] != "subject_id" || header[1] != "label" || header[2] != "ados2" {
            return Err(FeatureError::Csv {
                line: 1,
                message: "expected header subject_id,label,ados2,...".into(),
            });
        }
        let names = header[3..].to_vec();
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut scores = Vec::new();
        let mut values = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let line = r + 2;
            let rec = rec.map_err(|e| FeatureError::Csv {
                line,
                message: e.to_string(),
            })?;
            ids.push(rec[0].to_string());
            labels.push(if rec[1].is_empty() {
                None
            } else {
                Some(Diagnosis::parse(&rec[1]).ok_or_else(|| FeatureError::Csv {
                    line,
                    message: format!("bad label {:?}", &rec[1]),
                })?)
            });
            scores.push(if rec[2].is_empty() {
                None
            } else {
                Some(rec[2].parse::<u32>().map_err(|_| FeatureError::Csv {
                    line,
                    message: format!("bad ados2 score {:?}", &rec[2]),
                })?)
            });
            for cell in rec.iter().skip(3) {
                values.push(cell.parse::<T>().map_err(|_| FeatureError::Csv {
                    line,
                    message: format!("non-numeric cell {cell:?}"),
                })?);
            }
        }
        let rows = Array2::from_shape_vec((ids.len(), names.len()), values)
            .map_err(|e| FeatureError::Shape(e.to_string()))?;
        let mut t = Self::new(names, rows, ids)?;
        t.labels = labels.into_iter().collect();
        t.scores = scores.into_iter().collect();
        Ok(t)
    }
}

/// Per-column z-score parameters fitted on a training table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization<T> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

impl<T: Real> Normalization<T> {
    pub fn fit(rows: &Array2<T>) -> Self {
        let n = T::from_usize_lossy(rows.nrows().max(1));
        let mut means = Vec::with_capacity(rows.ncols());
        let mut stds = Vec::with_capacity(rows.ncols());
        for col in rows.columns() {
            let m = col.iter().copied().sum::<T>() / n;
            let v = col.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n;
            means.push(m);
            stds.push(v.sqrt());
        }
        Self { means, stds }
    }

    /// `(x − mean)/std`; constant columns are only centred.
    pub fn apply(&self, rows: &Array2<T>) -> Array2<T> {
        let mut out = rows.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let s = if self.stds[j] > T::zero() { self.stds[j] } else { T::one() };
            col.mapv_inplace(|x| (x - self.means[j]) / s);
        }
        out
    }
}

/// Arithmetic mean of each channel, in label order.
pub fn channel_means<T: Real>(rec: &Recording<T>) -> Vec<T> {
    rec.data()
        .mean_axis(Axis(1))
        .unwrap_or_else(|| Array1::zeros(rec.n_channels()))
        .to_vec()
}

/// Population standard deviation (divisor `n`) of each channel.
pub fn channel_stds<T: Real>(rec: &Recording<T>) -> Result<Vec<T>> {
    if rec.n_samples() < 2 {
        return Err(FeatureError::InvalidInput(
            "standard deviation needs at least two samples".into(),
        ));
    }
    Ok(rec.data().std_axis(Axis(1), T::zero()).to_vec())
}

/// Shannon entropy in bits of the amplitude histogram of `x`.
///
/// `bins` equal-width cells span `[min, max]`; the maximum falls in the last
/// cell. A constant series occupies one cell and has zero entropy.
pub fn shannon_entropy<T: Real>(x: &[T], bins: usize) -> Result<T> {
    if bins < 2 {
        return Err(FeatureError::InvalidInput("entropy needs at least 2 bins".into()));
    }
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::InvalidInput(
            "entropy needs a non-empty finite series".into(),
        ));
    }
    let (lo, hi) = x
        .iter()
        .fold((x[0], x[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi == lo {
        return Ok(T::zero());
    }
    let mut counts = vec![0usize; bins];
    let scale = T::from_usize_lossy(bins) / (hi - lo);
    for &v in x {
        let k = ((v - lo) * scale).floor().to_usize().unwrap_or(0).min(bins - 1);
        counts[k] += 1;
    }
    // Fixed summation order, so mirrored histograms give identical results.
    counts.sort_unstable();
    let n = T::from_usize_lossy(x.len());
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::from_usize_lossy(c) / n;
            -p * p.log2()
        })
        .sum())
}

/// Mean DFT magnitude over the bins with frequency in `[lo, hi)` of each band.
pub fn fft_band_features<T: Real>(x: &[T], fs: f64, bands: &[BandSpec]) -> Result<Vec<T>> {
    if (x.len() as f64) < fs {
        return Err(FeatureError::InvalidInput(format!(
            "need at least one second of signal, got {} samples at {fs} Hz",
            x.len()
        )));
    }
    let nyquist = fs / 2.0;
    let mags = spectrum::magnitude_spectrum(x);
    let freqs = spectrum::rfft_freqs(x.len(), fs);
    bands
        .iter()
        .map(|b| {
            if b.hi > nyquist || b.lo < 0.0 || b.lo >= b.hi {
                return Err(FeatureError::BandBeyondNyquist {
                    name: b.name.clone(),
                    lo: b.lo,
                    hi: b.hi,
                    nyquist,
                });
            }
            let sel: Vec<T> = freqs
                .iter()
                .zip(&mags)
                .filter(|(&f, _)| f >= b.lo && f < b.hi)
                .map(|(_, &m)| m)
                .collect();
            if sel.is_empty() {
                return Err(FeatureError::InvalidInput(format!(
                    "band {} contains no frequency bins",
                    b.name
                )));
            }
            Ok(crate::scalar::mean(&sel))
        })
        .collect()
}

/// Values with parallel names, e.g. one value per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedVector<T> {
    pub names: Vec<String>,
    pub values: Vec<T>,
}

impl<T> NamedVector<T> {
    pub fn new(names: Vec<String>, values: Vec<T>) -> Self {
        assert_eq!(names.len(), values.len(), "names and values must be parallel");
        Self { names, values }
    }
}

/// Everything extracted for one subject, keyed by source name
/// (e.g. `mean`, `std`, `entropy`).
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFeatures<T> {
    pub subject_id: String,
    pub label: Option<Diagnosis>,
    pub score: Option<u32>,
    pub sources: BTreeMap<String, NamedVector<T>>,
}

impl<T> SubjectFeatures<T> {
    pub fn new(subject_id: impl Into<String>) -> Self {
        Self {
            subject_id: subject_id.into(),
            label: None,
            score: None,
            sources: BTreeMap::new(),
        }
    }

    pub fn with_source(mut self, name: impl Into<String>, v: NamedVector<T>) -> Self {
        self.sources.insert(name.into(), v);
        self
    }
}

/// One row per subject; columns ordered by `source_order`, then by the
/// source's own name order, and named `<source>_<name>`.
///
/// With `normalize`, every column is z-scored and the fitted parameters are
/// returned for reuse on held-out data.
pub fn assemble<T: Real>(
    subjects: &[SubjectFeatures<T>],
    source_order: &[&str],
    normalize: bool,
) -> Result<(FeatureTable<T>, Option<Normalization<T>>)> {
    let first = subjects
        .first()
        .ok_or_else(|| FeatureError::InvalidInput("no subjects".into()))?;
    let mut names = Vec::new();
    for &src in source_order {
        let v = first.sources.get(src).ok_or_else(|| FeatureError::MissingSource {
            subject: first.subject_id.clone(),
            source_name: src.to_string(),
        })?;
        names.extend(v.names.iter().map(|n| format!("{src}_{n}")));
    }
    let mut data = Array2::zeros((subjects.len(), names.len()));
    for (i, s) in subjects.iter().enumerate() {
        let mut c = 0;
        for &src in source_order {
            let v = s.sources.get(src).ok_or_else(|| FeatureError::MissingSource {
                subject: s.subject_id.clone(),
                source_name: src.to_string(),
            })?;
            if v.names != first.sources[src].names {
                return Err(FeatureError::DimensionMismatch {
                    subject: s.subject_id.clone(),
                    source_name: src.to_string(),
                });
            }
            for &x in &v.values {
                data[[i, c]] = x;
                c += 1;
            }
        }
    }
    let norm = normalize.then(|| Normalization::fit(&data));
    if let Some(n) = &norm {
        data = n.apply(&data);
    }
    let mut table = FeatureTable::new(
        names,
        data,
        subjects.iter().map(|s| s.subject_id.clone()).collect(),
    )?;
    table.labels = subjects.iter().map(|s| s.label).collect();
    table.scores = subjects.iter().map(|s| s.score).collect();
    Ok((table, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Recording;
    use std::f64::consts::PI;

    fn rec(rows: Vec<Vec<f64>>) -> Recording<f64> {
        let n = rows[0].len();
        let c = rows.len();
        let data = Array2::from_shape_vec((c, n), rows.concat()).unwrap();
        Recording::new(data, 250.0, (0..c).map(|i| format!("C{i}")).collect(), vec![]).unwrap()
    }

    #[test]
    fn means_and_stds() {
        let r = rec(vec![vec![1.0; 8], vec![3.0; 8]]);
        assert_eq!(channel_means(&r), vec![1.0, 3.0]);
        assert_eq!(channel_stds(&r).unwrap(), vec![0.0, 0.0]);

        let alt = rec(vec![(0..10).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect()]);
        assert_eq!(channel_stds(&alt).unwrap(), vec![1.0]);

        let s: Vec<f64> = (0..1000).map(|i| (2.0 * PI * 10.0 * i as f64 / 250.0).sin()).collect();
        let sr = rec(vec![s]);
        assert!(channel_means(&sr)[0].abs() < 1e-9);
        assert!((channel_stds(&sr).unwrap()[0] - 0.5f64.sqrt()).abs() < 0.01 * 0.5f64.sqrt());
        assert!(channel_stds(&rec(vec![vec![1.0]])).is_err());
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(shannon_entropy(&[4.0f64; 50], 64).unwrap(), 0.0);
        let two: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -3.0 } else { 7.0 }).collect();
        assert!((shannon_entropy(&two, 64).unwrap() - 1.0).abs() < 1e-12);
        assert!(shannon_entropy(&two, 1).is_err());
        assert!(shannon_entropy(&[1.0, f64::NAN], 4).is_err());
        // Four equally populated cells.
        let four = [0.0f64, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0];
        assert!((shannon_entropy(&four, 4).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fft_features() {
        let bands = BandSpec::standard_bands();
        let x: Vec<f64> = (0..2500).map(|i| (2.0 * PI * 10.0 * i as f64 / 250.0).sin()).collect();
        let f = fft_band_features(&x, 250.0, &bands).unwrap();
        assert!(f.iter().enumerate().all(|(i, &v)| i == 2 || v < f[2]));
        assert_eq!(fft_band_features(&vec![0.0f64; 500], 250.0, &bands).unwrap(), vec![0.0; 5]);
        let high = [BandSpec::new("x", 100.0, 130.0)];
        assert!(matches!(
            fft_band_features(&x, 250.0, &high),
            Err(FeatureError::BandBeyondNyquist { .. })
        ));
        assert!(fft_band_features(&x[..100], 250.0, &bands).is_err());
    }

    fn subject(id: &str, a: f64) -> SubjectFeatures<f64> {
        let names = vec!["C0".to_string(), "C1".to_string()];
        SubjectFeatures::new(id)
            .with_source("mean", NamedVector::new(names.clone(), vec![a, 2.0 * a]))
            .with_source("std", NamedVector::new(names, vec![a * a, 1.0]))
    }

    #[test]
    fn assemble_order_and_normalization() {
        let subs = vec![subject("s1", 1.0), subject("s2", 2.0), subject("s3", 4.0)];
        let (t, norm) = assemble(&subs, &["std", "mean"], false).unwrap();
        assert!(norm.is_none());
        assert_eq!(t.feature_names(), &["std_C0", "std_C1", "mean_C0", "mean_C1"]);
        assert_eq!(t.rows().row(2).to_vec(), vec![16.0, 1.0, 4.0, 8.0]);
        assert!(t.labels().is_none());

        let (z, norm) = assemble(&subs, &["mean", "std"], true).unwrap();
        let norm = norm.unwrap();
        assert_eq!(norm.means.len(), 4);
        for (j, col) in z.rows().columns().into_iter().enumerate() {
            let m = col.mean().unwrap();
            assert!(m.abs() < 1e-9);
            if j != 3 {
                let sd = col.std(0.0);
                assert!((sd - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn assemble_errors() {
        let mut bad = subject("s2", 2.0);
        bad.sources.remove("std");
        let err = assemble(&[subject("s1", 1.0), bad], &["mean", "std"], false).unwrap_err();
        assert_eq!(
            err,
            FeatureError::MissingSource {
                subject: "s2".into(),
                source_name: "std".into()
            }
        );
        let mut odd = subject("s3", 2.0);
        odd.sources.insert(
            "mean".into(),
            NamedVector::new(vec!["C0".into()], vec![1.0]),
        );
        assert!(matches!(
            assemble(&[subject("s1", 1.0), odd], &["mean"], false),
            Err(FeatureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let mut s1 = subject("s1", 1.5);
        s1.label = Some(Diagnosis::Asd);
        s1.score = Some(12);
        let mut s2 = subject("s2", -0.25);
        s2.label = Some(Diagnosis::Td);
        s2.score = Some(0);
        let (t, _) = assemble(&[s1, s2], &["mean", "std"], false).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("subject_id,label,ados2,mean_C0"));
        assert_eq!(FeatureTable::<f64>::from_csv(&csv).unwrap(), t);
    }
}
