//! Sliding-window band power matrices.
//!
//! For each band the electrode signal is band-passed once; window `j` then
//! covers samples `[E·fs·j, E·fs·j + W·fs)` and its power is
//! `(1/W)·Σ|x|²`, with `W` in seconds. Only complete windows are kept, so
//! the column count is `⌊(n − fs·W)/(fs·E)⌋ + 1`.

use std::fmt::Write as _;

use ndarray::Array2;
use thiserror::Error;

use crate::features::FeatureTable;
use crate::filters::{BandSpec, FilterBank, FilterError, DEFAULT_ORDER};
use crate::recording::{ElectrodeSet, Recording};
use crate::scalar::Real;

/// Default window length in seconds.
pub const DEFAULT_WINDOW_S: f64 = 5.0;
/// Default step in seconds.
pub const DEFAULT_STEP_S: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
pub enum BandPowerError {
    #[error("window [{start}, {end}) overruns a series of {len} samples")]
    WindowOverrun { start: usize, end: usize, len: usize },
    #[error("series of {len} samples is shorter than one {window}-sample window")]
    TooShort { len: usize, window: usize },
    #[error("window and step must be positive and at least one sample long")]
    BadWindow,
    #[error("power matrices disagree: {0}")]
    Mismatch(String),
    #[error("no power matrix for electrode {0:?}")]
    UnknownElectrode(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

pub type Result<T, E = BandPowerError> = std::result::Result<T, E>;

fn samples(seconds: f64, fs: f64) -> Result<usize> {
    let n = (seconds * fs).round();
    if !(seconds > 0.0 && n >= 1.0) {
        return Err(BandPowerError::BadWindow);
    }
    Ok(n as usize)
}

/// Number of complete windows in a series of `n` samples.
pub fn window_count(n: usize, window_s: f64, step_s: f64, fs: f64) -> Result<usize> {
    let w = samples(window_s, fs)?;
    let e = samples(step_s, fs)?;
    Ok(if n < w { 0 } else { (n - w) / e + 1 })
}

/// Power of window `j`: `(1/W)·Σ_{k<fs·W} |x[E·fs·j + k]|²`.
pub fn window_power<T: Real>(x: &[T], window_s: f64, step_s: f64, j: usize, fs: f64) -> Result<T> {
    let w = samples(window_s, fs)?;
    let e = samples(step_s, fs)?;
    let start = e * j;
    let end = start + w;
    if end > x.len() {
        return Err(BandPowerError::WindowOverrun {
            start,
            end,
            len: x.len(),
        });
    }
    let sum: T = x[start..end].iter().map(|&v| v * v).sum();
    Ok(sum / T::lit(window_s))
}

/// Bands × windows power matrix of one electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix<T> {
    pub electrode: String,
    pub bands: Vec<BandSpec>,
    pub values: Array2<T>,
    pub window_s: f64,
    pub step_s: f64,
    pub fs: f64,
    /// Length of the series the matrix was computed from.
    pub n_samples: usize,
}

impl<T: Real> PowerMatrix<T> {
    pub fn n_bands(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_windows(&self) -> usize {
        self.values.ncols()
    }

    /// Column count from the nominal `n/(fs·E)` formula, which admits
    /// windows running past the end of the series.
    pub fn nominal_windows(&self) -> usize {
        (self.n_samples as f64 / (self.fs * self.step_s)).floor() as usize
    }

    pub fn window_starts_s(&self) -> Vec<f64> {
        (0..self.n_windows())
            .map(|j| j as f64 * self.step_s)
            .collect()
    }

    pub fn with_electrode(mut self, name: impl Into<String>) -> Self {
        self.electrode = name.into();
        self
    }

    /// CSV with a `band` column and one column per window start time (s).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("band");
        for t in self.window_starts_s() {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
        for (b, row) in self.bands.iter().zip(self.values.rows()) {
            out.push_str(&b.name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Power matrix of `x` for `bands` using order-5 band-pass filters.
pub fn power_matrix<T: Real>(
    bands: &[BandSpec],
    x: &[T],
    window_s: f64,
    step_s: f64,
    fs: f64,
) -> Result<PowerMatrix<T>> {
    let bank = FilterBank::new(bands, fs, DEFAULT_ORDER)?;
    power_matrix_with(&bank, x, window_s, step_s, fs)
}

/// As [`power_matrix`] with a pre-designed filter bank.
pub fn power_matrix_with<T: Real>(
    bank: &FilterBank,
    x: &[T],
    window_s: f64,
    step_s: f64,
    fs: f64,
) -> Result<PowerMatrix<T>> {
    let w = samples(window_s, fs)?;
    if x.len() < w {
        return Err(BandPowerError::TooShort {
            len: x.len(),
            window: w,
        });
    }
    let cols = window_count(x.len(), window_s, step_s, fs)?;
    let decomposed = bank.decompose(x)?;
    let mut values = Array2::zeros((decomposed.len(), cols));
    for (i, series) in decomposed.iter().enumerate() {
        for j in 0..cols {
            values[[i, j]] = window_power(series, window_s, step_s, j, fs)?;
        }
    }
    Ok(PowerMatrix {
        electrode: String::new(),
        bands: bank.bands().to_vec(),
        values,
        window_s,
        step_s,
        fs,
        n_samples: x.len(),
    })
}

/// One power matrix per channel of `rec`, in channel order.
pub fn recording_power_matrices<T: Real>(
    rec: &Recording<T>,
    bank: &FilterBank,
    window_s: f64,
    step_s: f64,
) -> Result<Vec<PowerMatrix<T>>> {
    rec.labels()
        .iter()
        .zip(rec.data().rows())
        .map(|(label, row)| {
            power_matrix_with(bank, &row.to_vec(), window_s, step_s, rec.fs())
                .map(|m| m.with_electrode(label.clone()))
        })
        .collect()
}

/// Short-term samples: row `j` concatenates, for each electrode in `set`,
/// that electrode's band powers in window `j`. Columns are `<electrode>_<band>`.
pub fn short_term_samples<T: Real>(
    mats: &[PowerMatrix<T>],
    set: &ElectrodeSet,
    subject_id: &str,
) -> Result<FeatureTable<T>> {
    let selected = set
        .names()
        .iter()
        .map(|n| {
            mats.iter()
                .find(|m| &m.electrode == n)
                .ok_or_else(|| BandPowerError::UnknownElectrode(n.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let first = selected[0];
    for m in &selected[1..] {
        if m.n_windows() != first.n_windows() {
            return Err(BandPowerError::Mismatch(format!(
                "{} has {} windows, {} has {}",
                first.electrode,
                first.n_windows(),
                m.electrode,
                m.n_windows()
            )));
        }
        if m.bands != first.bands || m.window_s != first.window_s || m.step_s != first.step_s {
            return Err(BandPowerError::Mismatch(format!(
                "{} and {} use different bands or windowing",
                first.electrode, m.electrode
            )));
        }
    }
    let names: Vec<String> = selected
        .iter()
        .flat_map(|m| m.bands.iter().map(move |b| format!("{}_{}", m.electrode, b.name)))
        .collect();
    let rows = first.n_windows();
    let mut data = Array2::zeros((rows, names.len()));
    for j in 0..rows {
        let mut c = 0;
        for m in &selected {
            for i in 0..m.n_bands() {
                data[[j, c]] = m.values[[i, j]];
                c += 1;
            }
        }
    }
    Ok(FeatureTable::new(names, data, vec![subject_id.to_string(); rows])
        .expect("shape built consistently"))
}
