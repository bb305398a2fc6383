//! Continuous wavelet transform with a complex Morlet wavelet.
//!
//! The mother wavelet is
//! `ψ(t) = (π·f_b)^{-1/2} · exp(2πi·f_c·t) · exp(−t²/f_b)`, and the
//! coefficient at scale `a` (in samples) and shift `b` is
//! `X(a, b) = a^{-1/2} Σ_n ψ((n − b)/a) · x[n]`. Scale `a` corresponds to
//! `f_c·fs/a` Hz. Scalograms hold `|X|²`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Number of scales in the standard grid.
pub const DEFAULT_SCALES: usize = 150;

/// `ln(1e8)`: the kernel is truncated where the Gaussian envelope drops below 1e-8.
const ENVELOPE_CUTOFF: f64 = 18.420_680_743_952_367;

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error("series is empty")]
    EmptySeries,
    #[error("invalid wavelet parameters: {0}")]
    InvalidParams(String),
    #[error("scales must be positive and strictly increasing")]
    InvalidScales,
    #[error("scale {scale} needs a {support}-sample wavelet, more than twice the {len}-sample series")]
    ScaleTooLarge {
        scale: f64,
        support: usize,
        len: usize,
    },
    #[error("target column count must be in 1..={max}, got {got}")]
    BadTarget { got: usize, max: usize },
    #[error("scalogram and baseline use different scale grids")]
    ScaleMismatch,
    #[error("baseline scalogram is already referenced")]
    ReferencedBaseline,
    #[error("scalogram contains non-finite values")]
    NonFinite,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = WaveletError> = std::result::Result<T, E>;

/// Complex Morlet parameters: centre frequency and bandwidth, both in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorletParams {
    pub f_c: f64,
    pub f_b: f64,
}

impl Default for MorletParams {
    fn default() -> Self {
        Self { f_c: 1.0, f_b: 1.5 }
    }
}

impl MorletParams {
    pub fn new(f_c: f64, f_b: f64) -> Result<Self> {
        if !(f_c > 0.0 && f_b > 0.0 && f_c.is_finite() && f_b.is_finite()) {
            return Err(WaveletError::InvalidParams(format!(
                "f_c={f_c}, f_b={f_b}; both must be positive"
            )));
        }
        Ok(Self { f_c, f_b })
    }

    /// Kernel half-width in samples at scale `a`.
    pub fn half_width(&self, scale: f64) -> usize {
        (scale * (self.f_b * ENVELOPE_CUTOFF).sqrt()).ceil() as usize
    }

    /// Distance, in samples, over which the envelope falls by `1/e` at scale `a`.
    pub fn e_folding(&self, scale: f64) -> usize {
        (scale * self.f_b.sqrt()).ceil() as usize
    }
}

/// Scales `2, 4, …, 2·count`, spanning `fs/2` down to `fs/(2·count)` for `f_c = 1`.
pub fn scale_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|k| 2.0 * k as f64).collect()
}

/// Frequency in Hz matched by scale `s`: `f_c·fs/s`.
pub fn scale_to_freq(scale: f64, fs: f64, params: &MorletParams) -> f64 {
    params.f_c * fs / scale
}

/// Scales × time power matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram<T> {
    pub electrode: String,
    pub scales: Vec<f64>,
    /// Column timestamps in seconds.
    pub times: Vec<f64>,
    pub values: Array2<T>,
    pub referenced: bool,
    pub fs: f64,
    pub params: MorletParams,
    /// Per scale, the number of columns at each edge inside the cone of
    /// influence (within one e-folding width of the boundary).
    pub coi: Vec<usize>,
}

impl<T: Real> Scalogram<T> {
    pub fn freqs(&self) -> Vec<f64> {
        self.scales
            .iter()
            .map(|&s| scale_to_freq(s, self.fs, &self.params))
            .collect()
    }

    pub fn with_electrode(mut self, name: impl Into<String>) -> Self {
        self.electrode = name.into();
        self
    }

    /// Index of the row with the largest mean power.
    pub fn peak_row(&self) -> usize {
        let means: Vec<T> = self
            .values
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().sum::<T>())
            .collect();
        let mut best = 0;
        for (i, &m) in means.iter().enumerate() {
            if m > means[best] {
                best = i;
            }
        }
        best
    }

    /// CSV: `scale,freq_hz,<time columns…>`, one row per scale.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scale,freq_hz");
        for t in &self.times {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
        let freqs = self.freqs();
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let _ = write!(out, "{},{}", self.scales[i], freqs[i]);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn morlet_kernel<T: Real>(scale: f64, half: usize, params: &MorletParams) -> Vec<Complex<T>> {
    // Reversed so that linear convolution yields the correlation sum.
    let norm = 1.0 / ((std::f64::consts::PI * params.f_b).sqrt() * scale.sqrt());
    (0..=2 * half)
        .map(|j| {
            let m = half as f64 - j as f64;
            let t = m / scale;
            let env = norm * (-t * t / params.f_b).exp();
            let ph = 2.0 * std::f64::consts::PI * params.f_c * t;
            Complex::new(T::lit(env * ph.cos()), T::lit(env * ph.sin()))
        })
        .collect()
}

/// Smallest 2·3·5-smooth length at least `n`; such sizes keep the FFT fast.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// CWT power `|X(a, b)|²` for every scale, via FFT convolution with zero padding.
pub fn cwt<T: Real>(x: &[T], fs: f64, scales: &[f64], params: &MorletParams) -> Result<Scalogram<T>> {
    let n = x.len();
    if n == 0 {
        return Err(WaveletError::EmptySeries);
    }
    if scales.is_empty()
        || scales[0] <= 0.0
        || scales.windows(2).any(|w| w[1] <= w[0])
        || scales.iter().any(|s| !s.is_finite())
    {
        return Err(WaveletError::InvalidScales);
    }
    for &s in scales {
        let support = 2 * params.half_width(s) + 1;
        if support > 2 * n {
            return Err(WaveletError::ScaleTooLarge {
                scale: s,
                support,
                len: n,
            });
        }
    }
    let h_max = params.half_width(*scales.last().unwrap());
    let len = fast_len(n + 2 * h_max);
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut xf: Vec<Complex<T>> = x
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())).take(len - n))
        .collect();
    fwd.process(&mut xf);

    let scale_len = T::from_usize_lossy(len);
    let mut values = Array2::zeros((scales.len(), n));
    let mut buf = vec![Complex::new(T::zero(), T::zero()); len];
    for (row, &s) in scales.iter().enumerate() {
        let half = params.half_width(s);
        let kernel = morlet_kernel::<T>(s, half, params);
        buf.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
        buf[..kernel.len()].copy_from_slice(&kernel);
        fwd.process(&mut buf);
        for (b, &xv) in buf.iter_mut().zip(&xf) {
            *b = *b * xv;
        }
        inv.process(&mut buf);
        for col in 0..n {
            let c = buf[col + half] / scale_len;
            values[[row, col]] = c.norm_sqr();
        }
    }
    Ok(Scalogram {
        electrode: String::new(),
        scales: scales.to_vec(),
        times: (0..n).map(|i| i as f64 / fs).collect(),
        values,
        referenced: false,
        fs,
        params: *params,
        coi: scales.iter().map(|&s| params.e_folding(s).min(n)).collect(),
    })
}

/// Column-group boundaries: `target` contiguous groups whose sizes differ by at most one.
fn group_bounds(n: usize, target: usize) -> Vec<(usize, usize)> {
    (0..target)
        .map(|j| (j * n / target, (j + 1) * n / target))
        .collect()
}

/// Max-pools columns down to `target_cols`.
pub fn downsample_max<T: Real>(sg: &Scalogram<T>, target_cols: usize) -> Result<Scalogram<T>> {
    let n = sg.values.ncols();
    if target_cols == 0 || target_cols > n {
        return Err(WaveletError::BadTarget {
            got: target_cols,
            max: n,
        });
    }
    let groups = group_bounds(n, target_cols);
    let mut values = Array2::zeros((sg.values.nrows(), target_cols));
    for (i, row) in sg.values.rows().into_iter().enumerate() {
        for (j, &(a, b)) in groups.iter().enumerate() {
            values[[i, j]] = row
                .slice(ndarray::s![a..b])
                .iter()
                .copied()
                .fold(T::neg_infinity(), T::max);
        }
    }
    let ratio = n as f64 / target_cols as f64;
    Ok(Scalogram {
        electrode: sg.electrode.clone(),
        scales: sg.scales.clone(),
        times: groups.iter().map(|&(a, _)| sg.times[a]).collect(),
        values,
        referenced: sg.referenced,
        fs: sg.fs,
        params: sg.params,
        coi: sg
            .coi
            .iter()
            .map(|&c| ((c as f64 / ratio).ceil() as usize).min(target_cols))
            .collect(),
    })
}

/// Subtracts the per-scale time-mean of `baseline` from every column of `sg`.
pub fn baseline_reference<T: Real>(sg: &Scalogram<T>, baseline: &Scalogram<T>) -> Result<Scalogram<T>> {
    if sg.scales != baseline.scales {
        return Err(WaveletError::ScaleMismatch);
    }
    if baseline.referenced {
        return Err(WaveletError::ReferencedBaseline);
    }
    let mut out = sg.clone();
    for (mut row, base) in out.values.rows_mut().into_iter().zip(baseline.values.rows()) {
        let m = crate::scalar::mean(&base.to_vec());
        row.mapv_inplace(|v| v - m);
    }
    out.referenced = true;
    Ok(out)
}

/// 8-bit grayscale pixels: min → 0, max → 255, rounded; constant input → all 0.
pub fn to_gray<T: Real>(sg: &Scalogram<T>) -> Result<Array2<u8>> {
    if sg.values.iter().any(|v| !v.is_finite()) {
        return Err(WaveletError::NonFinite);
    }
    let lo = sg.values.iter().copied().fold(T::infinity(), T::min);
    let hi = sg.values.iter().copied().fold(T::neg_infinity(), T::max);
    let span = (hi - lo).as_f64();
    Ok(sg.values.mapv(|v| {
        if span > 0.0 {
            ((v - lo).as_f64() / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }))
}

/// Binary PGM (`P5`, maxval 255) bytes; row 0 is the first scale.
pub fn to_pgm<T: Real>(sg: &Scalogram<T>) -> Result<Vec<u8>> {
    let px = to_gray(sg)?;
    let (h, w) = px.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(px.iter());
    Ok(out)
}

pub fn export_image<T: Real>(sg: &Scalogram<T>, path: &Path) -> Result<()> {
    let bytes = to_pgm(sg)?;
    fs::write(path, bytes).map_err(|source| WaveletError::Io {
        path: path.to_path_buf(),
        source,
    })
}
