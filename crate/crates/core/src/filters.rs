//! Butterworth IIR design, zero-phase application and band decomposition.
//!
//! Filters are designed from the analog Butterworth prototype
//! `|H(jω)| = 1/√(1 + ε²(ω/ω_p)^{2n})` with ε = 1, mapped to the requested
//! kind in the analog domain and discretized with a pre-warped bilinear
//! transform. Coefficients are kept as cascaded second-order sections; the
//! expanded transfer-function polynomials are available on request.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::scalar::Real;

/// Order used for drift removal, the line-noise notch and band decomposition.
pub const DEFAULT_ORDER: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("cutoff {cutoff} Hz must lie strictly between 0 and Nyquist ({nyquist} Hz)")]
    CutoffOutOfRange { cutoff: f64, nyquist: f64 },
    #[error("band edges must satisfy lo < hi, got {lo}..{hi} Hz")]
    NonMonotoneCutoffs { lo: f64, hi: f64 },
    #[error("{kind:?} filter takes {expected} cutoff(s), got {got}")]
    CutoffCount {
        kind: FilterKind,
        expected: usize,
        got: usize,
    },
    #[error("filter order must be at least 1")]
    ZeroOrder,
    #[error("sampling rate must be positive, got {0}")]
    BadSampleRate(f64),
    #[error("series of {len} samples is too short for this filter (need more than {min})")]
    SeriesTooShort { len: usize, min: usize },
    #[error("unstable filter: pole magnitude {0}")]
    Unstable(f64),
    #[error("band list is empty")]
    EmptyBands,
    #[error("invalid band {name}: {lo}..{hi} Hz")]
    InvalidBand { name: String, lo: f64, hi: f64 },
}

pub type Result<T, E = FilterError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
    Bandstop,
}

impl FilterKind {
    fn n_cutoffs(self) -> usize {
        match self {
            FilterKind::Lowpass | FilterKind::Highpass => 1,
            FilterKind::Bandpass | FilterKind::Bandstop => 2,
        }
    }
}

/// One biquad: `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    /// Steady-state DF-II-transposed state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let z2 = self.b[2] - self.a[1] * gain;
        let z1 = gain - self.b[0];
        [z1, z2]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// A designed Butterworth filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub kind: FilterKind,
    pub order: usize,
    pub cutoffs: Vec<f64>,
    pub fs: f64,
    sections: Vec<Section>,
    poles: Vec<(f64, f64)>,
}

impl FilterCoefficients {
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    /// Digital poles as `(re, im)` pairs.
    pub fn poles(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.poles.iter().map(|&(re, im)| Complex64::new(re, im))
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Expanded numerator `b` (length `2·sections + 1`).
    pub fn numerator(&self) -> Vec<f64> {
        self.sections
            .iter()
            .fold(vec![1.0], |acc, s| poly_mul(&acc, &s.b))
    }

    /// Expanded denominator `a`, with `a[0] == 1`.
    pub fn denominator(&self) -> Vec<f64> {
        self.sections
            .iter()
            .fold(vec![1.0], |acc, s| poly_mul(&acc, &[1.0, s.a[0], s.a[1]]))
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.fs;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Samples at each edge that are dominated by start-up transients,
    /// `3·n·fs/f_lo` with `f_lo` the lowest cutoff.
    pub fn transient_samples(&self) -> usize {
        let lo = self.cutoffs.iter().copied().fold(f64::INFINITY, f64::min);
        (3.0 * self.order as f64 * self.fs / lo).ceil() as usize
    }

    /// Edge padding used by [`apply_zero_phase`].
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    // Trailing zeros from first-order sections.
    while out.len() > 1 && *out.last().unwrap() == 0.0 {
        out.pop();
    }
    out
}

/// Butterworth design for `kind` with `order` prototype poles.
///
/// Band filters have `2·order` poles. Every section is normalised to unit
/// gain at the passband reference point (DC, Nyquist or band centre).
pub fn design_butterworth(
    kind: FilterKind,
    cutoffs: &[f64],
    order: usize,
    fs: f64,
) -> Result<FilterCoefficients> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(FilterError::BadSampleRate(fs));
    }
    if order == 0 {
        return Err(FilterError::ZeroOrder);
    }
    if cutoffs.len() != kind.n_cutoffs() {
        return Err(FilterError::CutoffCount {
            kind,
            expected: kind.n_cutoffs(),
            got: cutoffs.len(),
        });
    }
    let nyquist = fs / 2.0;
    for &c in cutoffs {
        if !(c > 0.0 && c < nyquist) {
            return Err(FilterError::CutoffOutOfRange { cutoff: c, nyquist });
        }
    }
    if cutoffs.len() == 2 && cutoffs[0] >= cutoffs[1] {
        return Err(FilterError::NonMonotoneCutoffs {
            lo: cutoffs[0],
            hi: cutoffs[1],
        });
    }

    let k = 2.0 * fs;
    let warp = |f: f64| k * (PI * f / fs).tan();
    let bilinear = |s: Complex64| (k + s) / (k - s);

    // Upper-half-plane prototype poles plus the real pole for odd orders.
    let mut proto_pairs = Vec::new();
    let mut proto_real = false;
    for i in 0..order / 2 {
        let theta = PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
        proto_pairs.push(Complex64::from_polar(1.0, theta));
    }
    if order % 2 == 1 {
        proto_real = true;
    }

    // (pole pair or single real pole in z, zero pair polynomial, reference z⁻¹)
    let mut sections = Vec::new();
    let mut poles = Vec::new();
    let ref_z_inv;

    match kind {
        FilterKind::Lowpass | FilterKind::Highpass => {
            let wc = warp(cutoffs[0]);
            let map = |p: Complex64| match kind {
                FilterKind::Lowpass => p * wc,
                _ => wc / p,
            };
            let zero = if kind == FilterKind::Lowpass { -1.0 } else { 1.0 };
            ref_z_inv = Complex64::new(-zero, 0.0);
            for &p in &proto_pairs {
                let z = bilinear(map(p));
                sections.push(conj_pair_section(z, [1.0, -2.0 * zero, 1.0]));
                poles.extend([z, z.conj()]);
            }
            if proto_real {
                let z = bilinear(map(Complex64::new(-1.0, 0.0))).re;
                sections.push(Section {
                    b: [1.0, -zero, 0.0],
                    a: [-z, 0.0],
                });
                poles.push(Complex64::new(z, 0.0));
            }
        }
        FilterKind::Bandpass | FilterKind::Bandstop => {
            let w1 = warp(cutoffs[0]);
            let w2 = warp(cutoffs[1]);
            let bw = w2 - w1;
            let w0 = (w1 * w2).sqrt();
            let wd0 = 2.0 * (w0 / k).atan();
            let zero_poly = if kind == FilterKind::Bandpass {
                [1.0, 0.0, -1.0]
            } else {
                [1.0, -2.0 * wd0.cos(), 1.0]
            };
            ref_z_inv = if kind == FilterKind::Bandpass {
                Complex64::from_polar(1.0, -wd0)
            } else {
                Complex64::new(1.0, 0.0)
            };
            let split = |p: Complex64| -> [Complex64; 2] {
                let h = match kind {
                    FilterKind::Bandpass => p * (bw / 2.0),
                    _ => (bw / 2.0) / p,
                };
                let d = (h * h - w0 * w0).sqrt();
                [h + d, h - d]
            };
            let mut band_poles: Vec<Complex64> = Vec::new();
            for &p in &proto_pairs {
                for s in split(p) {
                    band_poles.push(bilinear(s));
                }
            }
            // Each complex prototype pole yields two poles in the upper (or
            // lower) half plane; their conjugates come from the conjugate
            // prototype pole, so every band pole forms a pair with its conjugate.
            for z in band_poles {
                let z = if z.im < 0.0 { z.conj() } else { z };
                sections.push(conj_pair_section(z, zero_poly));
                poles.extend([z, z.conj()]);
            }
            if proto_real {
                let [s1, s2] = split(Complex64::new(-1.0, 0.0));
                let (z1, z2) = (bilinear(s1), bilinear(s2));
                if z1.im.abs() > 1e-14 * z1.norm() {
                    let z = if z1.im < 0.0 { z1.conj() } else { z1 };
                    sections.push(conj_pair_section(z, zero_poly));
                    poles.extend([z, z.conj()]);
                } else {
                    sections.push(Section {
                        b: zero_poly,
                        a: [-(z1.re + z2.re), z1.re * z2.re],
                    });
                    poles.extend([Complex64::new(z1.re, 0.0), Complex64::new(z2.re, 0.0)]);
                }
            }
        }
    }

    for s in &mut sections {
        let g = s.response(ref_z_inv).norm();
        for b in &mut s.b {
            *b /= g;
        }
    }

    let coeffs = FilterCoefficients {
        kind,
        order,
        cutoffs: cutoffs.to_vec(),
        fs,
        sections,
        poles: poles.iter().map(|p| (p.re, p.im)).collect(),
    };
    let r = coeffs.max_pole_radius();
    if !(r < 1.0) {
        return Err(FilterError::Unstable(r));
    }
    Ok(coeffs)
}

fn conj_pair_section(z: Complex64, b: [f64; 3]) -> Section {
    Section {
        b,
        a: [-2.0 * z.re, z.norm_sqr()],
    }
}

/// Single forward pass through the cascade, starting from rest.
pub fn filter_forward<T: Real>(coeffs: &FilterCoefficients, x: &[T]) -> Vec<T> {
    let mut y = x.to_vec();
    for s in &coeffs.sections {
        run_section(s, &mut y, [T::zero(), T::zero()]);
    }
    y
}

fn run_section<T: Real>(s: &Section, buf: &mut [T], init: [T; 2]) {
    let b0 = T::lit(s.b[0]);
    let b1 = T::lit(s.b[1]);
    let b2 = T::lit(s.b[2]);
    let a1 = T::lit(s.a[0]);
    let a2 = T::lit(s.a[1]);
    let [mut z1, mut z2] = init;
    for v in buf.iter_mut() {
        let x = *v;
        let y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        *v = y;
    }
}

/// Cascade pass with each section initialised to its steady state for a
/// constant input equal to `buf[0]`.
fn run_cascade_steady<T: Real>(coeffs: &FilterCoefficients, buf: &mut [T]) {
    let mut level = buf[0].as_f64();
    for s in &coeffs.sections {
        let [z1, z2] = s.step_state();
        run_section(s, buf, [T::lit(z1 * level), T::lit(z2 * level)]);
        level *= s.dc_gain();
    }
}

/// Forward-backward filtering with odd-symmetric edge extension.
///
/// The effective magnitude response is `|H|²` and the phase is zero.
pub fn apply_zero_phase<T: Real>(coeffs: &FilterCoefficients, x: &[T]) -> Result<Vec<T>> {
    let r = coeffs.max_pole_radius();
    if !(r < 1.0) {
        return Err(FilterError::Unstable(r));
    }
    let pad = coeffs.pad_len();
    let n = x.len();
    if n <= pad {
        return Err(FilterError::SeriesTooShort { len: n, min: pad });
    }
    let two = T::lit(2.0);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| two * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| two * x[n - 1] - x[n - 1 - i]));

    run_cascade_steady(coeffs, &mut ext);
    ext.reverse();
    run_cascade_steady(coeffs, &mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// 1 Hz order-5 zero-phase high-pass.
pub fn remove_drift<T: Real>(x: &[T], fs: f64) -> Result<Vec<T>> {
    if !(fs > 2.0) {
        return Err(FilterError::BadSampleRate(fs));
    }
    let hp = design_butterworth(FilterKind::Highpass, &[1.0], DEFAULT_ORDER, fs)?;
    apply_zero_phase(&hp, x)
}

/// Order-5 zero-phase band-stop over `line_hz ± 1 Hz`.
pub fn remove_line_noise<T: Real>(x: &[T], fs: f64, line_hz: f64) -> Result<Vec<T>> {
    let bs = design_butterworth(
        FilterKind::Bandstop,
        &[line_hz - 1.0, line_hz + 1.0],
        DEFAULT_ORDER,
        fs,
    )?;
    apply_zero_phase(&bs, x)
}

/// A named frequency band `[lo, hi]` in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
        }
    }

    /// δ, θ, α, β, γ: 0.1–4, 4–7.5, 7.5–12, 12–30, 30–100 Hz.
    pub fn standard_bands() -> Vec<BandSpec> {
        vec![
            BandSpec::new("delta", 0.1, 4.0),
            BandSpec::new("theta", 4.0, 7.5),
            BandSpec::new("alpha", 7.5, 12.0),
            BandSpec::new("beta", 12.0, 30.0),
            BandSpec::new("gamma", 30.0, 100.0),
        ]
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }

    /// Validates against `fs`, clipping an upper edge at or above Nyquist to
    /// `0.99·fs/2`.
    pub fn fitted_to(&self, fs: f64) -> Result<BandSpec> {
        let nyq = fs / 2.0;
        let invalid = || FilterError::InvalidBand {
            name: self.name.clone(),
            lo: self.lo,
            hi: self.hi,
        };
        if !(self.lo > 0.0 && self.lo < self.hi) || self.lo >= nyq {
            return Err(invalid());
        }
        let mut out = self.clone();
        if out.hi >= nyq {
            out.hi = 0.99 * nyq;
            log::warn!(
                "band {} upper edge {} Hz clipped to {} Hz at fs={fs}",
                self.name,
                self.hi,
                out.hi
            );
            if out.lo >= out.hi {
                return Err(invalid());
            }
        }
        Ok(out)
    }
}

/// Band-pass filters for a band table at one sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    bands: Vec<BandSpec>,
    filters: Vec<FilterCoefficients>,
}

impl FilterBank {
    pub fn new(bands: &[BandSpec], fs: f64, order: usize) -> Result<Self> {
        if bands.is_empty() {
            return Err(FilterError::EmptyBands);
        }
        let bands = bands
            .iter()
            .map(|b| b.fitted_to(fs))
            .collect::<Result<Vec<_>>>()?;
        let filters = bands
            .iter()
            .map(|b| design_butterworth(FilterKind::Bandpass, &[b.lo, b.hi], order, fs))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bands, filters })
    }

    /// Bands as applied (after any Nyquist clipping).
    pub fn bands(&self) -> &[BandSpec] {
        &self.bands
    }

    pub fn filters(&self) -> &[FilterCoefficients] {
        &self.filters
    }

    pub fn decompose<T: Real>(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        self.filters.iter().map(|f| apply_zero_phase(f, x)).collect()
    }
}

/// Splits `x` into one zero-phase band-passed series per band.
pub fn band_decompose<T: Real>(x: &[T], fs: f64, bands: &[BandSpec]) -> Result<Vec<Vec<T>>> {
    FilterBank::new(bands, fs, DEFAULT_ORDER)?.decompose(x)
}
