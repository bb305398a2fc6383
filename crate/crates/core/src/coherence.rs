//! Welch spectra, magnitude-squared coherence and integrated connectivity.
//!
//! `C²(ω) = |φ_uv(ω)|² / (φ_uu(ω)·φ_vv(ω))`, estimated from Hann-windowed,
//! overlapped, mean-detrended segments. The scalar connectivity `P` is the
//! frequency average of `C²` over the bins actually sampled.

use std::fmt::Write as _;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::BandSpec;
use crate::recording::{Recording, HOMAN_LEFT, HOMAN_RIGHT};
use crate::scalar::Real;
use crate::spectrum;

#[derive(Debug, Error, PartialEq)]
pub enum CoherenceError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{segments} segment(s) available, at least 2 are required")]
    TooFewSegments { segments: usize },
    #[error("invalid Welch parameters: {0}")]
    BadParams(String),
    #[error("every frequency bin has zero power")]
    AllMasked,
    #[error("band {name} ({lo}..{hi} Hz) contains no usable frequency bins")]
    BandOutsideGrid { name: String, lo: f64, hi: f64 },
    #[error("recording has no electrode {0:?}")]
    MissingElectrode(String),
}

pub type Result<T, E = CoherenceError> = std::result::Result<T, E>;

/// Segment length and overlap for Welch averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment_s: f64,
    pub overlap: f64,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self {
            segment_s: 2.0,
            overlap: 0.5,
        }
    }
}

impl WelchParams {
    fn layout(&self, n: usize, fs: f64) -> Result<(usize, usize, usize)> {
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(CoherenceError::BadParams(format!(
                "overlap must be in [0, 1), got {}",
                self.overlap
            )));
        }
        let seg = (self.segment_s * fs).round() as usize;
        if seg < 2 {
            return Err(CoherenceError::BadParams(format!(
                "segment of {} s at {fs} Hz is shorter than two samples",
                self.segment_s
            )));
        }
        let step = seg - ((self.overlap * seg as f64).round() as usize).min(seg - 1);
        let k = if n < seg { 0 } else { (n - seg) / step + 1 };
        if k < 2 {
            return Err(CoherenceError::TooFewSegments { segments: k });
        }
        Ok((seg, step, k))
    }
}

/// Averaged auto- and cross-spectra of a pair of series.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate<T> {
    pub freqs: Vec<f64>,
    pub psd_u: Vec<T>,
    pub psd_v: Vec<T>,
    pub cross: Vec<Complex<T>>,
    pub segments: usize,
}

/// Windowed segment spectra of one series, reusable across pairs.
struct SegmentSpectra<T> {
    segments: Vec<Vec<Complex<T>>>,
    freqs: Vec<f64>,
    seg_len: usize,
    scale: T,
}

fn segment_spectra<T: Real>(x: &[T], fs: f64, params: &WelchParams) -> Result<SegmentSpectra<T>> {
    let (seg, step, k) = params.layout(x.len(), fs)?;
    let win: Vec<T> = spectrum::hann(seg);
    let wss: T = win.iter().map(|&w| w * w).sum();
    let fft = FftPlanner::<T>::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut segments = Vec::with_capacity(k);
    for s in 0..k {
        let chunk = &x[s * step..s * step + seg];
        let m = crate::scalar::mean(chunk);
        let mut buf: Vec<Complex<T>> = chunk
            .iter()
            .zip(&win)
            .map(|(&v, &w)| Complex::new((v - m) * w, T::zero()))
            .collect();
        fft.process(&mut buf);
        buf.truncate(bins);
        segments.push(buf);
    }
    Ok(SegmentSpectra {
        segments,
        freqs: spectrum::rfft_freqs(seg, fs),
        seg_len: seg,
        scale: T::one() / (T::lit(fs) * wss * T::from_usize_lossy(k)),
    })
}

fn average_cross<T: Real>(a: &SegmentSpectra<T>, b: &SegmentSpectra<T>) -> Vec<Complex<T>> {
    let bins = a.freqs.len();
    let last = bins - 1;
    let mut acc = vec![Complex::new(T::zero(), T::zero()); bins];
    for (sa, sb) in a.segments.iter().zip(&b.segments) {
        for (k, c) in acc.iter_mut().enumerate() {
            *c = *c + sa[k].conj() * sb[k];
        }
    }
    let two = T::lit(2.0);
    for (k, c) in acc.iter_mut().enumerate() {
        // One-sided density: interior bins carry both halves of the spectrum;
        // DC and (for even segments) Nyquist do not.
        let f = if k == 0 || (k == last && a.seg_len.is_multiple_of(2)) {
            a.scale
        } else {
            a.scale * two
        };
        *c = *c * f;
    }
    acc
}

fn estimate_from<T: Real>(a: &SegmentSpectra<T>, b: &SegmentSpectra<T>) -> SpectralEstimate<T> {
    let cross = average_cross(a, b);
    let psd_u = average_cross(a, a).iter().map(|c| c.re).collect();
    let psd_v = average_cross(b, b).iter().map(|c| c.re).collect();
    SpectralEstimate {
        freqs: a.freqs.clone(),
        psd_u,
        psd_v,
        cross,
        segments: a.segments.len(),
    }
}

/// Welch auto- and cross-spectral densities of `u` and `v`.
pub fn welch_spectra<T: Real>(u: &[T], v: &[T], fs: f64, params: &WelchParams) -> Result<SpectralEstimate<T>> {
    if u.len() != v.len() {
        return Err(CoherenceError::LengthMismatch(u.len(), v.len()));
    }
    let a = segment_spectra(u, fs, params)?;
    let b = segment_spectra(v, fs, params)?;
    Ok(estimate_from(&a, &b))
}

/// Coherence spectrum with its exclusion mask (`true` = zero-power bin, value NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct Msc<T> {
    pub freqs: Vec<f64>,
    pub values: Vec<T>,
    pub excluded: Vec<bool>,
}

fn clamp_tolerance<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(100.0))
}

/// Magnitude-squared coherence per bin, clamped to `[0, 1]`.
///
/// Bins where either auto-spectrum is zero (relative to its peak) are excluded.
///
/// # Panics
/// If an estimate exceeds 1 by more than the rounding tolerance, which would
/// mean the auto- and cross-spectra were not formed from the same segments.
pub fn msc<T: Real>(est: &SpectralEstimate<T>) -> Result<Msc<T>> {
    let peak_u = est.psd_u.iter().copied().fold(T::zero(), T::max);
    let peak_v = est.psd_v.iter().copied().fold(T::zero(), T::max);
    let floor = T::epsilon() * T::epsilon();
    let tol = clamp_tolerance::<T>();
    let mut values = Vec::with_capacity(est.freqs.len());
    let mut excluded = Vec::with_capacity(est.freqs.len());
    for k in 0..est.freqs.len() {
        let (pu, pv) = (est.psd_u[k], est.psd_v[k]);
        if !(pu > peak_u * floor && pv > peak_v * floor && pu > T::zero() && pv > T::zero()) {
            values.push(T::nan());
            excluded.push(true);
            continue;
        }
        let c = est.cross[k].norm_sqr() / (pu * pv);
        assert!(
            c <= T::one() + tol,
            "coherence {c} exceeds 1 at {} Hz beyond rounding tolerance",
            est.freqs[k]
        );
        values.push(c.min(T::one()).max(T::zero()));
        excluded.push(false);
    }
    if excluded.iter().all(|&e| e) {
        return Err(CoherenceError::AllMasked);
    }
    Ok(Msc {
        freqs: est.freqs.clone(),
        values,
        excluded,
    })
}

/// Frequency average of `c2` over non-excluded bins with `lo ≤ f ≤ hi`.
///
/// Contiguous runs are integrated with the trapezoid rule and the total is
/// divided by the spanned extent; an isolated bin counts as one grid step.
fn average_over<T: Real>(c2: &[T], freqs: &[f64], excluded: &[bool], lo: f64, hi: f64) -> Option<T> {
    let df = if freqs.len() > 1 { freqs[1] - freqs[0] } else { 1.0 };
    let keep: Vec<bool> = freqs
        .iter()
        .zip(excluded)
        .zip(c2)
        .map(|((&f, &e), v)| !e && v.is_finite() && f >= lo && f <= hi)
        .collect();
    let mut integral = 0.0;
    let mut extent = 0.0;
    let mut k = 0;
    while k < keep.len() {
        if !keep[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < keep.len() && keep[k] {
            k += 1;
        }
        let run = &c2[start..k];
        if run.len() == 1 {
            integral += run[0].as_f64() * df;
            extent += df;
        } else {
            for w in run.windows(2) {
                integral += 0.5 * (w[0].as_f64() + w[1].as_f64()) * df;
            }
            extent += (run.len() - 1) as f64 * df;
        }
    }
    (extent > 0.0).then(|| T::lit((integral / extent).clamp(0.0, 1.0)))
}

/// Integrated connectivity `P = (1/T)∫ C²(ω) dω` over every usable bin.
pub fn integrated_coherence<T: Real>(c2: &[T], freqs: &[f64], excluded: &[bool]) -> Result<T> {
    average_over(c2, freqs, excluded, f64::NEG_INFINITY, f64::INFINITY).ok_or(CoherenceError::AllMasked)
}

/// Integrated connectivity restricted to each band's `[lo, hi]`.
pub fn band_coherence<T: Real>(c2: &[T], freqs: &[f64], excluded: &[bool], bands: &[BandSpec]) -> Result<Vec<T>> {
    bands
        .iter()
        .map(|b| {
            average_over(c2, freqs, excluded, b.lo, b.hi).ok_or_else(|| CoherenceError::BandOutsideGrid {
                name: b.name.clone(),
                lo: b.lo,
                hi: b.hi,
            })
        })
        .collect()
}

impl<T: Real> Msc<T> {
    pub fn integrated(&self) -> Result<T> {
        integrated_coherence(&self.values, &self.freqs, &self.excluded)
    }

    pub fn banded(&self, bands: &[BandSpec]) -> Result<Vec<T>> {
        band_coherence(&self.values, &self.freqs, &self.excluded, bands)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hemisphere {
    Left,
    Right,
}

impl Hemisphere {
    pub fn as_str(self) -> &'static str {
        match self {
            Hemisphere::Left => "left",
            Hemisphere::Right => "right",
        }
    }
}

/// Electrodes grouped by hemisphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemisphereMontage {
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl Default for HemisphereMontage {
    /// Left F7, T7, TP9, P7, C3; right F8, T8, TP10, P8, C4.
    fn default() -> Self {
        Self {
            left: HOMAN_LEFT.iter().map(|s| s.to_string()).collect(),
            right: HOMAN_RIGHT.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl HemisphereMontage {
    /// Unordered intra-hemisphere pairs, `(i, j)` with `i` before `j`.
    pub fn pairs(&self, side: Hemisphere) -> Vec<(String, String)> {
        let names = match side {
            Hemisphere::Left => &self.left,
            Hemisphere::Right => &self.right,
        };
        let mut out = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                out.push((names[i].clone(), names[j].clone()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCoherence<T> {
    pub hemisphere: Hemisphere,
    pub electrode_i: String,
    pub electrode_j: String,
    pub msc: Msc<T>,
    pub p: T,
    pub band_p: Vec<T>,
}

/// Per-pair coherence plus hemispheric means.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport<T> {
    pub bands: Vec<BandSpec>,
    pub pairs: Vec<PairCoherence<T>>,
    pub left_mean: T,
    pub right_mean: T,
    pub left_band_means: Vec<T>,
    pub right_band_means: Vec<T>,
}

impl<T: Real> CoherenceReport<T> {
    pub fn band_means(&self, side: Hemisphere) -> &[T] {
        match side {
            Hemisphere::Left => &self.left_band_means,
            Hemisphere::Right => &self.right_band_means,
        }
    }

    pub fn mean(&self, side: Hemisphere) -> T {
        match side {
            Hemisphere::Left => self.left_mean,
            Hemisphere::Right => self.right_mean,
        }
    }

    /// One row per pair, then one `MEAN` row per hemisphere.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("hemisphere,electrode_i,electrode_j,P");
        for b in &self.bands {
            let _ = write!(out, ",{}", b.name);
        }
        out.push('\n');
        for p in &self.pairs {
            let _ = write!(out, "{},{},{},{}", p.hemisphere.as_str(), p.electrode_i, p.electrode_j, p.p);
            for v in &p.band_p {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        for side in [Hemisphere::Left, Hemisphere::Right] {
            let _ = write!(out, "{},MEAN,,{}", side.as_str(), self.mean(side));
            for v in self.band_means(side) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Mean integrated coherence over all intra-hemisphere pairs on each side.
pub fn hemispheric_scores<T: Real>(
    rec: &Recording<T>,
    montage: &HemisphereMontage,
    params: &WelchParams,
    bands: &[BandSpec],
) -> Result<CoherenceReport<T>> {
    let mut cache: Vec<(String, SegmentSpectra<T>)> = Vec::new();
    for name in montage.left.iter().chain(&montage.right) {
        if cache.iter().any(|(n, _)| n == name) {
            continue;
        }
        let row = rec
            .channel(name)
            .ok_or_else(|| CoherenceError::MissingElectrode(name.clone()))?;
        cache.push((name.clone(), segment_spectra(&row.to_vec(), rec.fs(), params)?));
    }
    let spectra = |name: &str| &cache.iter().find(|(n, _)| n == name).expect("cached").1;

    let mut pairs = Vec::new();
    let mut side_means = Vec::new();
    for side in [Hemisphere::Left, Hemisphere::Right] {
        let side_pairs = montage.pairs(side);
        let mut p_sum = T::zero();
        let mut band_sum = vec![T::zero(); bands.len()];
        for (a, b) in &side_pairs {
            let est = estimate_from(spectra(a), spectra(b));
            let m = msc(&est)?;
            let p = m.integrated()?;
            let band_p = m.banded(bands)?;
            p_sum = p_sum + p;
            for (s, &v) in band_sum.iter_mut().zip(&band_p) {
                *s = *s + v;
            }
            pairs.push(PairCoherence {
                hemisphere: side,
                electrode_i: a.clone(),
                electrode_j: b.clone(),
                msc: m,
                p,
                band_p,
            });
        }
        let count = T::from_usize_lossy(side_pairs.len().max(1));
        side_means.push((p_sum / count, band_sum.into_iter().map(|s| s / count).collect::<Vec<_>>()));
    }
    let (right_mean, right_band_means) = side_means.pop().expect("two sides");
    let (left_mean, left_band_means) = side_means.pop().expect("two sides");
    Ok(CoherenceReport {
        bands: bands.to_vec(),
        pairs,
        left_mean,
        right_mean,
        left_band_means,
        right_band_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn self_spectra() {
        let u = noise(250 * 180, 1);
        let est = welch_spectra(&u, &u, 250.0, &WelchParams::default()).unwrap();
        assert_eq!(est.segments, 179);
        assert_eq!(est.psd_u, est.psd_v);
        for (c, &p) in est.cross.iter().zip(&est.psd_u) {
            assert_eq!(c.im, 0.0);
            assert!((c.re - p).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn white_noise_density_level() {
        // Unit-variance white noise has one-sided density 2/fs.
        let u = noise(250 * 120, 5);
        let est = welch_spectra(&u, &u, 250.0, &WelchParams::default()).unwrap();
        let interior = &est.psd_u[5..245];
        let m = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((m - 2.0 / 250.0).abs() < 0.05 * 2.0 / 250.0, "{m}");
    }

    #[test]
    fn too_few_segments() {
        let u = vec![1.0f64; 300];
        assert_eq!(
            welch_spectra(&u, &u, 250.0, &WelchParams::default()).unwrap_err(),
            CoherenceError::TooFewSegments { segments: 0 }
        );
        let bad = WelchParams { segment_s: 2.0, overlap: 1.0 };
        assert!(welch_spectra(&u, &u, 250.0, &bad).is_err());
        assert!(welch_spectra(&u, &u[..200], 250.0, &WelchParams::default()).is_err());
    }

    #[test]
    fn integration_cases() {
        let freqs: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        let none = vec![false; 10];
        assert_eq!(integrated_coherence(&[1.0f64; 10], &freqs, &none).unwrap(), 1.0);
        assert_eq!(integrated_coherence(&[0.0f64; 10], &freqs, &none).unwrap(), 0.0);
        let half: Vec<f64> = (0..10).map(|k| if k < 5 { 1.0 } else { 0.0 }).collect();
        assert!((integrated_coherence(&half, &freqs, &none).unwrap() - 0.5).abs() < 1e-12);
        // Masked bins drop out of both the integral and the extent.
        let mut mask = vec![false; 10];
        mask[7] = true;
        let vals: Vec<f64> = (0..10).map(|k| if k == 7 { f64::NAN } else { 1.0 }).collect();
        assert_eq!(integrated_coherence(&vals, &freqs, &mask).unwrap(), 1.0);
        assert!(integrated_coherence(&vals, &freqs, &[true; 10]).is_err());
    }

    #[test]
    fn band_integration() {
        let freqs: Vec<f64> = (0..=250).map(|k| k as f64 * 0.5).collect();
        let none = vec![false; freqs.len()];
        let ones = vec![1.0f64; freqs.len()];
        let bands = BandSpec::standard_bands();
        assert_eq!(band_coherence(&ones, &freqs, &none, &bands).unwrap(), vec![1.0; 5]);
        let out = [BandSpec::new("x", 200.0, 300.0)];
        assert!(matches!(
            band_coherence(&ones, &freqs, &none, &out),
            Err(CoherenceError::BandOutsideGrid { .. })
        ));
    }

    #[test]
    fn pair_enumeration() {
        let m = HemisphereMontage::default();
        let left = m.pairs(Hemisphere::Left);
        assert_eq!(left.len(), 10);
        assert_eq!(m.pairs(Hemisphere::Right).len(), 10);
        assert_eq!(left[0], ("F7".to_string(), "T7".to_string()));
        assert_eq!(left[9], ("P7".to_string(), "C3".to_string()));
    }
}
