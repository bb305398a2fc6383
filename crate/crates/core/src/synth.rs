//! Seeded synthetic EEG: band-limited Gaussian noise with set band powers,
//! coherent channel pairs, and labelled two-group cohorts with ADOS-2-like
//! scores. Every output is a pure function of its seed.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{BandSpec, FilterBank, FilterError, DEFAULT_ORDER};
use crate::recording::{
    save_recording, Diagnosis, Epoch, Recording, RecordingError, SubjectInfo, BASELINE, HOMAN_LEFT,
    HOMAN_RIGHT,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("duration {0} s is shorter than 1 s")]
    TooShort(f64),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("cohort has no subjects")]
    NoSubjects,
    #[error("band {0} has no frequency bins at this duration")]
    EmptyBand(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

/// SplitMix64 finalizer; derives independent sub-seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_count(fs: f64, duration_s: f64) -> Result<usize> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(SynthError::BadParam(format!("sampling rate {fs}")));
    }
    if !(duration_s >= 1.0) {
        return Err(SynthError::TooShort(duration_s));
    }
    Ok((duration_s * fs).round() as usize)
}

fn white<T: Real>(n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
}

/// `amplitude·sin(2π·freq·t)` sampled at `fs`.
pub fn sinusoid<T: Real>(freq: f64, amplitude: f64, fs: f64, n: usize) -> Vec<T> {
    (0..n)
        .map(|i| T::lit(amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin()))
        .collect()
}

/// Sum of band-limited Gaussian noise over the standard five bands.
/// `band_powers[b]` is the target windowed power (sum of squares per second)
/// of band `b` as measured by the band-power module.
pub fn gen_band_signal<T: Real>(band_powers: &[f64], fs: f64, duration_s: f64, seed: u64) -> Result<Vec<T>> {
    let bands: Vec<BandSpec> = BandSpec::standard_bands()
        .iter()
        .map(|b| b.fitted_to(fs))
        .collect::<std::result::Result<_, _>>()?;
    gen_band_signal_with(&bands, band_powers, fs, duration_s, seed)
}

/// As [`gen_band_signal`] for arbitrary bands.
///
/// White noise is transformed once; the bins of each band are rescaled so
/// the band's mean square is exactly `power/fs` divided by the mean `|H|⁴`
/// of that band's zero-phase analysis filter over its bins. The filtered
/// band power then lands on the target in expectation.
pub fn gen_band_signal_with<T: Real>(
    bands: &[BandSpec],
    band_powers: &[f64],
    fs: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<T>> {
    if bands.len() != band_powers.len() {
        return Err(SynthError::BadParam(format!(
            "{} powers for {} bands",
            band_powers.len(),
            bands.len()
        )));
    }
    if let Some(p) = band_powers.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(SynthError::BadParam(format!("band power {p}")));
    }
    let n = sample_count(fs, duration_s)?;
    if band_powers.iter().all(|&p| p == 0.0) {
        return Ok(vec![T::zero(); n]);
    }
    let bank = FilterBank::new(bands, fs, DEFAULT_ORDER)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut spec);

    let freq = |k: usize| k as f64 * fs / n as f64;
    let mut gains = vec![0.0; n / 2 + 1];
    for (b, (band, &p)) in bands.iter().zip(band_powers).enumerate() {
        if p == 0.0 {
            continue;
        }
        let bins: Vec<usize> = (0..=n / 2).filter(|&k| band.lo <= freq(k) && freq(k) < band.hi).collect();
        if bins.is_empty() {
            return Err(SynthError::EmptyBand(band.name.clone()));
        }
        let filt = &bank.filters()[b];
        let h4 = bins.iter().map(|&k| filt.magnitude(freq(k)).powi(4)).sum::<f64>() / bins.len() as f64;
        // Parseval: mean square of the component = Σ|X_k|² / n² over both halves.
        let weight = |k: usize| if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
        let energy: f64 = bins.iter().map(|&k| weight(k) * spec[k].norm_sqr()).sum::<f64>() / (n * n) as f64;
        let target = p / fs / h4;
        let g = (target / energy).sqrt();
        for &k in &bins {
            gains[k] = g;
        }
    }
    for k in 0..n {
        let m = if k <= n / 2 { k } else { n - k };
        spec[k] *= gains[m];
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    Ok(spec.iter().map(|c| T::lit(c.re / n as f64)).collect())
}

/// Noise weight on `u` relative to the shared source.
const PAIR_NOISE: f64 = 0.2;

/// Two white-noise channels sharing a source `s`:
/// `u = s + 0.2·n₁`, `v = λ·s + (1−λ)·n₂`. Coherence rises monotonically
/// with `λ`, from ≈ 0 at `λ = 0` to `1/(1 + 0.04)` at `λ = 1`.
pub fn gen_coherent_pair<T: Real>(lambda: f64, fs: f64, duration_s: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(SynthError::BadParam(format!("mixing λ = {lambda}")));
    }
    let n = sample_count(fs, duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s: Vec<f64> = white(n, &mut rng);
    let n1: Vec<f64> = white(n, &mut rng);
    let n2: Vec<f64> = white(n, &mut rng);
    let u = s.iter().zip(&n1).map(|(a, b)| T::lit(a + PAIR_NOISE * b)).collect();
    let v = s
        .iter()
        .zip(&n2)
        .map(|(a, b)| T::lit(lambda * a + (1.0 - lambda) * b))
        .collect();
    Ok((u, v))
}

/// Per-group effect: band-power multipliers and within-hemisphere mixing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupEffect {
    /// One multiplier per band, applied to the base powers.
    pub power_multipliers: Vec<f64>,
    pub lambda_left: f64,
    pub lambda_right: f64,
}

impl GroupEffect {
    pub fn neutral(lambda_right: f64) -> Self {
        Self { power_multipliers: vec![1.0; 5], lambda_left: 0.5, lambda_right }
    }
}

impl Default for GroupEffect {
    fn default() -> Self {
        Self::neutral(0.95)
    }
}

/// Synthetic score `round(a − b·λ_right + noise)` clipped to `[0, 22]`,
/// with Gaussian noise truncated at two standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreModel {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
}

impl Default for ScoreModel {
    fn default() -> Self {
        Self { a: 24.0, b: 20.0, sigma: 1.5 }
    }
}

impl ScoreModel {
    fn draw(&self, lambda: f64, rng: &mut ChaCha8Rng) -> u32 {
        let noise = loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= 2.0 {
                break z * self.sigma;
            }
        };
        (self.a - self.b * lambda + noise).round().clamp(0.0, 22.0) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_asd: usize,
    pub n_td: usize,
    pub fs: f64,
    pub baseline_s: f64,
    pub task_s: f64,
    pub channels: Vec<String>,
    /// Base power per standard band (δ, θ, α, β, γ).
    pub base_powers: Vec<f64>,
    pub asd: GroupEffect,
    pub td: GroupEffect,
    /// Half-width of the uniform per-subject jitter on λ.
    pub lambda_jitter: f64,
    /// Half-width of the uniform per-subject relative jitter on band powers.
    pub power_jitter: f64,
    pub score: ScoreModel,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        let mut asd = GroupEffect::neutral(0.45);
        asd.power_multipliers[1] = 1.5;
        Self {
            n_asd: 8,
            n_td: 9,
            fs: 250.0,
            baseline_s: 30.0,
            task_s: 180.0,
            channels: HOMAN_LEFT.iter().chain(&HOMAN_RIGHT).map(|s| s.to_string()).collect(),
            base_powers: vec![40.0, 20.0, 30.0, 10.0, 5.0],
            asd,
            td: GroupEffect::neutral(0.95),
            lambda_jitter: 0.1,
            power_jitter: 0.1,
            score: ScoreModel::default(),
            seed: 0,
        }
    }
}

impl CohortSpec {
    /// Both groups identical: no power or coherence effect.
    pub fn null_effect(mut self) -> Self {
        self.asd = self.td.clone();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_asd + self.n_td == 0 {
            return Err(SynthError::NoSubjects);
        }
        let nb = self.base_powers.len();
        for g in [&self.asd, &self.td] {
            if g.power_multipliers.len() != nb || g.power_multipliers.iter().any(|&m| !(m > 0.0)) {
                return Err(SynthError::BadParam(format!("power multipliers {:?}", g.power_multipliers)));
            }
            for l in [g.lambda_left, g.lambda_right] {
                if !(0.0..=1.0).contains(&l) {
                    return Err(SynthError::BadParam(format!("mixing λ = {l}")));
                }
            }
        }
        if !(0.0..1.0).contains(&self.power_jitter) || !(self.lambda_jitter >= 0.0) {
            return Err(SynthError::BadParam("jitter".into()));
        }
        if self.channels.is_empty() {
            return Err(SynthError::BadParam("no channels".into()));
        }
        sample_count(self.fs, self.baseline_s)?;
        sample_count(self.fs, self.task_s)?;
        Ok(())
    }

    pub fn n_subjects(&self) -> usize {
        self.n_asd + self.n_td
    }
}

/// A generated subject with its ground-truth mixing weights.
#[derive(Debug, Clone)]
pub struct SyntheticSubject<T> {
    pub recording: Recording<T>,
    pub lambda_left: f64,
    pub lambda_right: f64,
}

impl<T: Real> SyntheticSubject<T> {
    pub fn subject_id(&self) -> &str {
        self.recording.info().subject_id.as_deref().unwrap_or("")
    }
}

/// Generates the cohort; ASD subjects first, then TD. Subject `i` depends
/// only on `mix_seed(spec.seed, i)`.
pub fn gen_cohort<T: Real>(spec: &CohortSpec) -> Result<Vec<SyntheticSubject<T>>> {
    spec.validate()?;
    (0..spec.n_subjects())
        .into_par_iter()
        .map(|i| gen_subject(spec, i))
        .collect()
}

fn gen_subject<T: Real>(spec: &CohortSpec, i: usize) -> Result<SyntheticSubject<T>> {
    let (diagnosis, group) = if i < spec.n_asd {
        (Diagnosis::Asd, &spec.asd)
    } else {
        (Diagnosis::Td, &spec.td)
    };
    let seed = mix_seed(spec.seed, i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |centre: f64, half: f64| {
        let u: f64 = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
        centre + u
    };
    let lambda_left = jitter(group.lambda_left, spec.lambda_jitter).clamp(0.0, 1.0);
    let lambda_right = jitter(group.lambda_right, spec.lambda_jitter).clamp(0.0, 1.0);
    let powers: Vec<f64> = spec
        .base_powers
        .iter()
        .zip(&group.power_multipliers)
        .map(|(&p, &m)| p * m * (1.0 + jitter(0.0, spec.power_jitter)))
        .collect();
    let score = spec.score.draw(lambda_right, &mut rng);

    let duration = spec.baseline_s + spec.task_s;
    let sig = |k: u64| gen_band_signal::<f64>(&powers, spec.fs, duration, mix_seed(seed, k));
    let left_src = sig(0)?;
    let right_src = sig(1)?;
    let n = left_src.len();
    let mut data = Array2::<T>::zeros((spec.channels.len(), n));
    for (c, label) in spec.channels.iter().enumerate() {
        let noise = sig(2 + c as u64)?;
        let mix = if HOMAN_LEFT.contains(&label.as_str()) {
            Some((lambda_left, &left_src))
        } else if HOMAN_RIGHT.contains(&label.as_str()) {
            Some((lambda_right, &right_src))
        } else {
            None
        };
        let mut row = data.row_mut(c);
        match mix {
            Some((l, src)) => {
                let norm = (l * l + (1.0 - l) * (1.0 - l)).sqrt();
                for (j, v) in row.iter_mut().enumerate() {
                    *v = T::lit((l * src[j] + (1.0 - l) * noise[j]) / norm);
                }
            }
            None => {
                for (v, &x) in row.iter_mut().zip(&noise) {
                    *v = T::lit(x);
                }
            }
        }
    }
    let nb = (spec.baseline_s * spec.fs).round() as usize;
    let epochs = vec![Epoch::new(BASELINE, 0, nb), Epoch::new("TASK1", nb, n)];
    let recording = Recording::new(data, spec.fs, spec.channels.clone(), epochs)?.with_info(SubjectInfo {
        subject_id: Some(format!("S{:02}", i + 1)),
        diagnosis: Some(diagnosis),
        ados2_score: Some(score),
    });
    Ok(SyntheticSubject { recording, lambda_left, lambda_right })
}

/// Writes one manifest + CSV per subject into `dir`; returns manifest paths.
pub fn write_cohort<T: Real>(subjects: &[SyntheticSubject<T>], dir: &Path) -> Result<Vec<PathBuf>> {
    subjects
        .iter()
        .map(|s| Ok(save_recording(&s.recording, dir, s.subject_id())?))
        .collect()
}
