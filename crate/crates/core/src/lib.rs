//! EEG feature extraction and classification toolkit.
//!
//! Core math is generic over [`Real`] (`f32` or `f64`); the `*64` / `*32`
//! aliases below pin the common instantiations.

pub mod bandpower;
pub mod coherence;
pub mod features;
pub mod filters;
pub mod mlkit;
pub mod pipeline;
pub mod recording;
mod scalar;
pub mod spectrum;
pub mod synth;
pub mod wavelet;

pub use scalar::Real;

pub use bandpower::{power_matrix, short_term_samples, window_power, PowerMatrix};
pub use coherence::{
    band_coherence, hemispheric_scores, integrated_coherence, msc, welch_spectra,
    CoherenceReport, SpectralEstimate,
};
pub use features::{FeatureTable, Normalization};
pub use filters::{
    apply_zero_phase, band_decompose, design_butterworth, remove_drift, remove_line_noise,
    BandSpec, FilterBank, FilterCoefficients, FilterKind,
};
pub use mlkit::{Metrics, RegressionMetrics};
pub use recording::{
    load_recording, save_recording, Diagnosis, ElectrodeSet, Epoch, EpochMode, Recording,
};
pub use wavelet::{MorletParams, Scalogram};

pub type Recording64 = Recording<f64>;
pub type Recording32 = Recording<f32>;
pub type PowerMatrix64 = PowerMatrix<f64>;
pub type PowerMatrix32 = PowerMatrix<f32>;
pub type Scalogram64 = Scalogram<f64>;
pub type Scalogram32 = Scalogram<f32>;
pub type SpectralEstimate64 = SpectralEstimate<f64>;
pub type SpectralEstimate32 = SpectralEstimate<f32>;
pub type FeatureTable64 = FeatureTable<f64>;
pub type FeatureTable32 = FeatureTable<f32>;
