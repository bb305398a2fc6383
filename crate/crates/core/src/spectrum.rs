//! FFT helpers shared by the spectral, coherence and wavelet code.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Real;

/// Full complex DFT of a real series.
pub fn dft<T: Real>(x: &[T]) -> Vec<Complex<T>> {
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// `|X_k|` for `k = 0..=n/2`.
pub fn magnitude_spectrum<T: Real>(x: &[T]) -> Vec<T> {
    let spec = dft(x);
    spec.iter().take(x.len() / 2 + 1).map(|c| c.norm()).collect()
}

/// Bin centre frequencies for a one-sided spectrum of an `n`-point DFT.
pub fn rfft_freqs(n: usize, fs: f64) -> Vec<f64> {
    (0..=n / 2).map(|k| k as f64 * fs / n as f64).collect()
}

/// Periodic Hann window of length `n`.
pub fn hann<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            T::lit(w)
        })
        .collect()
}
