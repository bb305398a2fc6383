#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FS: f64 = 250.0;

pub fn sine(freq: f64, amp: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
        .collect()
}

pub fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Analog Butterworth magnitude `1/√(1 + x^{2n})` evaluated at the
/// bilinear pre-warped frequency, for each filter kind.
pub fn prewarped_butterworth(kind: &str, cutoffs: &[f64], order: usize, fs: f64, f: f64) -> f64 {
    let w = |hz: f64| (std::f64::consts::PI * hz / fs).tan();
    let x = match kind {
        "lowpass" => w(f) / w(cutoffs[0]),
        "highpass" => w(cutoffs[0]) / w(f),
        "bandpass" => {
            let (w1, w2, wf) = (w(cutoffs[0]), w(cutoffs[1]), w(f));
            (wf * wf - w1 * w2) / (wf * (w2 - w1))
        }
        "bandstop" => {
            let (w1, w2, wf) = (w(cutoffs[0]), w(cutoffs[1]), w(f));
            wf * (w2 - w1) / (wf * wf - w1 * w2)
        }
        _ => unreachable!(),
    };
    1.0 / (1.0 + x.abs().powi(2 * order as i32)).sqrt()
}
