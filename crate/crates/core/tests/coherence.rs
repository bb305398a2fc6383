mod common;

use common::{sine, white, FS};
use eegkit::coherence::{
    band_coherence, hemispheric_scores, integrated_coherence, msc, welch_spectra, CoherenceError,
    Hemisphere, HemisphereMontage, WelchParams,
};
use eegkit::filters::BandSpec;
use eegkit::recording::{Recording, HOMAN_LEFT, HOMAN_RIGHT};
use ndarray::Array2;

/// Samples giving exactly `k` half-overlapping 2 s segments at 250 Hz.
fn len_for_segments(k: usize) -> usize {
    500 + (k - 1) * 250
}

fn welch() -> WelchParams {
    WelchParams::default()
}

fn integrated(u: &[f64], v: &[f64]) -> f64 {
    msc(&welch_spectra(u, v, FS, &welch()).unwrap()).unwrap().integrated().unwrap()
}

#[test]
fn self_spectra_agree() {
    let u = white(180 * 250, 1);
    let est = welch_spectra(&u, &u, FS, &welch()).unwrap();
    assert_eq!(est.segments, 179);
    assert_eq!(est.psd_u, est.psd_v);
    for (c, p) in est.cross.iter().zip(&est.psd_u) {
        assert!((c.re - p).abs() <= 1e-12 * p.max(1e-300));
        assert!(c.im.abs() <= 1e-12 * p.max(1e-300));
    }
}

#[test]
fn psd_peak_at_tone() {
    let u = sine(10.0, 1.0, FS, 20 * 250);
    let est = welch_spectra(&u, &u, FS, &welch()).unwrap();
    let k = (0..est.psd_u.len())
        .max_by(|&a, &b| est.psd_u[a].total_cmp(&est.psd_u[b]))
        .unwrap();
    assert_eq!(est.freqs[k], 10.0);
}

#[test]
fn too_few_segments() {
    let u = white(300, 1);
    assert_eq!(
        welch_spectra(&u, &u, FS, &welch()).unwrap_err(),
        CoherenceError::TooFewSegments { segments: 0 }
    );
    let v = white(600, 2);
    assert!(matches!(
        welch_spectra(&v, &v, FS, &welch()),
        Err(CoherenceError::TooFewSegments { segments: 1 })
    ));
    assert!(matches!(
        welch_spectra(&u, &v, FS, &welch()),
        Err(CoherenceError::LengthMismatch(300, 600))
    ));
}

#[test]
fn self_coherence_is_one() {
    let u = white(30 * 250, 5);
    let m = msc(&welch_spectra(&u, &u, FS, &welch()).unwrap()).unwrap();
    for (c, &ex) in m.values.iter().zip(&m.excluded) {
        if !ex {
            assert!((c - 1.0).abs() <= 1e-9);
        }
    }
    assert!((m.integrated().unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn gains_cancel() {
    let u = white(30 * 250, 6);
    let v: Vec<f64> = white(30 * 250, 7).iter().zip(&u).map(|(n, s)| n + s).collect();
    let base = msc(&welch_spectra(&u, &v, FS, &welch()).unwrap()).unwrap();
    let au: Vec<f64> = u.iter().map(|x| -0.3 * x).collect();
    let bv: Vec<f64> = v.iter().map(|x| 12.0 * x).collect();
    let scaled = msc(&welch_spectra(&au, &bv, FS, &welch()).unwrap()).unwrap();
    for (a, b) in base.values.iter().zip(&scaled.values) {
        assert!((a - b).abs() <= 1e-9);
    }
    let three: Vec<f64> = u.iter().map(|x| 3.0 * x).collect();
    let m3 = msc(&welch_spectra(&u, &three, FS, &welch()).unwrap()).unwrap();
    assert!((m3.integrated().unwrap() - 1.0).abs() <= 1e-9);
}

#[test]
fn symmetric_in_arguments() {
    let u = white(20 * 250, 8);
    let v = white(20 * 250, 9);
    let a = msc(&welch_spectra(&u, &v, FS, &welch()).unwrap()).unwrap();
    let b = msc(&welch_spectra(&v, &u, FS, &welch()).unwrap()).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn independent_noise_is_incoherent() {
    let n = len_for_segments(64);
    let u = white(n, 10);
    let v = white(n, 11);
    let est = welch_spectra(&u, &v, FS, &welch()).unwrap();
    assert_eq!(est.segments, 64);
    let m = msc(&est).unwrap();
    let mean = m.values.iter().sum::<f64>() / m.values.len() as f64;
    assert!(mean <= 0.05, "{mean}");
}

#[test]
fn increases_with_mixing() {
    let n = 60 * 250;
    let u = white(n, 20);
    let noise = white(n, 21);
    let ps: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&l| {
            let v: Vec<f64> = u.iter().zip(&noise).map(|(a, b)| l * a + (1.0 - l) * b).collect();
            integrated(&u, &v)
        })
        .collect();
    assert!(ps.windows(2).all(|w| w[1] > w[0]), "{ps:?}");
}

#[test]
fn integration_examples() {
    let freqs: Vec<f64> = (0..=100).map(|k| k as f64).collect();
    let mask = vec![false; freqs.len()];
    assert_eq!(integrated_coherence(&vec![1.0; 101], &freqs, &mask).unwrap(), 1.0);
    assert_eq!(integrated_coherence(&vec![0.0; 101], &freqs, &mask).unwrap(), 0.0);
    // C² = 1 on [0, 50), 0 on [50, 100] with the edge at a grid midpoint.
    let fine: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.1).collect();
    let half: Vec<f64> = fine.iter().map(|&f| if f < 49.95 { 1.0 } else { 0.0 }).collect();
    let p = integrated_coherence(&half, &fine, &vec![false; fine.len()]).unwrap();
    assert!((p - 0.5).abs() <= 1e-3, "{p}");
    assert!(matches!(
        integrated_coherence(&vec![1.0; 101], &freqs, &vec![true; 101]),
        Err(CoherenceError::AllMasked)
    ));
}

#[test]
fn band_examples() {
    let freqs: Vec<f64> = (0..=250).map(|k| k as f64 * 0.5).collect();
    let mask = vec![false; freqs.len()];
    let bands = BandSpec::standard_bands();
    let ones = band_coherence(&vec![1.0f64; freqs.len()], &freqs, &mask, &bands).unwrap();
    assert!(ones.iter().all(|&p| (p - 1.0).abs() < 1e-12));
    let outside = [BandSpec::new("ultra", 200.0, 300.0)];
    assert!(matches!(
        band_coherence(&vec![1.0; freqs.len()], &freqs, &mask, &outside),
        Err(CoherenceError::BandOutsideGrid { .. })
    ));
}

#[test]
fn coherent_tone_peaks_in_alpha() {
    let n = 60 * 250;
    let tone = sine(10.0, 3.0, FS, n);
    let u: Vec<f64> = tone.iter().zip(white(n, 30)).map(|(a, b)| a + b).collect();
    let v: Vec<f64> = tone.iter().zip(white(n, 31)).map(|(a, b)| a + b).collect();
    let m = msc(&welch_spectra(&u, &v, FS, &welch()).unwrap()).unwrap();
    let bands = BandSpec::standard_bands();
    let p = m.banded(&bands).unwrap();
    let alpha = bands.iter().position(|b| b.name == "alpha").unwrap();
    for (i, &v) in p.iter().enumerate() {
        if i != alpha {
            assert!(p[alpha] > v, "{p:?}");
        }
    }
}

fn homan_recording(rows: Vec<Vec<f64>>) -> Recording<f64> {
    let labels: Vec<String> = HOMAN_LEFT.iter().chain(HOMAN_RIGHT.iter()).map(|s| s.to_string()).collect();
    let n = rows[0].len();
    let data = Array2::from_shape_vec((rows.len(), n), rows.concat()).unwrap();
    Recording::new(data, FS, labels, vec![]).unwrap()
}

#[test]
fn hemisphere_pairs_and_copies() {
    let montage = HemisphereMontage::default();
    assert_eq!(montage.pairs(Hemisphere::Left).len(), 10);
    assert_eq!(montage.pairs(Hemisphere::Right).len(), 10);

    let n = len_for_segments(64);
    let shared = white(n, 40);
    let rows: Vec<Vec<f64>> = (0..10)
        .map(|k| if k < 5 { shared.clone() } else { white(n, 100 + k) })
        .collect();
    let rep = hemispheric_scores(&homan_recording(rows), &montage, &welch(), &BandSpec::standard_bands()).unwrap();
    assert_eq!(rep.pairs.len(), 20);
    assert!((rep.left_mean - 1.0).abs() <= 1e-9);
    assert!(rep.right_mean <= 0.05, "{}", rep.right_mean);
}

#[test]
fn independent_hemispheres() {
    let n = len_for_segments(64);
    let rows: Vec<Vec<f64>> = (0..10).map(|k| white(n, 200 + k)).collect();
    let rep = hemispheric_scores(
        &homan_recording(rows),
        &HemisphereMontage::default(),
        &welch(),
        &BandSpec::standard_bands(),
    )
    .unwrap();
    assert!(rep.left_mean <= 0.05 && rep.right_mean <= 0.05);
    for pair in &rep.pairs {
        assert!((0.0..=1.0).contains(&pair.p));
        assert!(pair.msc.values.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

#[test]
fn missing_electrode() {
    let labels = vec!["F7".to_string()];
    let rec = Recording::<f64>::new(Array2::zeros((1, 2000)), FS, labels, vec![]).unwrap();
    assert!(matches!(
        hemispheric_scores(&rec, &HemisphereMontage::default(), &welch(), &BandSpec::standard_bands()),
        Err(CoherenceError::MissingElectrode(_))
    ));
}
