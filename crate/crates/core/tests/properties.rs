mod common;

use common::{prewarped_butterworth, sine, white, FS};
use eegkit::bandpower::{power_matrix, window_count, window_power};
use eegkit::coherence::{msc, welch_spectra, WelchParams};
use eegkit::features::shannon_entropy;
use eegkit::filters::{apply_zero_phase, band_decompose, design_butterworth, BandSpec, FilterKind};
use eegkit::mlkit::{
    compute_metrics, cross_validate, pca_fit, regression_metrics, Classifier, ClassifierModel,
    Components, CvScheme, GaussianNb, Knn,
};
use eegkit::recording::{load_recording, save_recording, Diagnosis, ElectrodeSet, Epoch, EpochMode, Recording};
use eegkit::synth::gen_band_signal;
use eegkit::wavelet::{cwt, downsample_max, scale_grid, MorletParams, Scalogram};
use eegkit::FeatureTable;
use ndarray::Array2;
use proptest::prelude::*;

fn kind_and_cutoffs() -> impl Strategy<Value = (FilterKind, Vec<f64>)> {
    prop_oneof![
        (1.0..100.0f64).prop_map(|c| (FilterKind::Lowpass, vec![c])),
        (1.0..100.0f64).prop_map(|c| (FilterKind::Highpass, vec![c])),
        (1.0..90.0f64, 2.0..30.0f64).prop_map(|(lo, w)| (FilterKind::Bandpass, vec![lo, lo + w])),
        (1.0..90.0f64, 2.0..30.0f64).prop_map(|(lo, w)| (FilterKind::Bandstop, vec![lo, lo + w])),
    ]
}

fn kind_name(k: FilterKind) -> &'static str {
    match k {
        FilterKind::Lowpass => "lowpass",
        FilterKind::Highpass => "highpass",
        FilterKind::Bandpass => "bandpass",
        FilterKind::Bandstop => "bandstop",
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn designs_are_stable_and_bounded((kind, cut) in kind_and_cutoffs(), order in 1usize..=8, f in 0.5..124.5f64) {
        let c = design_butterworth(kind, &cut, order, FS).unwrap();
        prop_assert!(c.max_pole_radius() < 1.0);
        let m = c.magnitude(f);
        prop_assert!(m <= 1.0 + 1e-9);
        let oracle = prewarped_butterworth(kind_name(kind), &cut, order, FS, f);
        prop_assert!((m - oracle).abs() <= 1e-9, "{m} vs {oracle}");
    }

    #[test]
    fn zero_phase_filtering_is_linear(seed in 0u64..1000, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let c = design_butterworth(FilterKind::Bandpass, &[8.0, 13.0], 5, FS).unwrap();
        let x = white(1500, seed);
        let y = white(1500, seed + 1);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (
            apply_zero_phase(&c, &x).unwrap(),
            apply_zero_phase(&c, &y).unwrap(),
            apply_zero_phase(&c, &mix).unwrap(),
        );
        for i in 0..x.len() {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn power_matrix_invariants(seed in 0u64..1000, secs in 10usize..40, c in 0.1..10.0f64) {
        let x = white(secs * 250, seed);
        let bands = BandSpec::standard_bands();
        let m = power_matrix(&bands, &x, 5.0, 2.0, FS).unwrap();
        prop_assert_eq!(m.n_windows(), window_count(x.len(), 5.0, 2.0, FS).unwrap());
        prop_assert_eq!(m.n_windows(), (x.len() - 1250) / 500 + 1);
        prop_assert!(m.values.iter().all(|&v| v >= 0.0));

        let filtered = band_decompose(&x, FS, &bands).unwrap();
        let j = m.n_windows() - 1;
        for (i, s) in filtered.iter().enumerate() {
            prop_assert_eq!(m.values[[i, j]], window_power(s, 5.0, 2.0, j, FS).unwrap());
        }

        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let mc = power_matrix(&bands, &cx, 5.0, 2.0, FS).unwrap();
        for (p, q) in m.values.iter().zip(mc.values.iter()) {
            prop_assert!((q - c * c * p).abs() <= 1e-9 * (c * c * p).max(1e-300));
        }
    }

    #[test]
    fn cwt_power_scales_quadratically(seed in 0u64..1000, c in -5.0..5.0f64) {
        let x = white(600, seed);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let p = MorletParams::default();
        let a = cwt(&x, FS, &scale_grid(12), &p).unwrap();
        let b = cwt(&cx, FS, &scale_grid(12), &p).unwrap();
        prop_assert!(a.values.iter().all(|&v| v >= 0.0));
        for (u, v) in a.values.iter().zip(b.values.iter()) {
            prop_assert!((v - c * c * u).abs() <= 1e-9 * (c * c * u).abs().max(1e-12));
        }
    }

    #[test]
    fn max_pooling_is_sound(rows in 1usize..6, cols in 1usize..200, target in 1usize..200, seed in 0u64..1000) {
        let target = target.min(cols);
        let values = Array2::from_shape_vec((rows, cols), white(rows * cols, seed)).unwrap();
        let sg = Scalogram {
            electrode: String::new(),
            scales: scale_grid(rows),
            times: (0..cols).map(|i| i as f64).collect(),
            values: values.clone(),
            referenced: false,
            fs: FS,
            params: MorletParams::default(),
            coi: vec![0; rows],
        };
        let d = downsample_max(&sg, target).unwrap();
        prop_assert_eq!(d.values.dim(), (rows, target));
        let max_in = values.iter().copied().fold(f64::MIN, f64::max);
        let max_out = d.values.iter().copied().fold(f64::MIN, f64::max);
        prop_assert_eq!(max_in, max_out);
        for r in 0..rows {
            let mut covered = 0;
            for j in 0..target {
                let (a, b) = (j * cols / target, (j + 1) * cols / target);
                prop_assert!(b - a == cols / target || b - a == cols / target + 1);
                covered += b - a;
                for k in a..b {
                    prop_assert!(d.values[[r, j]] >= values[[r, k]]);
                }
            }
            prop_assert_eq!(covered, cols);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pure_tone_peak_frequency(g in 2.0..60.0f64) {
        // Dense scale grid: 0.25 Hz steps from 1 to 80 Hz.
        let mut scales: Vec<f64> = (0..=316).map(|k| FS / (1.0 + 0.25 * k as f64)).collect();
        scales.reverse();
        let sg = cwt(&sine(g, 1.0, FS, 2500), FS, &scales, &MorletParams::default()).unwrap();
        let f = sg.freqs()[sg.peak_row()];
        prop_assert!((f - g).abs() <= (0.1 * g).max(0.5), "{g} -> {f}");
    }

    #[test]
    fn coherence_bounds_symmetry_and_gain(seed in 0u64..1000, mix in 0.0..1.0f64, a in 0.1..10.0f64, b in -10.0..-0.1f64) {
        let n = 20 * 250;
        let u = white(n, seed);
        let v: Vec<f64> = white(n, seed + 7).iter().zip(&u).map(|(e, s)| mix * s + (1.0 - mix) * e).collect();
        let w = WelchParams::default();
        let m = msc(&welch_spectra(&u, &v, FS, &w).unwrap()).unwrap();
        let r = msc(&welch_spectra(&v, &u, FS, &w).unwrap()).unwrap();
        prop_assert_eq!(&m.values, &r.values);
        prop_assert!(m.values.iter().all(|c| (0.0..=1.0).contains(c)));
        let p = m.integrated().unwrap();
        prop_assert!((0.0..=1.0).contains(&p));

        let au: Vec<f64> = u.iter().map(|x| a * x).collect();
        let bv: Vec<f64> = v.iter().map(|x| b * x).collect();
        let g = msc(&welch_spectra(&au, &bv, FS, &w).unwrap()).unwrap();
        for (x, y) in m.values.iter().zip(&g.values) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_bounds(x in prop::collection::vec(-1e3..1e3f64, 2..400), bins in 2usize..128) {
        let h = shannon_entropy(&x, bins).unwrap();
        prop_assert!(h >= 0.0 && h <= (bins as f64).log2() + 1e-12);
    }

    #[test]
    fn entropy_affine_invariance(
        body in prop::collection::vec(0u8..=63, 1..300),
        a in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64],
        b in -100.0..100.0f64,
    ) {
        // Integer levels 0..=63 over 64 bins keep every sample at least 1/63
        // of a bin away from an edge, so rounding cannot move a sample.
        let mut x: Vec<f64> = body.iter().map(|&v| v as f64).collect();
        x.extend([0.0, 63.0]);
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert_eq!(shannon_entropy(&x, 64).unwrap(), shannon_entropy(&y, 64).unwrap());
    }

    #[test]
    fn metrics_identities(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
        let d = |b: bool| if b { Diagnosis::Asd } else { Diagnosis::Td };
        let preds: Vec<Diagnosis> = pairs.iter().map(|p| d(p.0)).collect();
        let labels: Vec<Diagnosis> = pairs.iter().map(|p| d(p.1)).collect();
        let m = compute_metrics(&preds, &labels).unwrap();
        let c = m.confusion;
        prop_assert_eq!(c.total(), pairs.len());
        prop_assert_eq!(m.accuracy, (c.tp + c.tn) as f64 / pairs.len() as f64);
        if m.precision + m.recall > 0.0 {
            let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((m.f1 - h).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
        for v in [m.precision, m.recall, m.f1, m.accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn regression_error_ordering(p in prop::collection::vec(-20.0..20.0f64, 3..40), seed in 0u64..100) {
        let t: Vec<f64> = white(p.len(), seed);
        let r = regression_metrics(&p, &t).unwrap();
        prop_assert!(r.rmse >= r.mae && r.mae >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pca_components_orthonormal(n in 5usize..60, d in 2usize..6, seed in 0u64..1000) {
        let x = Array2::from_shape_vec((n, d), white(n * d, seed)).unwrap();
        let k = d.min(n - 1);
        let m = pca_fit(x.view(), Components::Count(k)).unwrap();
        let g = m.components.dot(&m.components.t());
        for i in 0..k {
            for j in 0..k {
                let e = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g[[i, j]] - e).abs() <= 1e-9);
            }
            // Sign rule: the largest-magnitude entry is positive.
            let row = m.components.row(i);
            let big = row.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            prop_assert!(big > 0.0);
        }
        prop_assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1]));

        let z = m.transform(x.view()).unwrap();
        let zc = &z - &z.mean_axis(ndarray::Axis(0)).unwrap();
        let cov = zc.t().dot(&zc) / (n as f64 - 1.0);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    prop_assert!(cov[[i, j]].abs() <= 1e-6 * m.explained_variance[0]);
                }
            }
        }
    }

    #[test]
    fn one_nn_fits_training_set(n in 2usize..40, seed in 0u64..1000) {
        let x = Array2::from_shape_vec((n, 3), white(n * 3, seed)).unwrap();
        let y: Vec<Diagnosis> = (0..n).map(|i| if (i + seed as usize) % 3 == 0 { Diagnosis::Asd } else { Diagnosis::Td }).collect();
        let m = Knn { k: 1 }.fit(x.view(), &y).unwrap();
        prop_assert_eq!(m.predict_all(x.view()), y);
    }

    #[test]
    fn gnb_predictions_survive_affine_rescaling(seed in 0u64..1000, s in 0.1..50.0f64, t in -20.0..20.0f64) {
        let n = 30;
        let x = Array2::from_shape_vec((n, 2), white(n * 2, seed)).unwrap();
        let y: Vec<Diagnosis> = (0..n).map(|i| if x[[i, 0]] > 0.0 { Diagnosis::Asd } else { Diagnosis::Td }).collect();
        prop_assume!(y.contains(&Diagnosis::Asd) && y.contains(&Diagnosis::Td));
        let q = Array2::from_shape_vec((20, 2), white(40, seed + 1)).unwrap();
        let a = GaussianNb.fit(x.view(), &y).unwrap().predict_all(q.view());
        let xs = x.mapv(|v| s * v + t);
        let qs = q.mapv(|v| s * v + t);
        let b = GaussianNb.fit(xs.view(), &y).unwrap().predict_all(qs.view());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cross_validation_reproducible(seed in 0u64..1000, k in 2usize..6) {
        let n = 24;
        let x = Array2::from_shape_vec((n, 2), white(n * 2, seed)).unwrap();
        let y: Vec<Diagnosis> = (0..n).map(|i| if i % 2 == 0 { Diagnosis::Asd } else { Diagnosis::Td }).collect();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let t = FeatureTable::new(vec!["a".into(), "b".into()], x, ids).unwrap().with_labels(y).unwrap();
        let r1 = cross_validate(&t, &GaussianNb, CvScheme::KFold(k), seed).unwrap();
        let r2 = cross_validate(&t, &GaussianNb, CvScheme::KFold(k), seed).unwrap();
        prop_assert_eq!(r1.predictions, r2.predictions);
        prop_assert_eq!(r1.metrics.accuracy.to_bits(), r2.metrics.accuracy.to_bits());
    }

    #[test]
    fn recording_round_trip_and_selection(
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 3..90),
        start in 0usize..10,
        len in 1usize..10,
    ) {
        let n = values.len() / 3;
        let data = Array2::from_shape_vec((3, n), values[..3 * n].to_vec()).unwrap();
        let labels: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
        let epochs = if start + len <= n { vec![Epoch::new("TASK1", start, start + len)] } else { vec![] };
        let rec = Recording::new(data, 250.0, labels, epochs.clone()).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let p = save_recording(&rec, dir.path(), "r").unwrap();
        let back = load_recording::<f64>(&p).unwrap();
        prop_assert_eq!(back.data(), rec.data());

        if !epochs.is_empty() {
            prop_assert_eq!(rec.extract_epoch("TASK1", EpochMode::Literal).unwrap().n_samples(), len);
        }
        let set = ElectrodeSet::new(["C", "A"]).unwrap();
        let once = rec.select_channels(&set).unwrap();
        prop_assert_eq!(once.labels(), set.names());
        prop_assert_eq!(once.select_channels(&set).unwrap(), once.clone());
    }

    #[test]
    fn band_signal_deterministic(seed in any::<u64>(), p in prop::collection::vec(0.0..50.0f64, 5)) {
        let a: Vec<f64> = gen_band_signal(&p, FS, 2.0, seed).unwrap();
        let b: Vec<f64> = gen_band_signal(&p, FS, 2.0, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
