mod common;

use common::{sine, white, FS};
use eegkit::wavelet::{
    baseline_reference, cwt, downsample_max, export_image, scale_grid, scale_to_freq, to_gray,
    MorletParams, Scalogram, WaveletError,
};
use ndarray::Array2;

fn params() -> MorletParams {
    MorletParams::default()
}

/// Scales whose frequencies step through `lo..=hi` Hz in 0.25 Hz increments.
fn dense_scales(lo: f64, hi: f64) -> Vec<f64> {
    let steps = ((hi - lo) / 0.25).round() as usize;
    let mut s: Vec<f64> = (0..=steps).map(|k| FS / (lo + 0.25 * k as f64)).collect();
    s.reverse();
    s
}

fn peak_freq(sg: &Scalogram<f64>) -> f64 {
    sg.freqs()[sg.peak_row()]
}

#[test]
fn grid_endpoints() {
    let g = scale_grid(150);
    let p = params();
    assert_eq!(scale_to_freq(g[0], FS, &p), 125.0);
    assert!((scale_to_freq(g[149], FS, &p) - 0.8333).abs() < 1e-3);
    assert_eq!(scale_grid(1), vec![2.0]);
    assert!((scale_to_freq(g[149], 500.0, &p) - 1.6667).abs() < 1e-3);
    assert_eq!(scale_to_freq(25.0, FS, &p), 10.0);
    assert_eq!(scale_to_freq(50.0, FS, &MorletParams::new(2.0, 1.5).unwrap()), 10.0);
}

#[test]
fn ten_hz_tone_on_standard_grid() {
    let x = sine(10.0, 1.0, FS, 20 * 250);
    let sg = cwt(&x, FS, &scale_grid(150), &params()).unwrap();
    let f = peak_freq(&sg);
    assert!((9.0..=11.0).contains(&f), "{f}");
}

#[test]
fn tones_on_standard_grid() {
    for g in [2.0, 5.0, 10.0, 25.0, 40.0] {
        let x = sine(g, 1.0, FS, 20 * 250);
        let sg = cwt(&x, FS, &scale_grid(150), &params()).unwrap();
        let f = peak_freq(&sg);
        assert!((f - g).abs() <= (0.1 * g).max(0.5), "tone {g} Hz peaked at {f} Hz");
    }
}

#[test]
fn tones_on_dense_grid() {
    let scales = dense_scales(1.0, 80.0);
    for g in [2.0, 3.5, 7.0, 12.0, 19.0, 27.0, 35.0, 44.0, 50.0, 60.0] {
        let x = sine(g, 1.0, FS, 10 * 250);
        let sg = cwt(&x, FS, &scales, &params()).unwrap();
        let f = peak_freq(&sg);
        assert!((f - g).abs() <= (0.1 * g).max(0.5), "tone {g} Hz peaked at {f} Hz");
    }
}

#[test]
fn two_tones_give_two_maxima() {
    let n = 20 * 250;
    let x: Vec<f64> = sine(5.0, 1.0, FS, n)
        .iter()
        .zip(sine(40.0, 1.0, FS, n))
        .map(|(a, b)| a + b)
        .collect();
    let sg = cwt(&x, FS, &scale_grid(150), &params()).unwrap();
    let means: Vec<f64> = sg.values.rows().into_iter().map(|r| r.mean().unwrap()).collect();
    let freqs = sg.freqs();
    let local_max: Vec<f64> = (1..means.len() - 1)
        .filter(|&i| means[i] > means[i - 1] && means[i] > means[i + 1])
        .map(|i| freqs[i])
        .collect();
    assert!(local_max.iter().any(|f| (f - 5.0).abs() <= 0.5), "{local_max:?}");
    assert!(local_max.iter().any(|f| (f - 40.0).abs() <= 4.0), "{local_max:?}");
}

#[test]
fn zero_signal() {
    let sg = cwt(&vec![0.0f64; 500], FS, &scale_grid(20), &params()).unwrap();
    assert!(sg.values.iter().all(|&v| v == 0.0));
}

#[test]
fn power_scales_quadratically() {
    let x = white(1000, 4);
    let cx: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
    let a = cwt(&x, FS, &scale_grid(30), &params()).unwrap();
    let b = cwt(&cx, FS, &scale_grid(30), &params()).unwrap();
    for (p, q) in a.values.iter().zip(b.values.iter()) {
        assert!((q - 6.25 * p).abs() <= 1e-9 * (6.25 * p).max(1e-12));
    }
}

#[test]
fn circular_shift_moves_interior_columns() {
    let n = 3000;
    let d = 400;
    let x = white(n, 11);
    let y: Vec<f64> = (0..n).map(|i| x[(i + n - d) % n]).collect();
    let scales = scale_grid(25);
    let p = params();
    let a = cwt(&x, FS, &scales, &p).unwrap();
    let b = cwt(&y, FS, &scales, &p).unwrap();
    let h = p.half_width(*scales.last().unwrap());
    for r in 0..scales.len() {
        let row_max = a.values.row(r).iter().copied().fold(0.0, f64::max);
        for i in d + h..n - h {
            let (u, v) = (a.values[[r, i - d]], b.values[[r, i]]);
            assert!((u - v).abs() <= 1e-6 * row_max, "row {r} col {i}");
        }
    }
}

#[test]
fn oversized_scale_is_rejected() {
    let x = white(100, 1);
    assert!(matches!(
        cwt(&x, FS, &[2.0, 400.0], &params()),
        Err(WaveletError::ScaleTooLarge { .. })
    ));
    assert!(matches!(cwt::<f64>(&[], FS, &[2.0], &params()), Err(WaveletError::EmptySeries)));
}

fn synthetic(values: Array2<f64>) -> Scalogram<f64> {
    let (r, c) = values.dim();
    Scalogram {
        electrode: "T7".into(),
        scales: scale_grid(r),
        times: (0..c).map(|i| i as f64 / FS).collect(),
        values,
        referenced: false,
        fs: FS,
        params: params(),
        coi: vec![0; r],
    }
}

#[test]
fn downsample_to_square() {
    let x = white(150 * 45000, 2);
    let sg = synthetic(Array2::from_shape_vec((150, 45000), x).unwrap());
    let d = downsample_max(&sg, 150).unwrap();
    assert_eq!(d.values.dim(), (150, 150));
    // Each cell is the max of its 300-column group.
    for (i, j) in [(0, 0), (77, 31), (149, 149)] {
        let group = sg.values.slice(ndarray::s![i, j * 300..(j + 1) * 300]);
        assert_eq!(d.values[[i, j]], group.iter().copied().fold(f64::MIN, f64::max));
    }
    assert_eq!(downsample_max(&d, 150).unwrap().values, d.values);
    let c = synthetic(Array2::from_elem((4, 90), 3.0));
    assert!(downsample_max(&c, 7).unwrap().values.iter().all(|&v| v == 3.0));
    assert!(matches!(downsample_max(&c, 0), Err(WaveletError::BadTarget { .. })));
}

#[test]
fn baseline_referencing_rows() {
    let mut v = Array2::zeros((3, 6));
    v.row_mut(1).fill(5.0);
    let sg = synthetic(v);
    let mut b = Array2::zeros((3, 6));
    b.row_mut(1).assign(&ndarray::arr1(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]));
    let base = synthetic(b);
    let out = baseline_reference(&sg, &base).unwrap();
    assert!(out.referenced);
    assert!(out.values.row(1).iter().all(|&x| x == 3.0));
    assert!(out.values.row(0).iter().all(|&x| x == 0.0));

    let zero = synthetic(Array2::zeros((3, 6)));
    assert_eq!(baseline_reference(&sg, &zero).unwrap().values, sg.values);

    let means = synthetic(Array2::from_shape_fn((3, 6), |(r, _)| r as f64));
    assert!(baseline_reference(&means, &means).unwrap().values.iter().all(|&x| x == 0.0));

    let other = synthetic(Array2::zeros((4, 6)));
    assert!(matches!(baseline_reference(&sg, &other), Err(WaveletError::ScaleMismatch)));
}

#[test]
fn image_export() {
    let sg = synthetic(ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]));
    let px = to_gray(&sg).unwrap();
    assert_eq!(px, ndarray::arr2(&[[0u8, 255], [255, 0]]));
    assert!(to_gray(&synthetic(Array2::from_elem((2, 2), 7.0))).unwrap().iter().all(|&p| p == 0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sg.pgm");
    let big = synthetic(Array2::from_shape_fn((150, 150), |(i, j)| (i * j) as f64));
    export_image(&big, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header = b"P5\n150 150\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 150 * 150);
}
