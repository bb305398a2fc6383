use std::fs;
use std::path::Path;

use eegkit::pipeline::{
    describe_plan, run, sha256_hex, InputConfig, PipelineConfig, PipelineError, RunSummary, Stage,
    SUMMARY_FILE,
};
use eegkit::synth::CohortSpec;

fn short_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed,
        synth: Some(CohortSpec { baseline_s: 10.0, task_s: 40.0, ..CohortSpec::default() }),
        ..PipelineConfig::default()
    };
    cfg.stages.retain(|&s| s != Stage::Wavelet);
    cfg
}

fn read_summary(dir: &Path) -> RunSummary {
    serde_json::from_slice(&fs::read(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

#[test]
fn end_to_end_smoke() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = short_config(1);
    cfg.train.classifiers = vec!["gnb".into()];
    let summary = run(&cfg, out.path()).unwrap();
    assert_eq!(summary.subjects, 17);
    assert_eq!(summary.classification.len(), 1);
    assert_eq!(summary.classification[0].classifier, "gnb");
    assert!((0.0..=1.0).contains(&summary.classification[0].accuracy));
    assert!(summary.regression.is_some());

    let text = fs::read_to_string(out.path().join(SUMMARY_FILE)).unwrap();
    assert!(text.contains("\"accuracy\""));
    assert_eq!(read_summary(out.path()), summary);

    let metrics = fs::read_to_string(out.path().join("train/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), "Classifier,Precision,Recall,F1,Accuracy");

    // Every listed file exists with the recorded digest.
    assert!(!summary.files.is_empty());
    for f in &summary.files {
        let bytes = fs::read(out.path().join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256, "{}", f.path);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
    for rel in ["features/features.csv", "coherence/summary.csv", "eval/metrics.csv"] {
        assert!(summary.files.iter().any(|f| f.path == rel), "{rel}");
    }
}

#[test]
fn train_without_features_is_rejected_before_running() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = short_config(0);
    cfg.stages = vec![Stage::Synth, Stage::Preprocess, Stage::Train];
    match run(&cfg, out.path()) {
        Err(PipelineError::Dependency { stage, missing }) => {
            assert_eq!((stage, missing), (Stage::Train, Stage::Features));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(fs::read_dir(out.path()).unwrap().count(), 0);
}

#[test]
fn identical_runs_identical_summaries() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = short_config(5);
    run(&cfg, a.path()).unwrap();
    run(&cfg, b.path()).unwrap();
    assert_eq!(
        fs::read(a.path().join(SUMMARY_FILE)).unwrap(),
        fs::read(b.path().join(SUMMARY_FILE)).unwrap()
    );
    let c = tempfile::tempdir().unwrap();
    run(&short_config(6), c.path()).unwrap();
    assert_ne!(read_summary(a.path()).files, read_summary(c.path()).files);
}

#[test]
fn stage_failure_leaves_marker() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = short_config(2);
    cfg.bandpower.window_s = 100.0;
    match run(&cfg, out.path()) {
        Err(e @ PipelineError::Stage { .. }) => assert_eq!(e.stage(), Some(Stage::Bandpower)),
        other => panic!("{other:?}"),
    }
    let marker = fs::read_to_string(out.path().join("failed/bandpower.txt")).unwrap();
    assert!(marker.contains("bandpower"));
    assert!(out.path().join("synth/cohort.csv").is_file());
    assert!(!out.path().join(SUMMARY_FILE).exists());
}

#[test]
fn saved_recordings_feed_a_second_run() {
    let first = tempfile::tempdir().unwrap();
    let mut cfg = short_config(3);
    cfg.save_recordings = true;
    cfg.stages = vec![Stage::Synth];
    run(&cfg, first.path()).unwrap();
    let rec_dir = first.path().join("synth/recordings");
    let mut manifests: Vec<_> = fs::read_dir(&rec_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    manifests.sort();
    assert_eq!(manifests.len(), 17);

    let second = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        seed: 3,
        stages: vec![Stage::Preprocess, Stage::Bandpower, Stage::Coherence, Stage::Features, Stage::Train],
        input: Some(InputConfig { manifests }),
        ..PipelineConfig::default()
    };
    let summary = run(&cfg, second.path()).unwrap();
    assert_eq!(summary.subjects, 17);
    assert_eq!(summary.classification.len(), 3);
}

#[test]
fn wavelet_stage_writes_images() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = short_config(4);
    cfg.synth.as_mut().unwrap().n_asd = 1;
    cfg.synth.as_mut().unwrap().n_td = 1;
    cfg.stages = vec![Stage::Synth, Stage::Preprocess, Stage::Wavelet];
    cfg.wavelet.electrodes = vec!["C3".into()];
    cfg.wavelet.width = 64;
    let summary = run(&cfg, out.path()).unwrap();
    let pgm = fs::read(out.path().join("wavelet/S01_C3.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n64 150\n255\n"));
    assert!(summary.files.iter().any(|f| f.path == "wavelet/peaks.csv"));
}

#[test]
fn plan_lists_stages_without_running() {
    let cfg = short_config(0);
    let plan = describe_plan(&cfg).unwrap();
    assert_eq!(plan.lines().count(), 7);
    assert!(plan.lines().next().unwrap().starts_with("1. synth"));

    let mut none = short_config(0);
    none.synth = None;
    assert!(matches!(describe_plan(&none), Err(PipelineError::Config(_))));
}

#[test]
fn config_file_round_trip() {
    let cfg = short_config(9);
    let back = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert!(PipelineConfig::from_toml("bogus_key = 1").is_err());
}
