use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ElectrodeChoice, PipelineConfig, Stage};
use super::{PipelineError, Result};
use crate::bandpower::{recording_power_matrices, PowerMatrix};
use crate::coherence::{hemispheric_scores, CoherenceReport, Hemisphere, HemisphereMontage};
use crate::features::{assemble, channel_means, channel_stds, FeatureTable, NamedVector, SubjectFeatures};
use crate::filters::{remove_drift, remove_line_noise, BandSpec, FilterBank};
use crate::mlkit::{
    compute_metrics, cross_validate, cross_validate_regression, AnyModel, Classifier, ClassifierModel,
    LinearRegression, Metrics, Regressor,
};
use crate::recording::{load_recording, ElectrodeSet, EpochMode, Recording, BASELINE};
use crate::synth::{gen_cohort, mix_seed, write_cohort};
use crate::wavelet::{
    baseline_reference, cwt, downsample_max, scale_grid, scale_to_freq, to_pgm, MorletParams,
};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSummary {
    pub classifier: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl ClassifierSummary {
    fn new(name: &str, m: &Metrics) -> Self {
        Self {
            classifier: name.to_string(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            accuracy: m.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// Machine-readable record of a run. Contains no timestamps, so identical
/// inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub subjects: usize,
    pub electrode_set: ElectrodeChoice,
    pub classification: Vec<ClassifierSummary>,
    pub regression: Option<RegressionSummary>,
    pub evaluation: Vec<ClassifierSummary>,
    pub files: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| PipelineError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Human-readable stage plan; validates the config but reads no data.
pub fn describe_plan(cfg: &PipelineConfig) -> Result<String> {
    let plan = cfg.validate()?;
    let mut out = String::new();
    for (i, s) in plan.iter().enumerate() {
        let detail = match s {
            Stage::Synth => {
                let spec = cfg.synth.as_ref().expect("validated");
                format!("{} ASD + {} TD subjects at {} Hz", spec.n_asd, spec.n_td, spec.fs)
            }
            Stage::Preprocess => format!(
                "epoch {}, drift removal {}, notch {:?}",
                cfg.preprocess.epoch, cfg.preprocess.remove_drift, cfg.preprocess.line_hz
            ),
            Stage::Bandpower => format!("W = {} s, E = {} s", cfg.bandpower.window_s, cfg.bandpower.step_s),
            Stage::Wavelet => format!("{} scales, width {}", cfg.wavelet.scales, cfg.wavelet.width),
            Stage::Coherence => format!("Welch {} s segments", cfg.coherence.segment_s),
            Stage::Features => format!("normalize {}", cfg.features.normalize),
            Stage::Train => format!("{} with {:?}", cfg.train.classifiers.join(", "), cfg.train.cv),
            Stage::Eval => "apply exported models".to_string(),
        };
        let _ = writeln!(out, "{}. {} ({})", i + 1, s, detail);
    }
    Ok(out)
}

struct Subject {
    id: String,
    raw: Option<Recording<f64>>,
    task: Option<Recording<f64>>,
    baseline: Option<Recording<f64>>,
    power: Vec<PowerMatrix<f64>>,
    coherence: Option<CoherenceReport<f64>>,
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    out: &'a Path,
    files: Vec<PathBuf>,
    subjects: Vec<Subject>,
    table: Option<FeatureTable<f64>>,
    classification: Vec<ClassifierSummary>,
    regression: Option<RegressionSummary>,
    evaluation: Vec<ClassifierSummary>,
}

type StageResult = std::result::Result<(), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

impl Ctx<'_> {
    fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> StageResult {
        let rel = rel.as_ref();
        write_atomic(&self.out.join(rel), bytes).map_err(err)?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    fn sub_seed(&self, stage: Stage) -> u64 {
        mix_seed(self.cfg.seed, stage as u64)
    }

    fn bands(&self, fs: f64) -> std::result::Result<Vec<BandSpec>, String> {
        self.cfg.bandpower.bands.iter().map(|b| b.fitted_to(fs).map_err(err)).collect()
    }

    fn electrodes(&self, rec: &Recording<f64>) -> Vec<String> {
        match self.cfg.electrode_set {
            ElectrodeChoice::Homan => ElectrodeSet::homan().names().to_vec(),
            ElectrodeChoice::All => rec.labels().to_vec(),
        }
    }

    fn task(&self, i: usize) -> std::result::Result<&Recording<f64>, String> {
        self.subjects[i].task.as_ref().ok_or_else(|| "preprocessed data missing".to_string())
    }

    fn synth(&mut self) -> StageResult {
        let mut spec = self.cfg.synth.clone().expect("validated");
        spec.seed = self.sub_seed(Stage::Synth);
        let cohort = gen_cohort::<f64>(&spec).map_err(err)?;
        let mut csv = String::from("subject_id,diagnosis,ados2,lambda_left,lambda_right\n");
        for s in &cohort {
            let info = s.recording.info();
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                s.subject_id(),
                info.diagnosis.map_or("", |d| d.as_str()),
                info.ados2_score.map_or(String::new(), |v| v.to_string()),
                s.lambda_left,
                s.lambda_right
            );
        }
        self.write("synth/cohort.csv", csv.as_bytes())?;
        if self.cfg.save_recordings {
            let dir = self.out.join("synth/recordings");
            fs::create_dir_all(&dir).map_err(err)?;
            write_cohort(&cohort, &dir).map_err(err)?;
            let mut names: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(err)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter_map(|p| p.strip_prefix(self.out).ok().map(Path::to_path_buf))
                .collect();
            names.sort();
            self.files.extend(names);
        }
        self.subjects = cohort
            .into_iter()
            .map(|s| Subject {
                id: s.subject_id().to_string(),
                raw: Some(s.recording),
                task: None,
                baseline: None,
                power: Vec::new(),
                coherence: None,
            })
            .collect();
        Ok(())
    }

    fn load_inputs(&mut self) -> StageResult {
        let input = self.cfg.input.as_ref().expect("validated");
        for m in &input.manifests {
            let path = self.cfg.resolve(m);
            let rec: Recording<f64> = load_recording(&path).map_err(err)?;
            let id = rec.info().subject_id.clone().unwrap_or_else(|| {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            self.subjects.push(Subject { id, raw: Some(rec), task: None, baseline: None, power: Vec::new(), coherence: None });
        }
        Ok(())
    }

    fn preprocess(&mut self) -> StageResult {
        if self.cfg.input.is_some() {
            self.load_inputs()?;
        }
        let pc = &self.cfg.preprocess;
        let mode = pc.middle_third_s.map_or(EpochMode::Literal, |seconds| EpochMode::MiddleThird { seconds });
        let clean = |rec: &Recording<f64>| -> std::result::Result<Recording<f64>, String> {
            let fs = rec.fs();
            rec.map_channels(|x| {
                let mut y = x.to_vec();
                if pc.remove_drift {
                    y = remove_drift(&y, fs).map_err(err)?;
                }
                if let Some(line) = pc.line_hz.filter(|&l| l + 1.0 < fs / 2.0) {
                    y = remove_line_noise(&y, fs, line).map_err(err)?;
                }
                Ok::<_, String>(y)
            })
        };
        let choice = self.cfg.electrode_set;
        let processed: Vec<(Recording<f64>, Option<Recording<f64>>, String)> = self
            .subjects
            .par_iter()
            .map(|s| {
                let raw = s.raw.as_ref().expect("loaded");
                let findings: Vec<String> = raw.validate().findings.iter().map(|f| f.to_string()).collect();
                let raw = match choice {
                    ElectrodeChoice::Homan => raw.select_channels(&ElectrodeSet::homan()).map_err(err)?,
                    ElectrodeChoice::All => raw.clone(),
                };
                let task = clean(&raw.extract_epoch(&pc.epoch, mode).map_err(err)?)?;
                let baseline = match raw.epoch(BASELINE) {
                    Some(_) => Some(clean(&raw.extract_epoch(BASELINE, EpochMode::Literal).map_err(err)?)?),
                    None => None,
                };
                let mut report = String::new();
                for f in findings {
                    let _ = writeln!(report, "{},{}", s.id, f.replace(',', ";"));
                }
                Ok((task, baseline, report))
            })
            .collect::<std::result::Result<_, String>>()?;
        let mut channels = String::from("subject_id,channel,mean,std\n");
        let mut validation = String::from("subject_id,finding\n");
        for (s, (task, baseline, report)) in self.subjects.iter_mut().zip(processed) {
            let means = channel_means(&task);
            let stds = channel_stds(&task).map_err(err)?;
            for ((label, m), sd) in task.labels().iter().zip(means).zip(stds) {
                let _ = writeln!(channels, "{},{label},{m},{sd}", s.id);
            }
            validation.push_str(&report);
            s.task = Some(task);
            s.baseline = baseline;
            s.raw = None;
        }
        self.write("preprocess/channels.csv", channels.as_bytes())?;
        self.write("preprocess/validation.csv", validation.as_bytes())
    }

    fn bandpower(&mut self) -> StageResult {
        let bp = &self.cfg.bandpower;
        let mut outputs = Vec::new();
        for i in 0..self.subjects.len() {
            let task = self.task(i)?;
            let bank = FilterBank::new(&self.bands(task.fs())?, task.fs(), bp.order).map_err(err)?;
            let set = ElectrodeSet::new(self.electrodes(task)).map_err(err)?;
            let rec = task.select_channels(&set).map_err(err)?;
            outputs.push(recording_power_matrices(&rec, &bank, bp.window_s, bp.step_s).map_err(err)?);
        }
        for (i, mats) in outputs.into_iter().enumerate() {
            for m in &mats {
                let rel = format!("bandpower/{}_{}.csv", self.subjects[i].id, m.electrode);
                self.write(rel, m.to_csv().as_bytes())?;
            }
            self.subjects[i].power = mats;
        }
        Ok(())
    }

    fn wavelet(&mut self) -> StageResult {
        let wc = &self.cfg.wavelet;
        let params = MorletParams::new(wc.f_c, wc.f_b).map_err(err)?;
        let scales = scale_grid(wc.scales);
        let mut peaks = String::from("subject_id,electrode,peak_scale,peak_freq_hz\n");
        for i in 0..self.subjects.len() {
            let task = self.task(i)?;
            let electrodes = if wc.electrodes.is_empty() { self.electrodes(task) } else { wc.electrodes.clone() };
            let baseline = self.subjects[i].baseline.as_ref().filter(|_| wc.baseline_reference);
            let images: Vec<(String, Vec<u8>, f64, f64)> = electrodes
                .par_iter()
                .map(|el| {
                    let x = task.channel(el).ok_or_else(|| format!("electrode {el} missing"))?.to_vec();
                    let mut sg = cwt(&x, task.fs(), &scales, &params).map_err(err)?.with_electrode(el.clone());
                    let peak_scale = sg.scales[sg.peak_row()];
                    let peak = scale_to_freq(peak_scale, task.fs(), &params);
                    if let Some(b) = baseline {
                        let bx = b.channel(el).ok_or_else(|| format!("baseline electrode {el} missing"))?.to_vec();
                        let bsg = cwt(&bx, b.fs(), &scales, &params).map_err(err)?;
                        sg = baseline_reference(&sg, &bsg).map_err(err)?;
                    }
                    let small = downsample_max(&sg, wc.width.min(sg.values.ncols())).map_err(err)?;
                    Ok((el.clone(), to_pgm(&small).map_err(err)?, peak_scale, peak))
                })
                .collect::<std::result::Result<_, String>>()?;
            let id = self.subjects[i].id.clone();
            for (el, bytes, peak_scale, peak) in images {
                let _ = writeln!(peaks, "{id},{el},{peak_scale},{peak}");
                self.write(format!("wavelet/{id}_{el}.pgm"), &bytes)?;
            }
        }
        self.write("wavelet/peaks.csv", peaks.as_bytes())
    }

    fn coherence(&mut self) -> StageResult {
        let welch = self.cfg.coherence.welch();
        let montage = HemisphereMontage::default();
        let reports: Vec<CoherenceReport<f64>> = (0..self.subjects.len())
            .into_par_iter()
            .map(|i| {
                let task = self.task(i)?;
                hemispheric_scores(task, &montage, &welch, &self.bands(task.fs())?).map_err(err)
            })
            .collect::<std::result::Result<_, String>>()?;
        let mut summary = String::from("subject_id,left_mean,right_mean\n");
        for (i, r) in reports.into_iter().enumerate() {
            let id = self.subjects[i].id.clone();
            let _ = writeln!(summary, "{id},{},{}", r.left_mean, r.right_mean);
            self.write(format!("coherence/{id}.csv"), r.to_csv().as_bytes())?;
            self.subjects[i].coherence = Some(r);
        }
        self.write("coherence/summary.csv", summary.as_bytes())
    }

    fn features(&mut self) -> StageResult {
        let mut rows = Vec::new();
        for s in &self.subjects {
            let task = s.task.as_ref().ok_or("preprocessed data missing")?;
            let coh = s.coherence.as_ref().ok_or("coherence missing")?;
            let mut names = vec!["left_mean".to_string(), "right_mean".to_string()];
            let mut values = vec![coh.left_mean, coh.right_mean];
            for side in [Hemisphere::Left, Hemisphere::Right] {
                for (b, &v) in coh.bands.iter().zip(coh.band_means(side)) {
                    names.push(format!("{}_{}", side.as_str(), b.name));
                    values.push(v);
                }
            }
            let mut bp_names = Vec::new();
            let mut bp_values = Vec::new();
            for m in &s.power {
                for (b, row) in m.bands.iter().zip(m.values.rows()) {
                    bp_names.push(format!("{}_{}", m.electrode, b.name));
                    bp_values.push(row.mean().unwrap_or(0.0));
                }
            }
            let mut sf = SubjectFeatures::new(s.id.clone())
                .with_source("coherence", NamedVector::new(names, values))
                .with_source("bandpower", NamedVector::new(bp_names, bp_values));
            sf.label = task.info().diagnosis;
            sf.score = task.info().ados2_score;
            rows.push(sf);
        }
        let (table, norm) = assemble(&rows, &["coherence", "bandpower"], self.cfg.features.normalize).map_err(err)?;
        self.write("features/features.csv", table.to_csv().as_bytes())?;
        if let Some(n) = norm {
            let json = serde_json::to_string_pretty(&n).map_err(err)?;
            self.write("features/normalization.json", json.as_bytes())?;
        }
        self.table = Some(table);
        Ok(())
    }

    fn train(&mut self) -> StageResult {
        let table = self.table.clone().ok_or("feature table missing")?;
        let tc = &self.cfg.train;
        let seed = self.sub_seed(Stage::Train);
        let labels = table.labels().ok_or("feature table has no labels")?.to_vec();
        let kinds = tc.classifier_kinds().map_err(err)?;
        let mut metrics_csv = String::from("Classifier,Precision,Recall,F1,Accuracy\n");
        let mut preds_csv = String::from("subject_id,label");
        let mut all_preds = Vec::new();
        for kind in &kinds {
            let cv = cross_validate(&table, kind, tc.cv.into(), seed).map_err(err)?;
            let m = cv.metrics;
            let _ = writeln!(metrics_csv, "{},{},{},{},{}", kind.name(), m.precision, m.recall, m.f1, m.accuracy);
            self.classification.push(ClassifierSummary::new(kind.name(), &m));
            let _ = write!(preds_csv, ",{}", kind.name());
            all_preds.push(cv.predictions);
            let model: AnyModel<f64> = kind.fit(table.rows().view(), &labels).map_err(err)?;
            let json = model.to_json().map_err(err)?;
            self.write(format!("train/models/{}.json", kind.name()), json.as_bytes())?;
        }
        preds_csv.push('\n');
        for (i, id) in table.subject_ids().iter().enumerate() {
            let _ = write!(preds_csv, "{id},{}", labels[i]);
            for p in &all_preds {
                let _ = write!(preds_csv, ",{}", p[i]);
            }
            preds_csv.push('\n');
        }
        if !kinds.is_empty() {
            self.write("train/metrics.csv", metrics_csv.as_bytes())?;
            self.write("train/cv_predictions.csv", preds_csv.as_bytes())?;
        }
        if !tc.regression_features.is_empty() {
            if table.scores().is_none() {
                log::warn!("no ADOS-2 scores in the feature table; skipping regression");
            } else {
                self.regress(&table, seed)?;
            }
        }
        Ok(())
    }

    fn regress(&mut self, table: &FeatureTable<f64>, seed: u64) -> StageResult {
        let names = &self.cfg.train.regression_features;
        let cols: Vec<usize> = names
            .iter()
            .map(|n| table.column_index(n).ok_or_else(|| format!("regression feature {n} not in table")))
            .collect::<std::result::Result<_, _>>()?;
        let sub = table.select_columns(&cols);
        let cv = cross_validate_regression(&sub, &LinearRegression::default(), self.cfg.train.cv.into(), seed)
            .map_err(err)?;
        let y: Vec<f64> = sub.scores().expect("checked").iter().map(|&s| s as f64).collect();
        let model = LinearRegression::default().fit(sub.rows().view(), &y).map_err(err)?;
        let m = cv.metrics;
        let csv = format!("Model,r2,MAE,RMSE\nLinear Regression,{},{},{}\n", m.r2, m.mae, m.rmse);
        self.write("train/regression.csv", csv.as_bytes())?;
        let summary = RegressionSummary {
            features: names.clone(),
            coefficients: model.coefficients.clone(),
            intercept: model.intercept,
            r2: m.r2,
            mae: m.mae,
            rmse: m.rmse,
        };
        let json = serde_json::to_string_pretty(&summary).map_err(err)?;
        self.write("train/models/linreg.json", json.as_bytes())?;
        self.regression = Some(summary);
        Ok(())
    }

    fn eval(&mut self) -> StageResult {
        let table = self.table.clone().ok_or("feature table missing")?;
        let labels = table.labels().ok_or("feature table has no labels")?.to_vec();
        let mut metrics_csv = String::from("Classifier,Precision,Recall,F1,Accuracy\n");
        let mut preds_csv = String::from("subject_id,label");
        let mut all = Vec::new();
        for kind in self.cfg.train.classifier_kinds().map_err(err)? {
            let path = self.out.join(format!("train/models/{}.json", kind.name()));
            let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let model = AnyModel::<f64>::from_json(&text).map_err(err)?;
            if model.n_features() != table.n_features() {
                return Err(format!("model {} expects {} features", kind.name(), model.n_features()));
            }
            let preds = model.predict_all(table.rows().view());
            let m = compute_metrics(&preds, &labels).map_err(err)?;
            let _ = writeln!(metrics_csv, "{},{},{},{},{}", kind.name(), m.precision, m.recall, m.f1, m.accuracy);
            let _ = write!(preds_csv, ",{}", kind.name());
            self.evaluation.push(ClassifierSummary::new(kind.name(), &m));
            all.push(preds);
        }
        preds_csv.push('\n');
        for (i, id) in table.subject_ids().iter().enumerate() {
            let _ = write!(preds_csv, "{id},{}", labels[i]);
            for p in &all {
                let _ = write!(preds_csv, ",{}", p[i]);
            }
            preds_csv.push('\n');
        }
        self.write("eval/metrics.csv", metrics_csv.as_bytes())?;
        self.write("eval/predictions.csv", preds_csv.as_bytes())
    }
}

/// Runs the configured stages into `out`. On a stage failure the error is
/// also written to `failed/<stage>.txt`; outputs of earlier stages stay.
pub fn run(cfg: &PipelineConfig, out: &Path) -> Result<RunSummary> {
    let plan = cfg.validate()?;
    fs::create_dir_all(out).map_err(|source| PipelineError::Io { path: out.to_path_buf(), source })?;
    let mut ctx = Ctx {
        cfg,
        out,
        files: Vec::new(),
        subjects: Vec::new(),
        table: None,
        classification: Vec::new(),
        regression: None,
        evaluation: Vec::new(),
    };
    for &stage in &plan {
        log::info!("stage {stage}");
        let res = match stage {
            Stage::Synth => ctx.synth(),
            Stage::Preprocess => ctx.preprocess(),
            Stage::Bandpower => ctx.bandpower(),
            Stage::Wavelet => ctx.wavelet(),
            Stage::Coherence => ctx.coherence(),
            Stage::Features => ctx.features(),
            Stage::Train => ctx.train(),
            Stage::Eval => ctx.eval(),
        };
        if let Err(message) = res {
            let marker = out.join("failed").join(format!("{stage}.txt"));
            write_atomic(&marker, format!("stage {stage} failed: {message}\n").as_bytes())?;
            return Err(PipelineError::Stage { stage, message });
        }
    }
    let mut files = Vec::new();
    let mut rels = ctx.files.clone();
    rels.sort();
    rels.dedup();
    for rel in rels {
        let path = out.join(&rel);
        let bytes = fs::read(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
        files.push(FileDigest {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    let summary = RunSummary {
        seed: cfg.seed,
        stages: plan,
        subjects: ctx.subjects.len(),
        electrode_set: cfg.electrode_set,
        classification: ctx.classification,
        regression: ctx.regression,
        evaluation: ctx.evaluation,
        files,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&out.join(SUMMARY_FILE), json.as_bytes())?;
    Ok(summary)
}
