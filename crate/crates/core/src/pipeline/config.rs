use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::coherence::WelchParams;
use crate::filters::{BandSpec, DEFAULT_ORDER};
use crate::mlkit::{ClassifierKind, CvScheme, Knn, LogisticRegression};
use crate::synth::CohortSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Preprocess,
    Bandpower,
    Wavelet,
    Coherence,
    Features,
    Train,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Preprocess,
        Stage::Bandpower,
        Stage::Wavelet,
        Stage::Coherence,
        Stage::Features,
        Stage::Train,
        Stage::Eval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Preprocess => "preprocess",
            Stage::Bandpower => "bandpower",
            Stage::Wavelet => "wavelet",
            Stage::Coherence => "coherence",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeChoice {
    /// The ten social-brain electrodes.
    #[default]
    Homan,
    /// Every channel in the recording.
    All,
}

impl ElectrodeChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "homan" => Some(Self::Homan),
            "all" => Some(Self::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Recording manifests, relative to the config file.
    pub manifests: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Task epoch analysed downstream.
    pub epoch: String,
    /// Take a slice of this many seconds from the middle third of the epoch.
    pub middle_third_s: Option<f64>,
    pub remove_drift: bool,
    /// Mains frequency to notch out; `None` disables the notch.
    pub line_hz: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { epoch: "TASK1".into(), middle_third_s: None, remove_drift: true, line_hz: Some(60.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandpowerConfig {
    pub window_s: f64,
    pub step_s: f64,
    pub order: usize,
    pub bands: Vec<BandSpec>,
}

impl Default for BandpowerConfig {
    fn default() -> Self {
        Self {
            window_s: crate::bandpower::DEFAULT_WINDOW_S,
            step_s: crate::bandpower::DEFAULT_STEP_S,
            order: DEFAULT_ORDER,
            bands: BandSpec::standard_bands(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletConfig {
    pub scales: usize,
    pub f_c: f64,
    pub f_b: f64,
    /// Image width after max-pooling along time.
    pub width: usize,
    /// Subtract the per-scale mean of the BASELINE epoch.
    pub baseline_reference: bool,
    /// Electrodes to transform; empty means the whole electrode set.
    pub electrodes: Vec<String>,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            scales: crate::wavelet::DEFAULT_SCALES,
            f_c: 1.0,
            f_b: 1.5,
            width: 512,
            baseline_reference: true,
            electrodes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub segment_s: f64,
    pub overlap: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        let w = WelchParams::default();
        Self { segment_s: w.segment_s, overlap: w.overlap }
    }
}

impl CoherenceConfig {
    pub fn welch(&self) -> WelchParams {
        WelchParams { segment_s: self.segment_s, overlap: self.overlap }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// z-score every column across subjects.
    pub normalize: bool,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self { normalize: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvChoice {
    Loocv,
    Kfold(usize),
}

impl From<CvChoice> for CvScheme {
    fn from(c: CvChoice) -> Self {
        match c {
            CvChoice::Loocv => CvScheme::Loocv,
            CvChoice::Kfold(k) => CvScheme::KFold(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Any of `gnb`, `logistic`, `knn`.
    pub classifiers: Vec<String>,
    pub cv: CvChoice,
    pub logistic: LogisticRegression,
    pub knn: Knn,
    /// Feature columns for score regression; empty disables regression.
    pub regression_features: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            classifiers: vec!["gnb".into(), "logistic".into(), "knn".into()],
            cv: CvChoice::Loocv,
            logistic: LogisticRegression::default(),
            knn: Knn::default(),
            regression_features: vec!["coherence_right_delta".into(), "coherence_right_theta".into()],
        }
    }
}

impl TrainConfig {
    pub fn classifier_kinds(&self) -> Result<Vec<ClassifierKind>> {
        self.classifiers
            .iter()
            .map(|name| match ClassifierKind::parse(name) {
                Some(ClassifierKind::Logistic(_)) => Ok(ClassifierKind::Logistic(self.logistic)),
                Some(ClassifierKind::Knn(_)) => Ok(ClassifierKind::Knn(self.knn)),
                Some(k) => Ok(k),
                None => Err(PipelineError::Config(format!("unknown classifier {name:?}"))),
            })
            .collect()
    }
}

/// Everything a run needs. Maps one-to-one onto the TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub electrode_set: ElectrodeChoice,
    /// Write generated recordings as manifest + CSV.
    pub save_recordings: bool,
    pub out: Option<PathBuf>,
    pub input: Option<InputConfig>,
    pub synth: Option<CohortSpec>,
    pub preprocess: PreprocessConfig,
    pub bandpower: BandpowerConfig,
    pub wavelet: WaveletConfig,
    pub coherence: CoherenceConfig,
    pub features: FeaturesConfig,
    pub train: TrainConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stages: Stage::ALL.to_vec(),
            electrode_set: ElectrodeChoice::Homan,
            save_recordings: false,
            out: None,
            input: None,
            synth: None,
            preprocess: PreprocessConfig::default(),
            bandpower: BandpowerConfig::default(),
            wavelet: WaveletConfig::default(),
            coherence: CoherenceConfig::default(),
            features: FeaturesConfig::default(),
            train: TrainConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn synthetic_source(&self) -> bool {
        self.input.is_none()
    }

    /// Stages `stage` needs to have run first in this configuration.
    pub fn dependencies(&self, stage: Stage) -> Vec<Stage> {
        match stage {
            Stage::Synth => vec![],
            Stage::Preprocess if self.synthetic_source() => vec![Stage::Synth],
            Stage::Preprocess => vec![],
            Stage::Bandpower | Stage::Wavelet | Stage::Coherence => vec![Stage::Preprocess],
            Stage::Features => vec![Stage::Bandpower, Stage::Coherence],
            Stage::Train => vec![Stage::Features],
            Stage::Eval => vec![Stage::Train],
        }
    }

    /// `stage` plus everything it transitively depends on, in run order.
    pub fn closure(&self, stage: Stage) -> Vec<Stage> {
        let mut out = vec![stage];
        let mut i = 0;
        while i < out.len() {
            for d in self.dependencies(out[i]) {
                if !out.contains(&d) {
                    out.push(d);
                }
            }
            i += 1;
        }
        out.sort();
        out
    }

    /// Static checks: sources, stage dependencies, parameter sanity and
    /// input paths. Touches no data.
    pub fn validate(&self) -> Result<Vec<Stage>> {
        let mut plan = self.stages.clone();
        plan.sort();
        plan.dedup();
        if plan.is_empty() {
            return Err(PipelineError::Config("no stages requested".into()));
        }
        match (&self.input, &self.synth) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config("give either [input] or [synth], not both".into()))
            }
            (Some(_), None) if plan.contains(&Stage::Synth) => {
                return Err(PipelineError::Config("synth stage requested but input manifests given".into()))
            }
            (None, None) => {
                return Err(PipelineError::Config("no data source: add [input] or [synth]".into()))
            }
            _ => {}
        }
        for &s in &plan {
            for d in self.dependencies(s) {
                if !plan.contains(&d) {
                    return Err(PipelineError::Dependency { stage: s, missing: d });
                }
            }
        }
        if let Some(spec) = &self.synth {
            spec.validate().map_err(|e| PipelineError::Config(format!("synth: {e}")))?;
        }
        if let Some(input) = &self.input {
            if input.manifests.is_empty() {
                return Err(PipelineError::Config("[input] lists no manifests".into()));
            }
            for m in &input.manifests {
                let p = self.resolve(m);
                if !p.is_file() {
                    return Err(PipelineError::Config(format!("manifest {} not found", p.display())));
                }
            }
        }
        let bp = &self.bandpower;
        if !(bp.window_s > 0.0 && bp.step_s > 0.0 && bp.order > 0 && !bp.bands.is_empty()) {
            return Err(PipelineError::Config("bandpower parameters".into()));
        }
        let wv = &self.wavelet;
        if !(wv.scales > 0 && wv.width > 0 && wv.f_c > 0.0 && wv.f_b > 0.0) {
            return Err(PipelineError::Config("wavelet parameters".into()));
        }
        let co = &self.coherence;
        if !(co.segment_s > 0.0 && (0.0..1.0).contains(&co.overlap)) {
            return Err(PipelineError::Config("coherence parameters".into()));
        }
        if plan.contains(&Stage::Train) {
            if self.train.classifier_kinds()?.is_empty() && self.train.regression_features.is_empty() {
                return Err(PipelineError::Config("train stage has nothing to fit".into()));
            }
            if let CvChoice::Kfold(k) = self.train.cv {
                if k < 2 {
                    return Err(PipelineError::Config(format!("{k}-fold CV")));
                }
            }
        }
        Ok(plan)
    }
}
