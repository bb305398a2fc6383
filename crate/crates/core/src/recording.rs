//! Multichannel recordings, epochs, electrode sets and manifest/CSV ingestion.
//!
//! A recording on disk is two files: a TOML manifest carrying the sampling
//! rate, channel order, epoch table and optional subject labels, and a CSV
//! with one header row of electrode labels followed by one row per sample
//! (values in microvolts).

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub const BASELINE: &str = "BASELINE";

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("channel {label:?} declared in manifest is absent from the CSV header")]
    MissingChannel { label: String },
    #[error("manifest declares {declared} channels but CSV header has {found}")]
    ChannelCount { declared: usize, found: usize },
    #[error("CSV line {line}, column {column}: {message}")]
    Csv {
        line: usize,
        column: String,
        message: String,
    },
    #[error("non-finite value at CSV line {line}, column {column}")]
    NonFinite { line: usize, column: String },
    #[error("epoch {name:?} [{start}, {end}) lies outside [0, {samples})")]
    EpochOutOfRange {
        name: String,
        start: usize,
        end: usize,
        samples: usize,
    },
    #[error("unknown epoch {0:?}")]
    UnknownEpoch(String),
    #[error("epoch {name:?} has {samples} samples but {required} are required")]
    EpochTooShort {
        name: String,
        samples: usize,
        required: usize,
    },
    #[error("unknown electrode {0:?}")]
    UnknownElectrode(String),
    #[error("invalid recording: {0}")]
    Invalid(String),
}

pub type Result<T, E = RecordingError> = std::result::Result<T, E>;

/// Class label of a subject. ASD is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Diagnosis {
    #[serde(rename = "ASD")]
    Asd,
    #[serde(rename = "TD")]
    Td,
}

impl Diagnosis {
    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::Asd => "ASD",
            Diagnosis::Td => "TD",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "ASD" | "asd" => Some(Diagnosis::Asd),
            "TD" | "td" => Some(Diagnosis::Td),
            _ => None,
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named half-open sample range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoch {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

impl Epoch {
    pub fn new(name: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            name: name.into(),
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered, non-empty list of electrode labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectrodeSet {
    names: Vec<String>,
}

/// Left-hemisphere social-brain electrodes.
pub const HOMAN_LEFT: [&str; 5] = ["F7", "T7", "TP9", "P7", "C3"];
/// Right-hemisphere homologues of [`HOMAN_LEFT`], in matching order.
pub const HOMAN_RIGHT: [&str; 5] = ["F8", "T8", "TP10", "P8", "C4"];

/// 32-channel actiCAP layout used by LiveAmp systems.
pub const MONTAGE_32: [&str; 32] = [
    "Fp1", "Fz", "F3", "F7", "FT9", "FC5", "FC1", "C3", "T7", "TP9", "CP5", "CP1", "Pz", "P3",
    "P7", "O1", "Oz", "O2", "P4", "P8", "TP10", "CP6", "CP2", "Cz", "C4", "T8", "FT10", "FC6",
    "FC2", "F4", "F8", "Fp2",
];

impl ElectrodeSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(RecordingError::Invalid("electrode set is empty".into()));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(RecordingError::Invalid(format!(
                    "electrode {n:?} listed twice"
                )));
            }
        }
        Ok(Self { names })
    }

    /// The ten social-brain electrodes: F7, F8, T7, T8, TP9, TP10, P7, P8, C3, C4.
    pub fn homan() -> Self {
        let names = ["F7", "F8", "T7", "T8", "TP9", "TP10", "P7", "P8", "C3", "C4"];
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn montage_32() -> Self {
        Self {
            names: MONTAGE_32.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Optional subject-level annotations carried alongside the signal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectInfo {
    pub subject_id: Option<String>,
    pub diagnosis: Option<Diagnosis>,
    pub ados2_score: Option<u32>,
}

/// Channels × samples signal matrix with its sampling rate, labels and epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    data: Array2<T>,
    fs: f64,
    labels: Vec<String>,
    epochs: Vec<Epoch>,
    info: SubjectInfo,
}

impl<T: Real> Recording<T> {
    pub fn new(data: Array2<T>, fs: f64, labels: Vec<String>, epochs: Vec<Epoch>) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(RecordingError::Invalid(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if labels.len() != data.nrows() {
            return Err(RecordingError::Invalid(format!(
                "{} labels for {} channels",
                labels.len(),
                data.nrows()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(RecordingError::Invalid(format!("duplicate label {l:?}")));
            }
        }
        check_epochs(&epochs, data.ncols())?;
        Ok(Self {
            data,
            fs,
            labels,
            epochs,
            info: SubjectInfo::default(),
        })
    }

    pub fn with_info(mut self, info: SubjectInfo) -> Self {
        self.info = info;
        self
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn info(&self) -> &SubjectInfo {
        &self.info
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn channel(&self, label: &str) -> Option<ArrayView1<'_, T>> {
        self.channel_index(label).map(|i| self.data.row(i))
    }

    pub fn epoch(&self, name: &str) -> Option<&Epoch> {
        self.epochs.iter().find(|e| e.name == name)
    }

    /// Applies `f` to every channel, keeping labels, epochs and annotations.
    pub fn map_channels<E>(
        &self,
        mut f: impl FnMut(&[T]) -> std::result::Result<Vec<T>, E>,
    ) -> std::result::Result<Self, E> {
        let mut out = Array2::zeros(self.data.raw_dim());
        for (i, row) in self.data.axis_iter(Axis(0)).enumerate() {
            let v = f(&row.to_vec())?;
            assert_eq!(v.len(), self.n_samples(), "channel map changed length");
            out.row_mut(i).assign(&ArrayView1::from(&v));
        }
        Ok(Self {
            data: out,
            ..self.clone()
        })
    }

    /// Slices out the named epoch.
    pub fn extract_epoch(&self, name: &str, mode: EpochMode) -> Result<Self> {
        let ep = self
            .epoch(name)
            .ok_or_else(|| RecordingError::UnknownEpoch(name.to_string()))?;
        let (start, end) = match mode {
            EpochMode::Literal => (ep.start, ep.end),
            EpochMode::MiddleThird { seconds } => {
                let want = (seconds * self.fs).round() as usize;
                let len = ep.len();
                if want == 0 || len < want {
                    return Err(RecordingError::EpochTooShort {
                        name: name.to_string(),
                        samples: len,
                        required: want,
                    });
                }
                let offset = (len / 3).min(len - want);
                (ep.start + offset, ep.start + offset + want)
            }
        };
        let data = self.data.slice(ndarray::s![.., start..end]).to_owned();
        Ok(Self {
            data,
            fs: self.fs,
            labels: self.labels.clone(),
            epochs: vec![Epoch::new(name, 0, end - start)],
            info: self.info.clone(),
        })
    }

    /// Reorders/subsets channels to match `set`.
    pub fn select_channels(&self, set: &ElectrodeSet) -> Result<Self> {
        let idx = set
            .names()
            .iter()
            .map(|n| {
                self.channel_index(n)
                    .ok_or_else(|| RecordingError::UnknownElectrode(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let data = self.data.select(Axis(0), &idx);
        Ok(Self {
            data,
            fs: self.fs,
            labels: set.names().to_vec(),
            epochs: self.epochs.clone(),
            info: self.info.clone(),
        })
    }

    /// Scans for non-finite cells, flat stretches and duplicate labels.
    pub fn validate(&self) -> ValidationReport {
        let mut findings = Vec::new();
        let mut seen = HashSet::new();
        for l in &self.labels {
            if !seen.insert(l.as_str()) {
                findings.push(Finding::DuplicateLabel { label: l.clone() });
            }
        }
        // A channel is flat if some 5 s window has zero variance, i.e. a run of
        // identical values at least that long exists.
        let flat_len = ((5.0 * self.fs).round() as usize).clamp(1, self.n_samples().max(1));
        for (ch, row) in self.data.axis_iter(Axis(0)).enumerate() {
            let label = self.labels.get(ch).cloned().unwrap_or_default();
            let mut run_start = 0usize;
            let mut flagged_flat = false;
            for (i, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    findings.push(Finding::NonFinite {
                        label: label.clone(),
                        channel: ch,
                        sample: i,
                    });
                }
                if i > 0 && v != row[i - 1] {
                    run_start = i;
                }
                if !flagged_flat && v.is_finite() && i + 1 - run_start >= flat_len {
                    findings.push(Finding::FlatChannel {
                        label: label.clone(),
                        start_sample: run_start,
                    });
                    flagged_flat = true;
                }
            }
        }
        ValidationReport { findings }
    }
}

fn check_epochs(epochs: &[Epoch], samples: usize) -> Result<()> {
    let mut baseline = 0;
    for e in epochs {
        if e.start >= e.end || e.end > samples {
            return Err(RecordingError::EpochOutOfRange {
                name: e.name.clone(),
                start: e.start,
                end: e.end,
                samples,
            });
        }
        if e.name == BASELINE {
            baseline += 1;
        }
    }
    if baseline > 1 {
        return Err(RecordingError::Invalid("BASELINE epoch listed twice".into()));
    }
    Ok(())
}

/// How [`Recording::extract_epoch`] chooses its slice.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EpochMode {
    /// The epoch range as recorded.
    #[default]
    Literal,
    /// A `seconds`-long slice starting one third of the way into the epoch,
    /// pulled back so that it ends no later than the epoch end.
    MiddleThird { seconds: f64 },
}

impl EpochMode {
    pub fn middle_third_180() -> Self {
        EpochMode::MiddleThird { seconds: 180.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Finding {
    NonFinite {
        label: String,
        channel: usize,
        sample: usize,
    },
    FlatChannel {
        label: String,
        start_sample: usize,
    },
    DuplicateLabel {
        label: String,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::NonFinite {
                label,
                channel,
                sample,
            } => write!(f, "non-finite value in {label} (channel {channel}) at sample {sample}"),
            Finding::FlatChannel {
                label,
                start_sample,
            } => write!(f, "flat signal in {label} from sample {start_sample}"),
            Finding::DuplicateLabel { label } => write!(f, "duplicate label {label}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Manifest + CSV I/O

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochEntry {
    pub name: String,
    pub start_sample: usize,
    pub end_sample: usize,
}

/// On-disk metadata for one recording. `data` is resolved relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    pub fs_hz: f64,
    pub data: String,
    pub channels: Vec<String>,
    #[serde(default)]
    pub epochs: Vec<EpochEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<Diagnosis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ados2_score: Option<u32>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| RecordingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| RecordingError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Admit NaN/Inf cells instead of rejecting the file.
    pub allow_non_finite: bool,
}

pub fn load_recording<T: Real>(manifest_path: &Path) -> Result<Recording<T>> {
    load_recording_with(manifest_path, LoadOptions::default())
}

pub fn load_recording_with<T: Real>(
    manifest_path: &Path,
    opts: LoadOptions,
) -> Result<Recording<T>> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let csv_path = base.join(&manifest.data);
    let file = fs::File::open(&csv_path).map_err(|source| RecordingError::Io {
        path: csv_path.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| RecordingError::Csv {
            line: 1,
            column: "-".into(),
            message: format!("malformed header: {e}"),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().any(|h| h.is_empty()) {
        return Err(RecordingError::Csv {
            line: 1,
            column: "-".into(),
            message: "malformed header: empty electrode label".into(),
        });
    }
    // Column index in the CSV for each manifest channel.
    let mut cols = Vec::with_capacity(manifest.channels.len());
    for ch in &manifest.channels {
        match header.iter().position(|h| h == ch) {
            Some(i) => cols.push(i),
            None => {
                return Err(RecordingError::MissingChannel { label: ch.clone() });
            }
        }
    }
    if header.len() != manifest.channels.len() {
        return Err(RecordingError::ChannelCount {
            declared: manifest.channels.len(),
            found: header.len(),
        });
    }

    let n_ch = manifest.channels.len();
    let mut columns: Vec<Vec<T>> = vec![Vec::new(); n_ch];
    for (r, rec) in reader.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| RecordingError::Csv {
            line,
            column: "-".into(),
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(RecordingError::Csv {
                line,
                column: "-".into(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (k, &c) in cols.iter().enumerate() {
            let cell = &rec[c];
            let v: T = cell.parse().map_err(|_| RecordingError::Csv {
                line,
                column: header[c].clone(),
                message: format!("non-numeric cell {cell:?}"),
            })?;
            if !opts.allow_non_finite && !v.is_finite() {
                return Err(RecordingError::NonFinite {
                    line,
                    column: header[c].clone(),
                });
            }
            columns[k].push(v);
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    let mut data = Array2::zeros((n_ch, n));
    for (k, col) in columns.into_iter().enumerate() {
        data.row_mut(k).assign(&ArrayView1::from(&col));
    }
    let epochs = manifest
        .epochs
        .iter()
        .map(|e| Epoch::new(e.name.clone(), e.start_sample, e.end_sample))
        .collect();
    let info = SubjectInfo {
        subject_id: manifest.subject_id.clone(),
        diagnosis: manifest.diagnosis,
        ados2_score: manifest.ados2_score,
    };
    Recording::new(data, manifest.fs_hz, manifest.channels.clone(), epochs)
        .map(|r| r.with_info(info))
        .map_err(|e| match e {
            RecordingError::Invalid(m) => RecordingError::Manifest {
                path: manifest_path.to_path_buf(),
                message: m,
            },
            other => other,
        })
}

/// Writes `rec` as `<dir>/<stem>.toml` + `<dir>/<stem>.csv`; returns the manifest path.
///
/// Values are written with shortest round-trip formatting, so loading the
/// pair back reproduces every finite sample bit-for-bit.
pub fn save_recording<T: Real>(rec: &Recording<T>, dir: &Path, stem: &str) -> Result<PathBuf> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RecordingError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_name = format!("{stem}.csv");
    let csv_path = dir.join(&csv_name);
    let manifest_path = dir.join(format!("{stem}.toml"));

    let mut out = String::with_capacity(rec.n_samples() * rec.n_channels() * 12);
    out.push_str(&rec.labels.join(","));
    out.push('\n');
    for j in 0..rec.n_samples() {
        for i in 0..rec.n_channels() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&rec.data[[i, j]].to_string());
        }
        out.push('\n');
    }
    fs::write(&csv_path, out).map_err(io_err(&csv_path))?;

    let manifest = Manifest {
        subject_id: rec.info.subject_id.clone(),
        fs_hz: rec.fs,
        data: csv_name,
        channels: rec.labels.clone(),
        epochs: rec
            .epochs
            .iter()
            .map(|e| EpochEntry {
                name: e.name.clone(),
                start_sample: e.start,
                end_sample: e.end,
            })
            .collect(),
        diagnosis: rec.info.diagnosis,
        ados2_score: rec.info.ados2_score,
    };
    fs::write(&manifest_path, manifest.to_toml()).map_err(io_err(&manifest_path))?;
    Ok(manifest_path)
}
