//! File formats.
//!
//! Scores CSV: UTF-8, header `label,p0,p1,...,p{K-1}`, one row per example,
//! `.` decimal separator, no index column. Probabilities are written with 12
//! significant digits. Files without the `label` column are accepted where
//! labels are not needed (prediction).
//!
//! All writers go through a temporary file in the destination directory and
//! rename it into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ordinal_crc_core::calibration::{CalibrationMethod, CalibrationResult, JumpDiagnostics};
use ordinal_crc_core::{LabeledScore, LossSpec, PredictionSet, ScoreVector, WeightScheme};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::RiskReport;

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn format_prob(p: f64) -> String {
    format!("{p:.11e}")
}

/// Serializes labeled scores in the scores CSV format.
pub fn scores_to_csv(rows: &[LabeledScore]) -> Vec<u8> {
    let classes = rows.first().map_or(0, |r| r.classes());
    let mut out = String::with_capacity(rows.len() * (4 + 18 * classes));
    out.push_str("label");
    for j in 0..classes {
        out.push_str(&format!(",p{j}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&r.label.to_string());
        for &p in r.scores.as_slice() {
            out.push(',');
            out.push_str(&format_prob(p));
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_scores(path: &Path, rows: &[LabeledScore]) -> Result<()> {
    write_atomic(path, &scores_to_csv(rows))
}

/// Rows of a scores CSV; `labels` is `None` when the file has no label
/// column.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub scores: Vec<ScoreVector>,
    pub labels: Option<Vec<usize>>,
}

impl ScoreTable {
    pub fn classes(&self) -> usize {
        self.scores.first().map_or(0, |s| s.classes())
    }

    pub fn into_labeled(self, path: &Path) -> Result<Vec<LabeledScore>> {
        let labels = self
            .labels
            .ok_or_else(|| Error::format(path, "missing `label` column"))?;
        self.scores
            .into_iter()
            .zip(labels)
            .map(|(s, l)| Ok(LabeledScore::new(s, l)?))
            .collect()
    }
}

/// Parses a scores CSV, with or without a label column. `path` is only used
/// in error messages.
pub fn parse_scores(text: &str, path: &Path) -> Result<ScoreTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    let labeled = header.get(0) == Some("label");
    let first_prob = usize::from(labeled);
    let classes = header.len() - first_prob;
    for (j, name) in header.iter().skip(first_prob).enumerate() {
        if name != format!("p{j}") {
            return Err(Error::format(path, format!("header column {} is `{name}`, expected `p{j}`", j + first_prob)));
        }
    }
    if classes == 0 {
        return Err(Error::format(path, "no probability columns"));
    }

    let mut scores = Vec::new();
    let mut labels = labeled.then(Vec::new);
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let line = row + 2;
        if record.len() != header.len() {
            return Err(Error::format(
                path,
                format!("line {line}: {} fields, expected {}", record.len(), header.len()),
            ));
        }
        if let Some(labels) = labels.as_mut() {
            let label = record[0]
                .parse::<usize>()
                .map_err(|_| Error::format(path, format!("line {line}: bad label `{}`", &record[0])))?;
            labels.push(label);
        }
        let probs = record
            .iter()
            .skip(first_prob)
            .map(|f| f.parse::<f64>().map_err(|_| Error::format(path, format!("line {line}: bad number `{f}`"))))
            .collect::<Result<Vec<f64>>>()?;
        scores.push(ScoreVector::for_row(probs, row)?);
    }
    if scores.is_empty() {
        return Err(Error::Core(ordinal_crc_core::Error::EmptyDataset));
    }
    if let Some(labels) = &labels {
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Core(ordinal_crc_core::Error::LabelOutOfRange { label, classes }));
        }
    }
    Ok(ScoreTable { scores, labels })
}

pub fn read_scores(path: &Path) -> Result<ScoreTable> {
    parse_scores(&read_to_string(path)?, path)
}

pub fn read_labeled_scores(path: &Path) -> Result<Vec<LabeledScore>> {
    read_scores(path)?.into_labeled(path)
}

/// Where class weights come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Equal,
    /// `h(i) = i`, max-normalized, so class 0 has weight 0.
    Linear,
    /// One weight per line.
    File(PathBuf),
}

impl std::str::FromStr for WeightSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "equal" => Ok(WeightSource::Equal),
            "linear" => Ok(WeightSource::Linear),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(WeightSource::File(PathBuf::from(p))),
                _ => Err(format!("unknown weights source `{s}` (expected equal, linear or file:<path>)")),
            },
        }
    }
}

impl WeightSource {
    pub fn load(&self, classes: usize) -> Result<WeightScheme> {
        let weights = match self {
            WeightSource::Equal => WeightScheme::equal(classes),
            WeightSource::Linear => WeightScheme::linear(classes)?,
            WeightSource::File(path) => {
                let raw = read_to_string(path)?
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .enumerate()
                    .map(|(i, l)| {
                        l.parse::<f64>()
                            .map_err(|_| Error::format(path, format!("weight {i}: bad number `{l}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                WeightScheme::new(raw)?
            }
        };
        if weights.classes() != classes {
            return Err(Error::Core(ordinal_crc_core::Error::DimensionMismatch {
                expected: classes,
                found: weights.classes(),
            }));
        }
        Ok(weights)
    }
}

/// Calibration output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub lambda_hat: f64,
    pub alpha: f64,
    pub n: usize,
    pub classes: usize,
    pub method: CalibrationMethod,
    pub loss: LossSpec,
    pub empirical_sum: f64,
    /// Largest number of calibration rows whose loss jumps at one threshold.
    #[serde(rename = "M")]
    pub max_collision: usize,
    /// Largest jump of the empirical risk in λ.
    pub max_jump: f64,
}

impl CalibrationFile {
    pub fn new(result: &CalibrationResult, classes: usize, jumps: &JumpDiagnostics) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            lambda_hat: result.lambda_hat,
            alpha: result.alpha,
            n: result.n,
            classes,
            method: result.method,
            loss: result.loss.clone(),
            empirical_sum: result.empirical_sum,
            max_collision: jumps.max_collision,
            max_jump: jumps.max_empirical_jump,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file: Self = serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::format(path, e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::format(path, format!("unsupported schema_version {}", file.schema_version)));
        }
        Ok(file)
    }
}

/// Evaluation output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub loss: LossSpec,
    pub classes: usize,
    pub trials: usize,
    pub split: f64,
    pub seed: u64,
    /// Index into `reports` of the first saturated sweep point, if any.
    pub saturation_index: Option<usize>,
    pub saturated: bool,
    pub target_size: Option<f64>,
    pub reports: Vec<RiskReport>,
}

impl ReportFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// `alpha,mean_risk,risk_std_error,mean_size` per sweep point.
pub fn curve_csv(reports: &[RiskReport]) -> Vec<u8> {
    let mut out = String::from("alpha,mean_risk,risk_std_error,mean_size\n");
    for r in reports {
        out.push_str(&format!("{},{},{},{}\n", r.alpha, r.mean_risk, r.risk_std_error, r.mean_set_size));
    }
    out.into_bytes()
}

/// `alpha,centroid,count` per sweep point and centroid bucket.
pub fn centroid_csv(reports: &[RiskReport]) -> Vec<u8> {
    let mut out = String::from("alpha,centroid,count\n");
    for r in reports {
        for (c, n) in r.centroid_histogram.buckets() {
            out.push_str(&format!("{},{},{}\n", r.alpha, c, n));
        }
    }
    out.into_bytes()
}

/// One predicted set per input row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub set: PredictionSet,
    pub point_prediction: usize,
}

/// `lower,upper,width,centroid,point_prediction`.
pub fn predictions_csv(rows: &[PredictionRow]) -> Vec<u8> {
    let mut out = String::from("lower,upper,width,centroid,point_prediction\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.set.lower(),
            r.set.upper(),
            r.set.width(),
            r.set.centroid(),
            r.point_prediction
        ));
    }
    out.into_bytes()
}
