//! Stage composition: manifests, preprocessing, the feature CSV format,
//! train/test splitting, and the end-to-end run.
//!
//! File formats owned here:
//! - dataset manifest: JSON array of `{ "path": ..., "label": ... }`,
//!   relative paths resolved against the manifest's directory;
//! - feature table: CSV with header
//!   `id,mean,entropy,variance,skewness,kurtosis,label`, floats printed
//!   with at least six significant digits and exact round-trip;
//! - model and report files: JSON via the owning modules.
//!
//! Batch extraction skips unreadable or degenerate images, reporting them
//! alongside the successful rows so a hundred-image run survives one bad
//! file.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enhancement::{ClaheConfig, EnhanceError, EnhanceMode};
use crate::eval::{run_scenarios, EvalError, Label, ScenarioReport};
use crate::features::{extract_features, FeatureError, FeatureVector, FEATURE_ORDER};
use crate::raster::{decode_netpbm, to_grayscale, GrayImage, NetpbmError, NetpbmImage};
use crate::segmentation::{segment_crop, segment_crop_gray, SegmentError};
use crate::svm::{predict, train_smo, LabeledSample, Standardizer, SvmError, SvmModel, TrainConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        source: NetpbmError,
    },
    #[error("{path}: {source}")]
    Segment {
        path: PathBuf,
        source: SegmentError,
    },
    #[error("{path}: {source}")]
    Enhance {
        path: PathBuf,
        source: EnhanceError,
    },
    #[error("{path}: constant image, features are undefined")]
    Degenerate { path: PathBuf },
    #[error("manifest entry does not exist: {0}")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("feature table is missing column '{0}'")]
    MissingColumn(String),
    #[error("bad label '{0}'")]
    BadLabel(String),
    #[error("column '{column}' holds non-numeric value '{value}'")]
    BadFloat { column: String, value: String },
    #[error("cannot split: class '{0}' has no entries")]
    ClassMissing(Label),
    #[error("train fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// True for filesystem-level failures (as opposed to content
    /// validation).
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            PipelineError::Io { .. } | PipelineError::MissingFile(_)
        )
    }
}

/// One dataset image and its ground-truth label (or `unknown`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
}

/// Ordered list of dataset images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Loads a manifest, resolving relative entry paths against the
    /// manifest's directory and checking that every file exists.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: Vec<ManifestEntry> = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut entries = Vec::with_capacity(raw.len());
        for mut entry in raw {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
            if !entry.path.exists() {
                return Err(PipelineError::MissingFile(entry.path));
            }
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let json = serde_json::to_string_pretty(&self.entries)?;
        fs::write(path, json + "\n").map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Knobs for the full run; component defaults follow the owning modules.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub threshold: u8,
    pub clahe: ClaheConfig,
    pub enhance_mode: EnhanceMode,
    pub svm: TrainConfig,
    pub train_fraction: f64,
    pub standardize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: crate::segmentation::DEFAULT_THRESHOLD,
            clahe: ClaheConfig::default(),
            enhance_mode: EnhanceMode::ClaheHe,
            svm: TrainConfig::default(),
            train_fraction: 0.5,
            standardize: false,
        }
    }
}

/// Decode, segment-crop, grayscale, enhance. RGB inputs go through the full
/// path; already-gray inputs skip the conversion.
pub fn preprocess_one(path: &Path, cfg: &PipelineConfig) -> Result<GrayImage, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = decode_netpbm(&bytes).map_err(|source| PipelineError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let gray = match decoded {
        NetpbmImage::Rgb(rgb) => {
            let cropped = segment_crop(&rgb, cfg.threshold).map_err(|source| {
                PipelineError::Segment {
                    path: path.to_path_buf(),
                    source,
                }
            })?;
            to_grayscale(&cropped)
        }
        NetpbmImage::Gray(gray) => {
            segment_crop_gray(&gray, cfg.threshold).map_err(|source| PipelineError::Segment {
                path: path.to_path_buf(),
                source,
            })?
        }
    };
    cfg.enhance_mode
        .apply(&gray, &cfg.clahe)
        .map_err(|source| PipelineError::Enhance {
            path: path.to_path_buf(),
            source,
        })
}

/// One feature-table row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub features: FeatureVector,
    pub label: Label,
}

/// Preprocesses and extracts features for one image.
pub fn extract_one(path: &Path, cfg: &PipelineConfig) -> Result<FeatureVector, PipelineError> {
    let gray = preprocess_one(path, cfg)?;
    extract_features(&gray).map_err(|FeatureError::DegenerateHistogram| PipelineError::Degenerate {
        path: path.to_path_buf(),
    })
}

/// Extracts features for every manifest entry in order. Failed entries are
/// collected, not fatal.
pub fn extract_all(
    manifest: &DatasetManifest,
    cfg: &PipelineConfig,
) -> (Vec<FeatureRow>, Vec<(PathBuf, PipelineError)>) {
    let mut rows = Vec::with_capacity(manifest.entries.len());
    let mut failures = Vec::new();
    for entry in &manifest.entries {
        match extract_one(&entry.path, cfg) {
            Ok(features) => rows.push(FeatureRow {
                id: entry.path.to_string_lossy().into_owned(),
                features,
                label: entry.label,
            }),
            Err(err) => failures.push((entry.path.clone(), err)),
        }
    }
    (rows, failures)
}

/// Prints a float with full round-trip precision, padded to at least six
/// significant digits.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0.000000".to_string();
    }
    let mut s = format!("{v}");
    if sig_digits(&s) >= 6 {
        return s;
    }
    if !s.contains('.') {
        s.push('.');
    }
    while sig_digits(&s) < 6 {
        s.push('0');
    }
    s
}

fn sig_digits(s: &str) -> usize {
    let mut seen_nonzero = false;
    let mut count = 0;
    for c in s.chars() {
        if c.is_ascii_digit() {
            if c != '0' {
                seen_nonzero = true;
            }
            if seen_nonzero {
                count += 1;
            }
        }
    }
    count
}

/// Feature CSV header, fixed order.
pub const CSV_HEADER: [&str; 7] = [
    "id",
    "mean",
    "entropy",
    "variance",
    "skewness",
    "kurtosis",
    "label",
];

/// Serializes rows to the feature CSV format. With `predictions` present, a
/// `predicted` column is appended.
pub fn features_to_csv(
    rows: &[FeatureRow],
    predictions: Option<&[Label]>,
) -> Result<String, PipelineError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if predictions.is_some() {
        header.push("predicted");
    }
    writer.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let f = row.features;
        let mut record = vec![
            row.id.clone(),
            fmt_float(f.mean),
            fmt_float(f.entropy),
            fmt_float(f.variance),
            fmt_float(f.skewness),
            fmt_float(f.kurtosis),
            row.label.to_string(),
        ];
        if let Some(preds) = predictions {
            record.push(preds[i].to_string());
        }
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().expect("vec writer cannot fail");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_features_csv(
    path: &Path,
    rows: &[FeatureRow],
    predictions: Option<&[Label]>,
) -> Result<(), PipelineError> {
    let text = features_to_csv(rows, predictions)?;
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a feature CSV. Columns are located by name; extra columns are
/// ignored.
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_features_csv(&text)
}

pub fn parse_features_csv(text: &str) -> Result<Vec<FeatureRow>, PipelineError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, PipelineError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PipelineError::MissingColumn(name.to_string()))
    };
    let id_col = col("id")?;
    let feature_cols: Vec<usize> = FEATURE_ORDER
        .iter()
        .map(|name| col(name))
        .collect::<Result<_, _>>()?;
    let label_col = col("label")?;

    let parse_float = |record: &csv::StringRecord, idx: usize, name: &str| {
        let value = &record[idx];
        value
            .parse::<f64>()
            .map_err(|_| PipelineError::BadFloat {
                column: name.to_string(),
                value: value.to_string(),
            })
    };

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let values: Vec<f64> = feature_cols
            .iter()
            .zip(FEATURE_ORDER)
            .map(|(&idx, name)| parse_float(&record, idx, name))
            .collect::<Result<_, _>>()?;
        let label: Label = record[label_col]
            .parse()
            .map_err(|_| PipelineError::BadLabel(record[label_col].to_string()))?;
        rows.push(FeatureRow {
            id: record[id_col].to_string(),
            features: FeatureVector {
                mean: values[0],
                entropy: values[1],
                variance: values[2],
                skewness: values[3],
                kurtosis: values[4],
            },
            label,
        });
    }
    Ok(rows)
}

/// Stratified, seeded train/test split. Each class is shuffled and divided
/// by `train_fraction`; fractional remainders go to whichever side is
/// currently smaller (train on ties), so a 50+50 manifest at fraction 0.5
/// yields exactly 25+25 per side.
pub fn split(
    manifest: &DatasetManifest,
    seed: u64,
    train_fraction: f64,
) -> Result<(DatasetManifest, DatasetManifest), PipelineError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PipelineError::BadFraction(train_fraction));
    }
    let mut fertile: Vec<ManifestEntry> = Vec::new();
    let mut infertile: Vec<ManifestEntry> = Vec::new();
    for entry in &manifest.entries {
        match entry.label {
            Label::Fertile => fertile.push(entry.clone()),
            Label::Infertile => infertile.push(entry.clone()),
            Label::Unknown => return Err(PipelineError::BadLabel("unknown".into())),
        }
    }
    if fertile.is_empty() {
        return Err(PipelineError::ClassMissing(Label::Fertile));
    }
    if infertile.is_empty() {
        return Err(PipelineError::ClassMissing(Label::Infertile));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut train_total = 0usize;
    let mut test_total = 0usize;
    for mut class_entries in [fertile, infertile] {
        class_entries.shuffle(&mut rng);
        let exact = class_entries.len() as f64 * train_fraction;
        let base = exact.floor() as usize;
        let take = if exact > base as f64 && train_total <= test_total {
            base + 1
        } else {
            base
        };
        let rest = class_entries.split_off(take);
        train_total += class_entries.len();
        test_total += rest.len();
        train.extend(class_entries);
        test.extend(rest);
    }
    Ok((
        DatasetManifest { entries: train },
        DatasetManifest { entries: test },
    ))
}

/// Feature rows to labeled SVM samples; every label must be a real class.
pub fn rows_to_samples(rows: &[FeatureRow]) -> Result<Vec<LabeledSample>, PipelineError> {
    rows.iter()
        .map(|row| {
            let y = row
                .label
                .sign()
                .ok_or_else(|| PipelineError::BadLabel("unknown".into()))?;
            LabeledSample::new(row.features.to_array().to_vec(), y).map_err(PipelineError::from)
        })
        .collect()
}

/// Trains the classifier on feature rows, optionally standardizing first.
pub fn train_features(
    rows: &[FeatureRow],
    cfg: &PipelineConfig,
) -> Result<SvmModel, PipelineError> {
    let mut samples = rows_to_samples(rows)?;
    let standardizer = cfg.standardize.then(|| {
        let st = Standardizer::fit(&samples);
        for s in samples.iter_mut() {
            s.x = st.transform(&s.x);
        }
        st
    });
    let mut model = train_smo(&samples, &cfg.svm)?;
    model.feature_order = FEATURE_ORDER.iter().map(|s| s.to_string()).collect();
    if let Some(st) = standardizer {
        model.standardize = true;
        model.means = Some(st.means);
        model.scales = Some(st.scales);
    }
    Ok(model)
}

/// Classifies each row with the trained model.
pub fn predict_rows(model: &SvmModel, rows: &[FeatureRow]) -> Result<Vec<Label>, PipelineError> {
    rows.iter()
        .map(|row| {
            predict(model, &row.features.to_array())
                .map(Label::from_sign)
                .map_err(PipelineError::from)
        })
        .collect()
}

/// Scenario evaluation over labeled feature rows.
pub fn eval_rows(
    model: &SvmModel,
    rows: &[FeatureRow],
    step: usize,
) -> Result<ScenarioReport, PipelineError> {
    let samples = rows_to_samples(rows)?;
    run_scenarios(model, &samples, step).map_err(PipelineError::from)
}

pub fn save_model(model: &SvmModel, path: &Path) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(model)?;
    fs::write(path, json + "\n").map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<SvmModel, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_report(report: &ScenarioReport, path: &Path) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(report)?;
    fs::write(path, json + "\n").map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Everything the all-in-one run produced.
pub struct PipelineSummary {
    pub train_manifest: DatasetManifest,
    pub test_manifest: DatasetManifest,
    pub train_rows: Vec<FeatureRow>,
    pub test_rows: Vec<FeatureRow>,
    pub failures: Vec<(PathBuf, PipelineError)>,
    pub model: SvmModel,
    /// Evaluation of the training rows themselves (single scenario).
    pub resubstitution: ScenarioReport,
    /// Scenario evaluation of the held-out rows.
    pub report: ScenarioReport,
    pub predictions: Vec<Label>,
}

/// Split, extract, train, and evaluate in one pass.
pub fn run_pipeline(
    manifest: &DatasetManifest,
    cfg: &PipelineConfig,
    step: usize,
) -> Result<PipelineSummary, PipelineError> {
    let (train_manifest, test_manifest) = split(manifest, cfg.svm.seed, cfg.train_fraction)?;
    let (train_rows, mut failures) = extract_all(&train_manifest, cfg);
    let (test_rows, test_failures) = extract_all(&test_manifest, cfg);
    failures.extend(test_failures);

    let model = train_features(&train_rows, cfg)?;
    let resubstitution = eval_rows(&model, &train_rows, train_rows.len().max(1))?;
    let report = eval_rows(&model, &test_rows, step)?;
    let predictions = predict_rows(&model, &test_rows)?;
    Ok(PipelineSummary {
        train_manifest,
        test_manifest,
        train_rows,
        test_rows,
        failures,
        model,
        resubstitution,
        report,
        predictions,
    })
}
