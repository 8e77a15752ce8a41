//! Confusion-matrix evaluation and the incremental test scenarios.
//!
//! The scenario runner scores growing prefixes of an ordered test set
//! (step, 2*step, ... up to the full size) and reports each prefix accuracy
//! plus their unweighted mean. The mean over scenarios is what the headline
//! figure uses; the pooled full-set accuracy is reported alongside since the
//! two differ in general.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::svm::{predict, LabeledSample, SvmError, SvmModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("prediction and truth lists differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot evaluate an empty sample list")]
    EmptyInput,
    #[error("scenario step must be >= 1")]
    BadStep,
    #[error("label '{0}' is not fertile or infertile")]
    UnknownLabel(String),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// Class label. `Unknown` appears only in unlabeled prediction inputs;
/// evaluation requires the two real classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fertile,
    Infertile,
    Unknown,
}

impl Label {
    /// The SVM convention: fertile is +1, infertile is -1.
    pub fn from_sign(y: f64) -> Label {
        if y > 0.0 {
            Label::Fertile
        } else {
            Label::Infertile
        }
    }

    pub fn sign(self) -> Option<f64> {
        match self {
            Label::Fertile => Some(1.0),
            Label::Infertile => Some(-1.0),
            Label::Unknown => None,
        }
    }
}

impl FromStr for Label {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fertile" => Ok(Label::Fertile),
            "infertile" => Ok(Label::Infertile),
            "unknown" => Ok(Label::Unknown),
            other => Err(EvalError::UnknownLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Fertile => "fertile",
            Label::Infertile => "infertile",
            Label::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Four-way tally of predictions against truths relative to a positive
/// class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }
}

/// Tallies a confusion matrix. Both lists must be non-empty, equal length,
/// and free of `Unknown`.
pub fn confusion(
    predictions: &[Label],
    truths: &[Label],
    positive: Label,
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix {
        tp: 0,
        tn: 0,
        fp: 0,
        fn_: 0,
    };
    for (&pred, &truth) in predictions.iter().zip(truths) {
        if pred == Label::Unknown || truth == Label::Unknown || positive == Label::Unknown {
            return Err(EvalError::UnknownLabel("unknown".into()));
        }
        match (pred == positive, truth == positive) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Accuracy in percent: `100 * (tp + tn) / total`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }
    Ok(100.0 * cm.correct() as f64 / total as f64)
}

/// Rounds a percentage half-up at two decimals.
pub fn round_percent(v: f64) -> f64 {
    (v * 100.0 + 0.5).floor() / 100.0
}

/// Two-decimal display of a percentage, round-half-up.
pub fn format_percent(v: f64) -> String {
    format!("{:.2}", round_percent(v))
}

/// Unweighted arithmetic mean of per-scenario accuracies.
pub fn scenario_mean(accuracies: &[f64]) -> f64 {
    if accuracies.is_empty() {
        return 0.0;
    }
    accuracies.iter().sum::<f64>() / accuracies.len() as f64
}

/// One evaluated prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub n: usize,
    pub correct: u64,
    pub accuracy: f64,
}

/// Report over all prefixes of the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenarios: Vec<ScenarioRow>,
    pub scenario_mean: f64,
    pub pooled: f64,
    pub confusion: ConfusionMatrix,
}

impl ScenarioReport {
    /// Human-readable table mirroring the report JSON.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str("      n  correct  accuracy\n");
        for row in &self.scenarios {
            out.push_str(&format!(
                "{:>7}  {:>7}  {:>7}%\n",
                row.n,
                row.correct,
                format_percent(row.accuracy)
            ));
        }
        out.push_str(&format!(
            "scenario_mean {}%  pooled {}%\n",
            format_percent(self.scenario_mean),
            format_percent(self.pooled)
        ));
        out.push_str(&format!(
            "confusion tp={} tn={} fp={} fn={}\n",
            self.confusion.tp, self.confusion.tn, self.confusion.fp, self.confusion.fn_
        ));
        out
    }
}

/// Evaluates the model on growing prefixes of `test`: sizes step, 2*step,
/// ... and finally the full set when it is not a step multiple. Fertile is
/// the positive class.
pub fn run_scenarios(
    model: &SvmModel,
    test: &[LabeledSample],
    step: usize,
) -> Result<ScenarioReport, EvalError> {
    if step == 0 {
        return Err(EvalError::BadStep);
    }
    if test.is_empty() {
        return Err(EvalError::EmptyInput);
    }

    let mut predictions = Vec::with_capacity(test.len());
    let mut truths = Vec::with_capacity(test.len());
    for s in test {
        predictions.push(Label::from_sign(predict(model, &s.x)?));
        truths.push(Label::from_sign(s.y));
    }

    let mut sizes: Vec<usize> = (1..)
        .map(|k| k * step)
        .take_while(|&n| n <= test.len())
        .collect();
    if sizes.last().copied() != Some(test.len()) {
        sizes.push(test.len());
    }

    let mut scenarios = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let cm = confusion(&predictions[..n], &truths[..n], Label::Fertile)?;
        scenarios.push(ScenarioRow {
            n,
            correct: cm.correct(),
            accuracy: accuracy(&cm)?,
        });
    }

    let full = confusion(&predictions, &truths, Label::Fertile)?;
    let accs: Vec<f64> = scenarios.iter().map(|r| r.accuracy).collect();
    Ok(ScenarioReport {
        scenario_mean: scenario_mean(&accs),
        pooled: accuracy(&full)?,
        scenarios,
        confusion: full,
    })
}
