//! Binary DR metrics from five-grade labels.
//!
//! Grade 0 is negative ("no DR"); grades 1-4 are positive ("DR").
//!
//! **Cell convention.** The two off-diagonal cells carry swapped names
//! relative to the usual definition:
//!
//! | actual \ predicted | negative | positive |
//! |--------------------|----------|----------|
//! | negative           | `tn`     | `fn_`    |
//! | positive           | `fp`     | `tp`     |
//!
//! so `fn_` counts actual-negative/predicted-positive records and `fp`
//! counts actual-positive/predicted-negative records. Sensitivity
//! `tp / (tp + fn_)` and specificity `tn / (tn + fp)` are computed on these
//! cells. [`ConfusionMatrix::conventional`] returns the matrix with the
//! usual names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{parse_label, NUM_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Negative,
    Positive,
}

/// Maps a DR grade to the binary outcome.
pub fn binarize(label: u8) -> Result<Outcome> {
    match label {
        0 => Ok(Outcome::Negative),
        1..=4 => Ok(Outcome::Positive),
        other => Err(Error::LabelOutOfRange(other as i64)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
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

    /// Adds one record under the table convention described in the module
    /// docs.
    pub fn record(&mut self, actual: Outcome, predicted: Outcome) {
        match (actual, predicted) {
            (Outcome::Negative, Outcome::Negative) => self.tn += 1,
            (Outcome::Negative, Outcome::Positive) => self.fn_ += 1,
            (Outcome::Positive, Outcome::Negative) => self.fp += 1,
            (Outcome::Positive, Outcome::Positive) => self.tp += 1,
        }
    }

    /// The same counts under the usual naming (false positive = actual
    /// negative predicted positive).
    pub fn conventional(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp,
            tn: self.tn,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

/// Rows are actual grades, columns predicted grades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MulticlassMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl MulticlassMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Collapses grades to the binary matrix.
    pub fn binarized(&self) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for (a, row) in self.counts.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                let actual = if a == 0 {
                    Outcome::Negative
                } else {
                    Outcome::Positive
                };
                let predicted = if p == 0 {
                    Outcome::Negative
                } else {
                    Outcome::Positive
                };
                let mut one = ConfusionMatrix::default();
                one.record(actual, predicted);
                cm.tp += one.tp * n;
                cm.tn += one.tn * n;
                cm.fp += one.fp * n;
                cm.fn_ += one.fn_ * n;
            }
        }
        cm
    }
}

pub fn confusion(actual: &[u8], predicted: &[u8]) -> Result<(ConfusionMatrix, MulticlassMatrix)> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    let mut mc = MulticlassMatrix::default();
    for (&a, &p) in actual.iter().zip(predicted) {
        cm.record(binarize(a)?, binarize(p)?);
        mc.counts[a as usize][p as usize] += 1;
    }
    Ok((cm, mc))
}

/// Accuracy, sensitivity and specificity. A ratio whose denominator is zero
/// is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<BinaryMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no records".into()));
    }
    Ok(BinaryMetrics {
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_),
        specificity: ratio(cm.tn, cm.tn + cm.fp),
    })
}

/// Percentage with two decimals, or `undefined`.
pub fn percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.2}%", v * 100.0),
        None => "undefined".into(),
    }
}

impl BinaryMetrics {
    /// `accuracy sensitivity specificity` as percentages.
    pub fn summary_row(&self) -> String {
        format!(
            "{} {} {}",
            percent(Some(self.accuracy)),
            percent(self.sensitivity),
            percent(self.specificity)
        )
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub id: String,
    pub actual: u8,
    pub predicted: u8,
}

/// Reads a predictions CSV with columns `id,actual,predicted`.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                path: path.into(),
                row: 1,
                reason: format!("missing column {name:?}"),
            })
    };
    let (id_col, actual_col, pred_col) = (col("id")?, col("actual")?, col("predicted")?);
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: usize| row.get(i).unwrap_or("");
        let parse = |i: usize| {
            parse_label(get(i)).map_err(|e| Error::Parse {
                path: path.into(),
                row: line,
                reason: e.to_string(),
            })
        };
        out.push(Prediction {
            id: get(id_col).to_string(),
            actual: parse(actual_col)?,
            predicted: parse(pred_col)?,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty(format!(
            "{} has no predictions",
            path.display()
        )));
    }
    Ok(out)
}

/// Confusion matrices and metrics for a set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub convention: String,
    pub confusion: ConfusionMatrix,
    pub conventional_confusion: ConfusionMatrix,
    pub multiclass: MulticlassMatrix,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy_pct: String,
    pub sensitivity_pct: String,
    pub specificity_pct: String,
}

pub fn evaluate(predictions: &[Prediction]) -> Result<MetricsReport> {
    let actual: Vec<u8> = predictions.iter().map(|p| p.actual).collect();
    let predicted: Vec<u8> = predictions.iter().map(|p| p.predicted).collect();
    let (cm, mc) = confusion(&actual, &predicted)?;
    let m = metrics(&cm)?;
    Ok(MetricsReport {
        convention:
            "fn = actual negative predicted positive; fp = actual positive predicted negative"
                .into(),
        confusion: cm,
        conventional_confusion: cm.conventional(),
        multiclass: mc,
        accuracy: m.accuracy,
        sensitivity: m.sensitivity,
        specificity: m.specificity,
        accuracy_pct: format!("{:.2}", m.accuracy * 100.0),
        sensitivity_pct: m
            .sensitivity
            .map(|v| format!("{:.2}", v * 100.0))
            .unwrap_or("undefined".into()),
        specificity_pct: m
            .specificity
            .map(|v| format!("{:.2}", v * 100.0))
            .unwrap_or("undefined".into()),
    })
}

impl MetricsReport {
    pub fn binary_metrics(&self) -> BinaryMetrics {
        BinaryMetrics {
            accuracy: self.accuracy,
            sensitivity: self.sensitivity,
            specificity: self.specificity,
        }
    }

    /// `metric,value,percent` lines.
    pub fn to_csv(&self) -> String {
        let full = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or("undefined".into());
        format!(
            "metric,value,percent\naccuracy,{},{}\nsensitivity,{},{}\nspecificity,{},{}\n",
            self.accuracy,
            self.accuracy_pct,
            full(self.sensitivity),
            self.sensitivity_pct,
            full(self.specificity),
            self.specificity_pct
        )
    }
}
