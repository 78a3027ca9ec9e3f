//! Task metrics: emotion macro F1, per-instance token F1 for binary trigger
//! masks, accumulated importance for numeric trigger scores, and confusion
//! matrices.
//!
//! Edge-case conventions (each listed in the JSON report):
//!
//! * token F1 of an instance where neither gold nor prediction has a trigger
//!   is 1.0; if exactly one side has none it is 0.0;
//! * classes with no gold and no predicted instance are left out of the macro
//!   average;
//! * instances without a gold trigger are left out of the accumulated
//!   importance average and counted as skipped;
//! * attribution vectors with no positive mass normalize to uniform weights.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, EmotionLabel};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {gold} gold values but {pred} predicted values")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("cannot score an empty input")]
    Empty,
    #[error("attribution values must be finite")]
    NonFinite,
    #[error("no prediction for sentence {0}")]
    MissingPrediction(String),
    #[error("sentence {id}: {message}")]
    Mismatch { id: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed prediction at line {line}: {message}")]
    MalformedPrediction { line: usize, message: String },
}

fn check_lengths(gold: usize, pred: usize) -> Result<(), MetricsError> {
    if gold != pred {
        return Err(MetricsError::LengthMismatch { gold, pred });
    }
    Ok(())
}

/// Precision, recall and F1 of one emotion class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold instances of the class.
    pub support: usize,
    pub predicted: usize,
}

fn class_counts(gold: &[EmotionLabel], pred: &[EmotionLabel]) -> [(usize, usize, usize); EmotionLabel::COUNT] {
    let mut counts = [(0usize, 0usize, 0usize); EmotionLabel::COUNT];
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            counts[g.index()].0 += 1;
        } else {
            counts[p.index()].1 += 1;
            counts[g.index()].2 += 1;
        }
    }
    counts
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn per_class_scores(
    gold: &[EmotionLabel],
    pred: &[EmotionLabel],
) -> Result<BTreeMap<EmotionLabel, ClassScores>, MetricsError> {
    check_lengths(gold.len(), pred.len())?;
    Ok(EmotionLabel::ALL
        .iter()
        .zip(class_counts(gold, pred))
        .map(|(&label, (tp, fp, fn_))| {
            let scores = ClassScores {
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
                support: tp + fn_,
                predicted: tp + fp,
            };
            (label, scores)
        })
        .collect())
}

/// Unweighted mean of per-class F1 over the classes that occur in the gold
/// labels or the predictions.
pub fn macro_f1(gold: &[EmotionLabel], pred: &[EmotionLabel]) -> Result<f64, MetricsError> {
    check_lengths(gold.len(), pred.len())?;
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (sum, classes) = class_counts(gold, pred)
        .into_iter()
        .filter(|&(tp, fp, fn_)| tp + fp + fn_ > 0)
        .fold((0.0, 0usize), |(sum, n), (tp, fp, fn_)| {
            (sum + ratio(2 * tp, 2 * tp + fp + fn_), n + 1)
        });
    Ok(sum / classes as f64)
}

/// Token-level F1 of one instance, `2TP / (2TP + FP + FN)`.
pub fn instance_token_f1(gold: &[bool], pred: &[bool]) -> Result<f64, MetricsError> {
    check_lengths(gold.len(), pred.len())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&g, &p) in gold.iter().zip(pred) {
        match (g, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(1.0);
    }
    Ok(ratio(2 * tp, 2 * tp + fp + fn_))
}

/// Mean of [`instance_token_f1`] over all instances.
pub fn corpus_token_f1<'a, I>(instances: I) -> Result<f64, MetricsError>
where
    I: IntoIterator<Item = (&'a [bool], &'a [bool])>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for (gold, pred) in instances {
        sum += instance_token_f1(gold, pred)?;
        n += 1;
    }
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(sum / n as f64)
}

/// Per-word importance values: non-negative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Attributions(Vec<f64>);

impl Attributions {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Wraps values that are already a probability vector, such as softmax
    /// output. Callers are responsible for the invariant.
    pub(crate) fn from_distribution(values: Vec<f64>) -> Self {
        Attributions(values)
    }
}

/// Clamps negatives to zero and rescales to unit sum. Vectors without any
/// positive mass become uniform.
pub fn normalize_attributions(raw: &[f64]) -> Result<Attributions, MetricsError> {
    if raw.is_empty() {
        return Err(MetricsError::Empty);
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let clamped: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total > 0.0 {
        Ok(Attributions(clamped.into_iter().map(|v| v / total).collect()))
    } else {
        let uniform = 1.0 / raw.len() as f64;
        Ok(Attributions(vec![uniform; raw.len()]))
    }
}

/// Attribution mass that lands on gold trigger positions.
pub fn accumulated_importance(gold: &[bool], attributions: &Attributions) -> Result<f64, MetricsError> {
    check_lengths(gold.len(), attributions.len())?;
    Ok(gold
        .iter()
        .zip(attributions.values())
        .filter(|(&g, _)| g)
        .map(|(_, &a)| a)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImportanceSummary {
    /// Mean over instances with at least one gold trigger; `None` when there
    /// are no such instances.
    pub mean: Option<f64>,
    pub scored: usize,
    pub skipped_no_trigger: usize,
}

pub fn corpus_accumulated_importance<'a, I>(instances: I) -> Result<ImportanceSummary, MetricsError>
where
    I: IntoIterator<Item = (&'a [bool], &'a Attributions)>,
{
    let mut sum = 0.0;
    let mut scored = 0;
    let mut skipped = 0;
    for (gold, attributions) in instances {
        check_lengths(gold.len(), attributions.len())?;
        if gold.iter().any(|&g| g) {
            sum += accumulated_importance(gold, attributions)?;
            scored += 1;
        } else {
            skipped += 1;
        }
    }
    Ok(ImportanceSummary {
        mean: (scored > 0).then(|| sum / scored as f64),
        scored,
        skipped_no_trigger: skipped,
    })
}

/// Counts indexed `[gold][predicted]` in [`EmotionLabel::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[usize; EmotionLabel::COUNT]; EmotionLabel::COUNT],
}

impl ConfusionMatrix {
    pub fn from_labels(gold: &[EmotionLabel], pred: &[EmotionLabel]) -> Result<Self, MetricsError> {
        check_lengths(gold.len(), pred.len())?;
        let mut matrix = ConfusionMatrix::default();
        for (&g, &p) in gold.iter().zip(pred) {
            matrix.counts[g.index()][p.index()] += 1;
        }
        Ok(matrix)
    }

    pub fn from_counts(counts: [[usize; EmotionLabel::COUNT]; EmotionLabel::COUNT]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn get(&self, gold: EmotionLabel, pred: EmotionLabel) -> usize {
        self.counts[gold.index()][pred.index()]
    }

    pub fn counts(&self) -> &[[usize; EmotionLabel::COUNT]; EmotionLabel::COUNT] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Each row divided by its sum; empty rows stay zero.
    pub fn row_normalized(&self) -> [[f64; EmotionLabel::COUNT]; EmotionLabel::COUNT] {
        let mut out = [[0.0; EmotionLabel::COUNT]; EmotionLabel::COUNT];
        for (row, counts) in out.iter_mut().zip(&self.counts) {
            let total: usize = counts.iter().sum();
            if total > 0 {
                for (cell, &c) in row.iter_mut().zip(counts) {
                    *cell = c as f64 / total as f64;
                }
            }
        }
        out
    }

    /// CSV with a header row of predicted labels and one row per gold label.
    pub fn to_csv(&self, normalized: bool) -> String {
        let mut out = String::from("gold\\pred");
        for label in EmotionLabel::ALL {
            out.push(',');
            out.push_str(label.as_str());
        }
        out.push('\n');
        let rows = self.row_normalized();
        for label in EmotionLabel::ALL {
            out.push_str(label.as_str());
            for (share, count) in rows[label.index()].iter().zip(&self.counts[label.index()]) {
                out.push(',');
                if normalized {
                    out.push_str(&format!("{share:.4}"));
                } else {
                    out.push_str(&count.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One line of a predictions file.
///
/// `mask` holds binary trigger predictions (0/1) and `scores` raw per-word
/// numeric trigger values; both are aligned with the gold tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<EmotionLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "mask01")]
    pub mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

mod mask01 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(mask: &Option<Vec<bool>>, serializer: S) -> Result<S::Ok, S::Error> {
        mask.as_ref()
            .map(|m| m.iter().map(|&b| u8::from(b)).collect::<Vec<u8>>())
            .serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<Vec<bool>>, D::Error> {
        let raw = Option::<Vec<u8>>::deserialize(deserializer)?;
        raw.map(|values| {
            values
                .into_iter()
                .map(|v| match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(serde::de::Error::custom(format!("mask value {other} is not 0 or 1"))),
                })
                .collect()
        })
        .transpose()
    }
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<(), MetricsError> {
    let io = |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut writer = BufWriter::new(File::create(path).map_err(io)?);
    for p in predictions {
        serde_json::to_writer(&mut writer, p).map_err(|e| io(e.into()))?;
        writer.write_all(b"\n").map_err(io)?;
    }
    writer.flush().map_err(io)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, MetricsError> {
    let io = |source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| MetricsError::MalformedPrediction {
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Full evaluation output, serialized as the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub macro_f1: Option<f64>,
    pub token_f1: Option<f64>,
    pub accumulated_importance: Option<f64>,
    pub per_class: BTreeMap<String, ClassScores>,
    pub confusion: Option<[[usize; EmotionLabel::COUNT]; EmotionLabel::COUNT]>,
    pub skipped_no_trigger: usize,
    pub emotion_instances: usize,
    pub trigger_instances: usize,
    pub importance_instances: usize,
    pub conventions: Vec<&'static str>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, String>,
}

pub const CONVENTIONS: [&str; 4] = [
    "token_f1: no gold and no predicted trigger scores 1.0; exactly one empty side scores 0.0",
    "macro_f1: classes absent from both gold and predictions are excluded from the mean",
    "accumulated_importance: instances without gold triggers are excluded and counted in skipped_no_trigger",
    "attributions: negative values are clamped to 0; vectors without positive mass become uniform",
];

/// Scores `predictions` against the gold annotations in `gold`.
///
/// Every gold sentence needs a prediction with the same id. Each metric is
/// computed over the sentences where both the gold annotation and the
/// corresponding prediction field are present.
pub fn evaluate(gold: &Corpus, predictions: &[Prediction]) -> Result<MetricsReport, MetricsError> {
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();

    let mut gold_labels = Vec::new();
    let mut pred_labels = Vec::new();
    let mut masks: Vec<(&[bool], &[bool])> = Vec::new();
    let mut attributions: Vec<(&[bool], Attributions)> = Vec::new();

    for sentence in gold {
        let p = by_id
            .get(sentence.id.as_str())
            .ok_or_else(|| MetricsError::MissingPrediction(sentence.id.clone()))?;
        let mismatch = |what: &str, len: usize| MetricsError::Mismatch {
            id: sentence.id.clone(),
            message: format!("{what} has {len} values for {} tokens", sentence.len()),
        };
        if let (Some(g), Some(e)) = (sentence.emotion, p.emotion) {
            gold_labels.push(g);
            pred_labels.push(e);
        }
        if let Some(gold_mask) = &sentence.trigger_mask {
            if let Some(pred_mask) = &p.mask {
                if pred_mask.len() != gold_mask.len() {
                    return Err(mismatch("predicted mask", pred_mask.len()));
                }
                masks.push((gold_mask, pred_mask));
            }
            if let Some(scores) = &p.scores {
                if scores.len() != gold_mask.len() {
                    return Err(mismatch("score vector", scores.len()));
                }
                attributions.push((gold_mask, normalize_attributions(scores)?));
            }
        }
    }

    let (macro_score, per_class, confusion) = if gold_labels.is_empty() {
        (None, BTreeMap::new(), None)
    } else {
        let per_class = per_class_scores(&gold_labels, &pred_labels)?
            .into_iter()
            .map(|(label, scores)| (label.to_string(), scores))
            .collect();
        let confusion = ConfusionMatrix::from_labels(&gold_labels, &pred_labels)?;
        (
            Some(macro_f1(&gold_labels, &pred_labels)?),
            per_class,
            Some(*confusion.counts()),
        )
    };
    let token_f1 = if masks.is_empty() {
        None
    } else {
        Some(corpus_token_f1(masks.iter().copied())?)
    };
    let importance = corpus_accumulated_importance(attributions.iter().map(|(g, a)| (*g, a)))?;

    Ok(MetricsReport {
        macro_f1: macro_score,
        token_f1,
        accumulated_importance: importance.mean,
        per_class,
        confusion,
        skipped_no_trigger: importance.skipped_no_trigger,
        emotion_instances: gold_labels.len(),
        trigger_instances: masks.len(),
        importance_instances: importance.scored,
        conventions: CONVENTIONS.to_vec(),
        provenance: BTreeMap::new(),
    })
}
