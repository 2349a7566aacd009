use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, LabeledSample, Label};
use crate::hatemodel::Scorer;

/// Column mapping for a labeled CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetFormat {
    pub text_column: String,
    pub class_column: String,
    pub confidence_column: String,
    /// Accepted class strings (matched trimmed, case-insensitively).
    pub classes: Vec<(String, Label)>,
}

impl Default for DatasetFormat {
    /// The public hate-speech tweet dump: three annotator classes where both
    /// offensive classes collapse onto [`Label::Offensive`].
    fn default() -> Self {
        let classes = [
            ("NO", Label::NotOffensive),
            ("O", Label::Offensive),
            ("OH", Label::Offensive),
            ("The tweet is not offensive", Label::NotOffensive),
            ("The tweet uses offensive language but not hate speech", Label::Offensive),
            ("The tweet contains hate speech", Label::Offensive),
        ]
        .into_iter()
        .map(|(s, l)| (s.to_string(), l))
        .collect();
        Self {
            text_column: "tweet_text".into(),
            class_column: "does_this_tweet_contain_hate_speech".into(),
            confidence_column: "does_this_tweet_contain_hate_speech:confidence".into(),
            classes,
        }
    }
}

pub fn parse_class_label(raw: &str, fmt: &DatasetFormat) -> Result<Label, ClassifierError> {
    let raw = raw.trim();
    fmt.classes
        .iter()
        .find(|(s, _)| s.eq_ignore_ascii_case(raw))
        .map(|&(_, l)| l)
        .ok_or_else(|| ClassifierError::UnknownClassLabel(raw.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: Label,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    pub malformed: usize,
    pub unknown_class: usize,
}

/// Reads a labeled CSV. Bad rows are skipped and counted in the report.
pub fn load_labeled_dataset(
    path: &Path,
    fmt: &DatasetFormat,
) -> Result<(Vec<LabeledText>, LoadReport), ClassifierError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ClassifierError::MalformedRow {
                row: 0,
                msg: format!("missing column {name:?}"),
            })
    };
    let (ti, ci, fi) = (
        col(&fmt.text_column)?,
        col(&fmt.class_column)?,
        col(&fmt.confidence_column)?,
    );

    let mut out = Vec::new();
    let mut report = LoadReport::default();
    for rec in rdr.records() {
        report.rows += 1;
        let Ok(rec) = rec else {
            report.malformed += 1;
            continue;
        };
        let (Some(text), Some(class), Some(conf)) = (rec.get(ti), rec.get(ci), rec.get(fi)) else {
            report.malformed += 1;
            continue;
        };
        let label = match parse_class_label(class, fmt) {
            Ok(l) => l,
            Err(_) => {
                report.unknown_class += 1;
                continue;
            }
        };
        match conf.trim().parse::<f64>() {
            Ok(c) if c > 0.0 && c <= 1.0 => out.push(LabeledText {
                text: text.to_string(),
                label,
                confidence: c,
            }),
            _ => report.malformed += 1,
        }
    }
    Ok((out, report))
}

/// Keeps samples whose confidence is at least `threshold`.
pub fn filter_by_confidence(samples: &[LabeledSample], threshold: f64) -> Vec<LabeledSample> {
    samples
        .iter()
        .filter(|s| s.confidence >= threshold)
        .cloned()
        .collect()
}

/// Transforms labeled texts into one-feature samples.
pub fn featurize(texts: &[LabeledText], scorer: &Scorer<'_>) -> Vec<LabeledSample> {
    use rayon::prelude::*;
    texts
        .par_iter()
        .map(|t| LabeledSample::scalar(scorer.score(&t.text).value(), t.label, t.confidence))
        .collect()
}
