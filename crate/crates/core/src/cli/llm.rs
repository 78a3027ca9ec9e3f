//! Reading emotion labels out of free-form LLM answers of the form
//! `Label: <emotion_label>`.

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::EmotionLabel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmParseError {
    #[error("no `Label:` marker in response {0:?}")]
    NoLabel(String),
    #[error("unknown label {word:?} in response {text:?}")]
    UnknownLabel { word: String, text: String },
}

const PREFIX: &str = "label:";

/// Finds the first `Label:` (any case) and reads the word after it,
/// skipping whitespace, quotes and punctuation.
pub fn parse_llm_response(text: &str) -> Result<EmotionLabel, LlmParseError> {
    // ASCII lowercasing keeps byte offsets aligned with `text`
    let lower = text.to_ascii_lowercase();
    let start = lower
        .find(PREFIX)
        .ok_or_else(|| LlmParseError::NoLabel(text.to_string()))?
        + PREFIX.len();
    let rest = text[start..].trim_start_matches(|c: char| !c.is_alphanumeric());
    let word: String = rest.chars().take_while(|c| c.is_alphanumeric()).collect();
    EmotionLabel::ALL
        .into_iter()
        .find(|label| label.as_str().eq_ignore_ascii_case(&word))
        .ok_or_else(|| LlmParseError::UnknownLabel {
            word: if word.is_empty() {
                rest.chars().take(20).collect()
            } else {
                word
            },
            text: text.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedLabel {
    pub id: String,
    pub emotion: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub id: String,
    pub error: LlmParseError,
}

/// Parses `id<TAB>response` lines. Escaped `\n` and `\t` in the response are
/// unescaped first. With `fallback_neutral` unparseable responses become
/// `Neutral`; they are reported as failures either way.
pub fn parse_response_file(
    path: &Path,
    fallback_neutral: bool,
) -> Result<(Vec<ParsedLabel>, Vec<ParseFailure>), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut labels = Vec::new();
    let mut failures = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, response) = line
            .split_once('\t')
            .ok_or_else(|| format!("{} line {}: expected `id<TAB>response`", path.display(), i + 1))?;
        let response = response.replace("\\n", "\n").replace("\\t", "\t");
        match parse_llm_response(&response) {
            Ok(emotion) => labels.push(ParsedLabel {
                id: id.to_string(),
                emotion,
            }),
            Err(error) => {
                if fallback_neutral {
                    labels.push(ParsedLabel {
                        id: id.to_string(),
                        emotion: EmotionLabel::Neutral,
                    });
                }
                failures.push(ParseFailure {
                    id: id.to_string(),
                    error,
                });
            }
        }
    }
    Ok((labels, failures))
}
