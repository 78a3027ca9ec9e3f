//! Word-level decisions from subtoken outputs and class-1 numeric scores.

use std::ops::Range;

use super::linear::softmax;
use super::ModelError;
use crate::metrics::Attributions;

/// Maps each word to a contiguous, non-empty range of subtokens. The ranges
/// partition `0..subtoken_count` in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordAlignment {
    ranges: Vec<Range<usize>>,
}

impl SubwordAlignment {
    pub fn new(ranges: Vec<Range<usize>>) -> Result<Self, ModelError> {
        let mut next = 0;
        for (word, r) in ranges.iter().enumerate() {
            if r.start != next || r.end <= r.start {
                return Err(ModelError::Alignment(format!(
                    "word {word} has subtoken range {}..{} but the next free subtoken is {next}",
                    r.start, r.end
                )));
            }
            next = r.end;
        }
        Ok(SubwordAlignment { ranges })
    }

    /// One subtoken per word.
    pub fn identity(words: usize) -> Self {
        SubwordAlignment {
            ranges: (0..words).map(|i| i..i + 1).collect(),
        }
    }

    /// Splits every word into chunks of at most `max_chunk` characters.
    pub fn synthetic<S: AsRef<str>>(words: &[S], max_chunk: usize) -> Self {
        let max_chunk = max_chunk.max(1);
        let mut next = 0;
        let ranges = words
            .iter()
            .map(|w| {
                let chunks = w.as_ref().chars().count().div_ceil(max_chunk).max(1);
                let r = next..next + chunks;
                next += chunks;
                r
            })
            .collect();
        SubwordAlignment { ranges }
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn word_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn subtoken_count(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

/// Keeps the output of each word's first subtoken.
pub fn first_subtoken_aggregate<T: Clone>(
    subtoken_logits: &[T],
    align: &SubwordAlignment,
) -> Result<Vec<T>, ModelError> {
    if align.subtoken_count() != subtoken_logits.len() {
        return Err(ModelError::Alignment(format!(
            "alignment covers {} subtokens but {} outputs were given",
            align.subtoken_count(),
            subtoken_logits.len()
        )));
    }
    Ok(align
        .ranges()
        .iter()
        .map(|r| subtoken_logits[r.start].clone())
        .collect())
}

/// Per-word argmax; a tie selects class 0.
pub fn predict_binary(word_logits: &[[f64; 2]]) -> Vec<bool> {
    word_logits.iter().map(|z| z[1] > z[0]).collect()
}

/// Softmax across words of the class-1 logits.
pub fn numeric_from_logits(word_logits: &[[f64; 2]]) -> Result<Attributions, ModelError> {
    if word_logits.is_empty() {
        return Err(ModelError::Alignment("no words to score".into()));
    }
    let class1: Vec<f64> = word_logits.iter().map(|z| z[1]).collect();
    Ok(Attributions::from_distribution(softmax(&class1)))
}
