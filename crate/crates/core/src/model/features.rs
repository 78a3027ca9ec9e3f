//! Hashed character n-gram features.
//!
//! A token contributes the n-grams (default 2 to 4 characters) of its
//! lowercased form wrapped in `<` and `>`, plus one whole-word feature. In
//! token mode each token also sees the lowercased words within the context
//! window, hashed together with their relative offset. Positions past the
//! sentence edges use the padding words `<s>` and `</s>`. Sentence mode sums
//! the token-own features of all tokens.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Feature space size is `2^bits`.
    pub bits: u32,
    pub min_n: usize,
    pub max_n: usize,
    /// Context words considered on each side in token mode.
    pub window: usize,
    pub salt: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            bits: 18,
            min_n: 2,
            max_n: 4,
            window: 2,
            salt: 0,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        1 << self.bits
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(4..=26).contains(&self.bits) {
            return Err(ModelError::Config(format!(
                "feature bits must lie in 4..=26, got {}",
                self.bits
            )));
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(ModelError::Config(format!(
                "invalid n-gram range {}..={}",
                self.min_n, self.max_n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    Sentence,
    Token,
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Builds a vector from unordered entries; repeated indices are summed
    /// and zero values dropped.
    pub fn from_entries(mut entries: Vec<(u32, f64)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some((last, acc)) if *last == i => *acc += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        FeatureVector { entries: merged }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// One past the largest index, or 0 for the empty vector.
    pub fn min_dim(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i as usize + 1)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }

    pub fn from_dense(values: &[f64]) -> Self {
        FeatureVector {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        }
    }
}

const KIND_NGRAM: u8 = 1;
const KIND_WORD: u8 = 2;
const KIND_CONTEXT: u8 = 3;

fn hash_feature(config: &FeatureConfig, kind: u8, offset: i64, text: &str) -> u32 {
    let mut hasher = FnvHasher::default();
    hasher.write(&config.salt.to_le_bytes());
    hasher.write(&[kind]);
    hasher.write(&offset.to_le_bytes());
    hasher.write(text.as_bytes());
    (hasher.finish() & (config.dim() as u64 - 1)) as u32
}

fn own_features(config: &FeatureConfig, token: &str, out: &mut Vec<(u32, f64)>) {
    let lower = token.to_lowercase();
    let wrapped: Vec<char> = format!("<{lower}>").chars().collect();
    for n in config.min_n..=config.max_n {
        for gram in wrapped.windows(n) {
            let gram: String = gram.iter().collect();
            out.push((hash_feature(config, KIND_NGRAM, 0, &gram), 1.0));
        }
    }
    out.push((hash_feature(config, KIND_WORD, 0, &lower), 1.0));
}

/// One feature vector per token.
pub fn featurize_tokens<S: AsRef<str>>(config: &FeatureConfig, tokens: &[S]) -> Vec<FeatureVector> {
    let lower: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let window = config.window as i64;
    (0..tokens.len())
        .map(|i| {
            let mut entries = Vec::new();
            own_features(config, tokens[i].as_ref(), &mut entries);
            for offset in (-window..=window).filter(|&d| d != 0) {
                let j = i as i64 + offset;
                let word = if j < 0 {
                    "<s>"
                } else if j as usize >= tokens.len() {
                    "</s>"
                } else {
                    &lower[j as usize]
                };
                entries.push((hash_feature(config, KIND_CONTEXT, offset, word), 1.0));
            }
            FeatureVector::from_entries(entries)
        })
        .collect()
}

/// Sum of the token-own features of every token.
pub fn featurize_sentence<S: AsRef<str>>(config: &FeatureConfig, tokens: &[S]) -> FeatureVector {
    let mut entries = Vec::new();
    for token in tokens {
        own_features(config, token.as_ref(), &mut entries);
    }
    FeatureVector::from_entries(entries)
}
