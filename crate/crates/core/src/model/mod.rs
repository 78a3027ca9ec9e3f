//! Trainable linear heads over hashed character n-gram features.
//!
//! The emotion task classifies whole sentences into the six labels; the
//! trigger task labels every word as trigger (1) or not (0). Both use the
//! same head, optionally extended with a low-rank adapter, and are trained
//! with AdamW.

mod adamw;
mod checkpoint;
mod features;
mod linear;
mod subword;
mod train;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsError;
use crate::ErrorCategory;

pub use adamw::{AdamW, Schedule, BETA1, BETA2, EPSILON};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use features::{featurize_sentence, featurize_tokens, FeatureConfig, FeatureMode, FeatureVector};
pub use linear::{
    argmax, forward, loss_and_grads, softmax, AdapterGradients, Gradients, LinearModel, LoraAdapter, Matrix,
};
pub use subword::{first_subtoken_aggregate, numeric_from_logits, predict_binary, SubwordAlignment};
pub use train::{
    train, Classifier, EpochRecord, LoraConfig, TrainConfig, TrainReport, Trained, LEARNING_RATES, MAX_ADAPTER_EPOCHS,
    MAX_EPOCHS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Emotion,
    Trigger,
}

impl Task {
    pub fn classes(self) -> usize {
        match self {
            Task::Emotion => 6,
            Task::Trigger => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Emotion => "emotion",
            Task::Trigger => "trigger",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite gradient; training aborted")]
    NonFiniteGradient,
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("sentence {id} has no {task} annotation")]
    MissingLabel { id: String, task: Task },
    #[error("invalid subword alignment: {0}")]
    Alignment(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ModelError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            ModelError::Config(_) => ErrorCategory::Config,
            ModelError::NonFiniteGradient | ModelError::Dimension { .. } => ErrorCategory::Internal,
            _ => ErrorCategory::Data,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
