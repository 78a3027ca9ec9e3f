//! Toolkit for building cross-lingual emotion and trigger-word corpora.
//!
//! The pipeline runs in stages, each backed by one module:
//!
//! * [`corpus`]: annotated sentences, JSONL/TSV I/O, seeded splits, label counts.
//! * [`projection`]: marker-based label projection through a translation system.
//! * [`translate`]: translation backends and the persistent content-addressed cache.
//! * [`augment`]: trigger switching between a sentence and its translation, and
//!   assembly of training-set combinations.
//! * [`model`]: hashed n-gram features, a linear softmax head with an optional
//!   low-rank adapter, AdamW training, and word-level prediction helpers.
//! * [`metrics`]: macro F1, per-instance token F1, accumulated importance and
//!   confusion matrices.
//! * [`cli`]: configuration, the `xlproject` command surface and the LLM
//!   response parser.

pub mod augment;
pub mod cli;
pub mod corpus;
mod error;
pub mod metrics;
pub mod model;
pub mod projection;
pub mod synthetic;
pub mod translate;

pub use error::{Error, ErrorCategory, Result};
