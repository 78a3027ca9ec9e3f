//! TOML configuration file. Every key is optional; command-line flags take
//! precedence over the file, and the file over built-in defaults.
//!
//! ```toml
//! seed = 42
//! format = "jsonl"
//!
//! [mt]
//! backend = "remote"        # identity | mock | remote
//! endpoint = "https://mt.example.org/translate"
//! parallelism = 4
//! dictionary = "dict.tsv"   # mock backend word list
//! cache_dir = ".xlproject-cache"
//! scheme = "default"
//!
//! [train]
//! lr = 2e-4
//! epochs = 30
//! batch_size = 16
//! schedule = "linear"
//! lora_r = 64
//! lora_alpha = 16.0
//! feature_bits = 18
//! weight_decay = 0.0
//!
//! [split]
//! fraction = 0.1
//!
//! [combine]
//! spec = "D_S+D_T"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::ConfigError;
use crate::corpus::CorpusFormat;
use crate::model::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Identity,
    /// Word-list dictionary, see `--dictionary`.
    Mock,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtSection {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub parallelism: Option<usize>,
    pub dictionary: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub scheme: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub schedule: Option<Schedule>,
    pub lora_r: Option<usize>,
    pub lora_alpha: Option<f64>,
    pub feature_bits: Option<u32>,
    pub weight_decay: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombineSection {
    pub spec: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<CorpusFormat>,
    #[serde(default)]
    pub mt: MtSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub combine: CombineSection,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(format!("configuration file: {e}")))
    }

    /// Reads a configuration file. Relative paths inside it are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.mt.dictionary, &mut config.mt.cache_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}
