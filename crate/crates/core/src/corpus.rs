//! Annotated sentences, corpus files and corpus-level operations.
//!
//! Two on-disk layouts are supported. JSONL holds one object per line:
//!
//! ```text
//! {"id": "s1", "lang": "en", "tokens": ["I", "love", "you"], "emotion": "Love", "mask": [0, 1, 0], "origin": "D_S"}
//! ```
//!
//! `emotion` and `mask` are optional, and switched sentences additionally carry
//! `"bilingual": true`. TSV holds one token per row (`token<TAB>mask`), with a
//! header line `# id=<id> lang=<lang> emotion=<label> origin=<tag>` before each
//! sentence and a blank line after it. Corpus provenance is stored next to the
//! data file in `<file>.meta.json`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::ErrorCategory;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed record at line {line}: field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: String,
        message: String,
    },
    #[error("mask length mismatch at line {line}: {tokens} tokens but {mask} mask values")]
    MaskLengthMismatch { line: usize, tokens: usize, mask: usize },
    #[error("invalid sentence {id}: {message}")]
    InvalidSentence { id: String, message: String },
    #[error("duplicate sentence id {0}")]
    DuplicateId(String),
    #[error("token contains delimiter: {token:?} in sentence {id}")]
    TokenContainsDelimiter { id: String, token: String },
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("sentences missing an emotion label: {}", .0.join(", "))]
    MissingEmotion(Vec<String>),
}

impl CorpusError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            CorpusError::InvalidFraction(_) => ErrorCategory::Config,
            _ => ErrorCategory::Data,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed(line: usize, field: &str, message: impl Into<String>) -> Self {
        CorpusError::Malformed {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// The six emotion classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmotionLabel {
    Love,
    Joy,
    Fear,
    Anger,
    Sadness,
    Neutral,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 6] = [
        EmotionLabel::Love,
        EmotionLabel::Joy,
        EmotionLabel::Fear,
        EmotionLabel::Anger,
        EmotionLabel::Sadness,
        EmotionLabel::Neutral,
    ];

    pub const COUNT: usize = 6;

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Love => "Love",
            EmotionLabel::Joy => "Joy",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Anger => "Anger",
            EmotionLabel::Sadness => "Sadness",
            EmotionLabel::Neutral => "Neutral",
        }
    }

    /// Position in [`EmotionLabel::ALL`]; doubles as the class index of the
    /// emotion head.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|label| label.as_str() == s)
            .ok_or_else(|| format!("unknown emotion label {s:?}"))
    }
}

/// Languages of the task data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Nl,
    Ru,
    Es,
    Fr,
}

impl Language {
    pub const ALL: [Language; 5] = [Language::En, Language::Nl, Language::Ru, Language::Es, Language::Fr];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Nl => "nl",
            Language::Ru => "ru",
            Language::Es => "es",
            Language::Fr => "fr",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|lang| lang.code() == s)
            .ok_or_else(|| format!("unsupported language code {s:?}"))
    }
}

/// Which derived dataset a sentence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetTag {
    /// Original English data.
    Source,
    /// Machine-translated data.
    Translated,
    /// English host sentence with translated triggers.
    SourceSwitched,
    /// Translated host sentence with English triggers.
    TranslatedSwitched,
}

impl DatasetTag {
    pub const ALL: [DatasetTag; 4] = [
        DatasetTag::Source,
        DatasetTag::Translated,
        DatasetTag::SourceSwitched,
        DatasetTag::TranslatedSwitched,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Source => "D_S",
            DatasetTag::Translated => "D_T",
            DatasetTag::SourceSwitched => "D_St",
            DatasetTag::TranslatedSwitched => "D_Ts",
        }
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|tag| tag.as_str() == s)
            .ok_or_else(|| format!("unknown dataset tag {s:?}"))
    }
}

/// One tokenized sentence with its optional emotion and trigger annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub emotion: Option<EmotionLabel>,
    pub trigger_mask: Option<Vec<bool>>,
    pub language: Language,
    pub origin: DatasetTag,
    /// Set on trigger-switched sentences, whose content mixes two languages.
    pub bilingual: bool,
}

impl AnnotatedSentence {
    /// Builds an unannotated sentence from whitespace-separated text.
    pub fn from_text(id: impl Into<String>, text: &str, language: Language, origin: DatasetTag) -> Self {
        AnnotatedSentence {
            id: id.into(),
            tokens: text.split_whitespace().map(str::to_string).collect(),
            emotion: None,
            trigger_mask: None,
            language,
            origin,
            bilingual: false,
        }
    }

    pub fn with_emotion(mut self, emotion: EmotionLabel) -> Self {
        self.emotion = Some(emotion);
        self
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        self.trigger_mask = Some(mask);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// Number of tokens marked as triggers (zero when no mask is present).
    pub fn trigger_count(&self) -> usize {
        self.trigger_mask
            .as_ref()
            .map_or(0, |mask| mask.iter().filter(|&&m| m).count())
    }

    /// Checks the token, mask and origin/language invariants.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |message: String| CorpusError::InvalidSentence {
            id: self.id.clone(),
            message,
        };
        if self.tokens.is_empty() {
            return Err(invalid("sentence has no tokens".into()));
        }
        for token in &self.tokens {
            if token.is_empty() {
                return Err(invalid("empty token".into()));
            }
            if token.chars().any(char::is_whitespace) {
                return Err(invalid(format!("token {token:?} contains whitespace")));
            }
        }
        if let Some(mask) = &self.trigger_mask {
            if mask.len() != self.tokens.len() {
                return Err(invalid(format!(
                    "mask length mismatch: {} tokens but {} mask values",
                    self.tokens.len(),
                    mask.len()
                )));
            }
        }
        match (self.origin, self.language) {
            (DatasetTag::Source, lang) if lang != Language::En => {
                Err(invalid(format!("D_S sentence has language {lang}")))
            }
            (DatasetTag::Translated, Language::En) => Err(invalid("D_T sentence has language en".into())),
            _ => Ok(()),
        }
    }
}

/// Free-form key/value metadata carried alongside a corpus.
pub type Provenance = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub sentences: Vec<AnnotatedSentence>,
    pub provenance: Provenance,
}

impl Corpus {
    /// Builds a corpus, checking every sentence and id uniqueness.
    pub fn from_sentences(sentences: Vec<AnnotatedSentence>) -> Result<Self, CorpusError> {
        let corpus = Corpus {
            sentences,
            provenance: Provenance::new(),
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedSentence> {
        self.sentences.iter()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::with_capacity(self.sentences.len());
        for sentence in &self.sentences {
            sentence.validate()?;
            if !seen.insert(sentence.id.as_str()) {
                return Err(CorpusError::DuplicateId(sentence.id.clone()));
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a AnnotatedSentence;
    type IntoIter = std::slice::Iter<'a, AnnotatedSentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Path of the provenance sidecar written next to a corpus file.
pub fn provenance_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let reader = BufReader::new(file);
    let sentences = match format {
        CorpusFormat::Jsonl => read_jsonl(reader, path)?,
        CorpusFormat::Tsv => read_tsv(reader, path)?,
    };
    let mut corpus = Corpus {
        sentences,
        provenance: Provenance::new(),
    };
    let mut seen = HashSet::with_capacity(corpus.sentences.len());
    for sentence in &corpus.sentences {
        if !seen.insert(sentence.id.as_str()) {
            return Err(CorpusError::DuplicateId(sentence.id.clone()));
        }
    }

    let meta = provenance_path(path);
    if meta.exists() {
        let text = std::fs::read_to_string(&meta).map_err(|e| CorpusError::io(&meta, e))?;
        corpus.provenance =
            serde_json::from_str(&text).map_err(|e| CorpusError::malformed(e.line(), "provenance", e.to_string()))?;
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    if format == CorpusFormat::Tsv {
        for sentence in &corpus.sentences {
            if let Some(token) = sentence.tokens.iter().find(|t| t.contains(['\t', '\n', '\r'])) {
                return Err(CorpusError::TokenContainsDelimiter {
                    id: sentence.id.clone(),
                    token: token.clone(),
                });
            }
            if sentence.id.is_empty() || sentence.id.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidSentence {
                    id: sentence.id.clone(),
                    message: "TSV ids must be non-empty and free of whitespace".into(),
                });
            }
        }
    }
    corpus.validate()?;

    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let written = match format {
        CorpusFormat::Jsonl => write_jsonl(&mut writer, corpus),
        CorpusFormat::Tsv => write_tsv(&mut writer, corpus),
    };
    written
        .and_then(|_| writer.flush())
        .map_err(|e| CorpusError::io(path, e))?;

    let meta = provenance_path(path);
    if corpus.provenance.is_empty() {
        if meta.exists() {
            std::fs::remove_file(&meta).map_err(|e| CorpusError::io(&meta, e))?;
        }
    } else {
        let mut text = serde_json::to_string_pretty(&corpus.provenance).expect("string map serializes");
        text.push('\n');
        std::fs::write(&meta, text).map_err(|e| CorpusError::io(&meta, e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    id: &'a str,
    lang: Language,
    tokens: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    emotion: Option<EmotionLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<u8>>,
    origin: &'static str,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    bilingual: bool,
}

fn write_jsonl(writer: &mut impl Write, corpus: &Corpus) -> io::Result<()> {
    for s in &corpus.sentences {
        let record = JsonRecord {
            id: &s.id,
            lang: s.language,
            tokens: &s.tokens,
            emotion: s.emotion,
            mask: s
                .trigger_mask
                .as_ref()
                .map(|m| m.iter().map(|&b| u8::from(b)).collect()),
            origin: s.origin.as_str(),
            bilingual: s.bilingual,
        };
        serde_json::to_writer(&mut *writer, &record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn nfc(token: &str) -> String {
    token.nfc().collect()
}

fn read_jsonl(reader: impl BufRead, path: &Path) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut sentences = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| CorpusError::malformed(line_no, "<record>", e.to_string()))?;
        let Value::Object(object) = value else {
            return Err(CorpusError::malformed(line_no, "<record>", "expected a JSON object"));
        };
        sentences.push(sentence_from_json(&object, line_no)?);
    }
    Ok(sentences)
}

fn sentence_from_json(object: &Map<String, Value>, line: usize) -> Result<AnnotatedSentence, CorpusError> {
    let string_field = |name: &str| -> Result<&str, CorpusError> {
        match object.get(name) {
            Some(Value::String(s)) => Ok(s.as_str()),
            Some(_) => Err(CorpusError::malformed(line, name, "expected a string")),
            None => Err(CorpusError::malformed(line, name, "missing")),
        }
    };

    let id = string_field("id")?.to_string();
    let language: Language = string_field("lang")?
        .parse()
        .map_err(|e: String| CorpusError::malformed(line, "lang", e))?;
    let origin: DatasetTag = string_field("origin")?
        .parse()
        .map_err(|e: String| CorpusError::malformed(line, "origin", e))?;

    let tokens = match object.get("tokens") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok(nfc(s)),
                _ => Err(CorpusError::malformed(line, "tokens", "expected an array of strings")),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(CorpusError::malformed(line, "tokens", "expected an array of strings")),
        None => return Err(CorpusError::malformed(line, "tokens", "missing")),
    };

    let emotion = match object.get("emotion") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(
            s.parse::<EmotionLabel>()
                .map_err(|e| CorpusError::malformed(line, "emotion", e))?,
        ),
        Some(_) => return Err(CorpusError::malformed(line, "emotion", "expected a string")),
    };

    let trigger_mask = match object.get("mask") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|item| match item.as_u64() {
                    Some(0) => Ok(false),
                    Some(1) => Ok(true),
                    _ => Err(CorpusError::malformed(line, "mask", "values must be 0 or 1")),
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Some(_) => return Err(CorpusError::malformed(line, "mask", "expected an array of 0/1")),
    };

    let bilingual = match object.get("bilingual") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(CorpusError::malformed(line, "bilingual", "expected a boolean")),
    };

    if let Some(mask) = &trigger_mask {
        if mask.len() != tokens.len() {
            return Err(CorpusError::MaskLengthMismatch {
                line,
                tokens: tokens.len(),
                mask: mask.len(),
            });
        }
    }

    let sentence = AnnotatedSentence {
        id,
        tokens,
        emotion,
        trigger_mask,
        language,
        origin,
        bilingual,
    };
    sentence.validate().map_err(|e| match e {
        CorpusError::InvalidSentence { message, .. } => CorpusError::malformed(line, "tokens", message),
        other => other,
    })?;
    Ok(sentence)
}

fn write_tsv(writer: &mut impl Write, corpus: &Corpus) -> io::Result<()> {
    for s in &corpus.sentences {
        write!(writer, "# id={} lang={}", s.id, s.language)?;
        if let Some(emotion) = s.emotion {
            write!(writer, " emotion={emotion}")?;
        }
        write!(writer, " origin={}", s.origin)?;
        if s.bilingual {
            write!(writer, " bilingual=1")?;
        }
        writeln!(writer)?;
        for (i, token) in s.tokens.iter().enumerate() {
            match &s.trigger_mask {
                Some(mask) => writeln!(writer, "{token}\t{}", u8::from(mask[i]))?,
                None => writeln!(writer, "{token}")?,
            }
        }
        writeln!(writer)?;
    }
    Ok(())
}

struct TsvHeader {
    line: usize,
    id: String,
    language: Language,
    emotion: Option<EmotionLabel>,
    origin: DatasetTag,
    bilingual: bool,
}

fn parse_tsv_header(text: &str, line: usize) -> Result<TsvHeader, CorpusError> {
    let mut id = None;
    let mut language = None;
    let mut emotion = None;
    let mut origin = None;
    let mut bilingual = false;
    for pair in text.split(' ').filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CorpusError::malformed(line, "header", format!("expected key=value, got {pair:?}")))?;
        match key {
            "id" => id = Some(value.to_string()),
            "lang" => {
                language = Some(
                    value
                        .parse()
                        .map_err(|e: String| CorpusError::malformed(line, "lang", e))?,
                )
            }
            "emotion" if value.is_empty() => {}
            "emotion" => {
                emotion = Some(
                    value
                        .parse()
                        .map_err(|e: String| CorpusError::malformed(line, "emotion", e))?,
                )
            }
            "origin" => {
                origin = Some(
                    value
                        .parse()
                        .map_err(|e: String| CorpusError::malformed(line, "origin", e))?,
                )
            }
            "bilingual" => bilingual = value == "1" || value == "true",
            other => return Err(CorpusError::malformed(line, other, "unknown header key")),
        }
    }
    Ok(TsvHeader {
        line,
        id: id.ok_or_else(|| CorpusError::malformed(line, "id", "missing"))?,
        language: language.ok_or_else(|| CorpusError::malformed(line, "lang", "missing"))?,
        emotion,
        origin: origin.ok_or_else(|| CorpusError::malformed(line, "origin", "missing"))?,
        bilingual,
    })
}

fn read_tsv(reader: impl BufRead, path: &Path) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut header: Option<TsvHeader> = None;
    let mut tokens: Vec<String> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();

    let finish = |header: TsvHeader, tokens: Vec<String>, mask: Vec<bool>| -> Result<AnnotatedSentence, CorpusError> {
        if !mask.is_empty() && mask.len() != tokens.len() {
            return Err(CorpusError::MaskLengthMismatch {
                line: header.line,
                tokens: tokens.len(),
                mask: mask.len(),
            });
        }
        let sentence = AnnotatedSentence {
            id: header.id,
            tokens,
            emotion: header.emotion,
            trigger_mask: (!mask.is_empty()).then_some(mask),
            language: header.language,
            origin: header.origin,
            bilingual: header.bilingual,
        };
        sentence.validate().map_err(|e| match e {
            CorpusError::InvalidSentence { message, .. } => CorpusError::malformed(header.line, "tokens", message),
            other => other,
        })?;
        Ok(sentence)
    };

    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(done) = header.take() {
                sentences.push(finish(done, std::mem::take(&mut tokens), std::mem::take(&mut mask))?);
            }
            header = Some(parse_tsv_header(rest, line_no)?);
            continue;
        }
        if line.is_empty() {
            if let Some(done) = header.take() {
                sentences.push(finish(done, std::mem::take(&mut tokens), std::mem::take(&mut mask))?);
            }
            continue;
        }
        if header.is_none() {
            return Err(CorpusError::malformed(
                line_no,
                "header",
                "token row before any sentence header",
            ));
        }
        match line.split_once('\t') {
            Some((token, value)) => {
                if mask.len() != tokens.len() {
                    return Err(CorpusError::MaskLengthMismatch {
                        line: line_no,
                        tokens: tokens.len() + 1,
                        mask: mask.len() + 1,
                    });
                }
                let flag = match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(CorpusError::malformed(line_no, "mask", "values must be 0 or 1")),
                };
                tokens.push(nfc(token));
                mask.push(flag);
            }
            None => {
                if !mask.is_empty() {
                    return Err(CorpusError::MaskLengthMismatch {
                        line: line_no,
                        tokens: tokens.len() + 1,
                        mask: mask.len(),
                    });
                }
                tokens.push(nfc(&line));
            }
        }
    }
    if let Some(done) = header.take() {
        sentences.push(finish(done, tokens, mask)?);
    }
    Ok(sentences)
}

/// Number of validation sentences for `n` sentences, rounding half up.
pub fn validation_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 + 0.5).floor() as usize).min(n)
}

/// Seeded shuffle-then-prefix split. Both halves keep the input order.
pub fn split_train_validation(corpus: &Corpus, fraction: f64, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = corpus.len();
    let k = validation_size(n, fraction);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut in_validation = vec![false; n];
    for &i in &order[..k] {
        in_validation[i] = true;
    }

    let mut train = Vec::with_capacity(n - k);
    let mut validation = Vec::with_capacity(k);
    for (sentence, held_out) in corpus.sentences.iter().zip(in_validation) {
        if held_out {
            validation.push(sentence.clone());
        } else {
            train.push(sentence.clone());
        }
    }

    let provenance = |role: &str| {
        let mut p = corpus.provenance.clone();
        p.insert("split.role".into(), role.into());
        p.insert("split.seed".into(), seed.to_string());
        p.insert("split.fraction".into(), fraction.to_string());
        p.insert("split.stratified".into(), "false".into());
        p
    };
    Ok((
        Corpus {
            sentences: train,
            provenance: provenance("train"),
        },
        Corpus {
            sentences: validation,
            provenance: provenance("validation"),
        },
    ))
}

/// Count of sentences per emotion; every label is present in the map.
pub fn label_distribution(corpus: &Corpus) -> Result<BTreeMap<EmotionLabel, usize>, CorpusError> {
    let missing: Vec<String> = corpus
        .iter()
        .filter(|s| s.emotion.is_none())
        .map(|s| s.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingEmotion(missing));
    }
    let mut counts: BTreeMap<EmotionLabel, usize> = EmotionLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for sentence in corpus {
        if let Some(label) = sentence.emotion {
            *counts.entry(label).or_default() += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sentence(id: &str, text: &str) -> AnnotatedSentence {
        AnnotatedSentence::from_text(id, text, Language::En, DatasetTag::Source)
    }

    #[test]
    fn loads_single_jsonl_record() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"a","lang":"en","tokens":["I","love","you"],"mask":[0,1,0],"origin":"D_S"}"#,
        )
        .unwrap();
        let corpus = load_corpus(&path, CorpusFormat::Jsonl).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.sentences[0].trigger_mask, Some(vec![false, true, false]));
        assert_eq!(corpus.sentences[0].emotion, None);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path, CorpusFormat::Jsonl).unwrap().is_empty());
        let path = dir.path().join("c.tsv");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path, CorpusFormat::Tsv).unwrap().is_empty());
    }

    #[test]
    fn mask_mismatch_names_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let good = r#"{"id":"a","lang":"en","tokens":["x"],"origin":"D_S"}"#;
        let bad = r#"{"id":"b","lang":"en","tokens":["I","love","you"],"mask":[0,1],"origin":"D_S"}"#;
        std::fs::write(&path, format!("{good}\n{bad}\n")).unwrap();
        let err = load_corpus(&path, CorpusFormat::Jsonl).unwrap_err();
        assert!(err.to_string().contains("mask length mismatch at line 2"), "{err}");
    }

    #[test]
    fn malformed_field_is_named() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, r#"{"id":"a","lang":"de","tokens":["x"],"origin":"D_S"}"#).unwrap();
        let err = load_corpus(&path, CorpusFormat::Jsonl).unwrap_err();
        assert!(
            matches!(err, CorpusError::Malformed { line: 1, ref field, .. } if field == "lang"),
            "{err}"
        );

        std::fs::write(&path, r#"{"id":"a","lang":"en","origin":"D_S"}"#).unwrap();
        let err = load_corpus(&path, CorpusFormat::Jsonl).unwrap_err();
        assert!(
            matches!(err, CorpusError::Malformed { ref field, .. } if field == "tokens"),
            "{err}"
        );

        std::fs::write(&path, r#"{"id":"a","lang":"en","tokens":["x", ""],"origin":"D_S"}"#).unwrap();
        assert!(load_corpus(&path, CorpusFormat::Jsonl).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Corpus::from_sentences(vec![sentence("a", "x"), sentence("a", "y")]).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(_)));
    }

    #[test]
    fn absent_emotion_round_trips_as_absent() {
        let dir = tempdir().unwrap();
        let corpus = Corpus::from_sentences(vec![sentence("a", "hello there")]).unwrap();
        for format in [CorpusFormat::Jsonl, CorpusFormat::Tsv] {
            let path = dir.path().join("c.out");
            save_corpus(&corpus, &path, format).unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            assert!(!text.contains("emotion"), "{text}");
            assert_eq!(load_corpus(&path, format).unwrap(), corpus);
        }
    }

    #[test]
    fn tsv_rejects_tab_in_token() {
        let dir = tempdir().unwrap();
        let mut s = sentence("a", "x y");
        s.tokens[1] = "b\tc".into();
        let corpus = Corpus {
            sentences: vec![s],
            provenance: Provenance::new(),
        };
        let err = save_corpus(&corpus, &dir.path().join("c.tsv"), CorpusFormat::Tsv).unwrap_err();
        assert!(err.to_string().contains("token contains delimiter"), "{err}");
    }

    #[test]
    fn tsv_layout() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        let corpus = Corpus::from_sentences(vec![sentence("a", "I love you")
            .with_emotion(EmotionLabel::Love)
            .with_mask(vec![false, true, false])])
        .unwrap();
        save_corpus(&corpus, &path, CorpusFormat::Tsv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# id=a lang=en emotion=Love origin=D_S\nI\t0\nlove\t1\nyou\t0\n\n"
        );
    }

    #[test]
    fn provenance_sidecar_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut corpus = Corpus::from_sentences(vec![sentence("a", "x")]).unwrap();
        corpus.provenance.insert("seed".into(), "7".into());
        save_corpus(&corpus, &path, CorpusFormat::Jsonl).unwrap();
        assert!(provenance_path(&path).exists());
        assert_eq!(load_corpus(&path, CorpusFormat::Jsonl).unwrap(), corpus);
    }

    #[test]
    fn nfc_applied_on_load() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        // "e" followed by a combining acute accent
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"lang\":\"fr\",\"tokens\":[\"cafe\u{301}\"],\"origin\":\"D_T\"}",
        )
        .unwrap();
        let corpus = load_corpus(&path, CorpusFormat::Jsonl).unwrap();
        assert_eq!(corpus.sentences[0].tokens[0], "caf\u{e9}");
    }

    #[test]
    fn origin_language_invariant() {
        let s = AnnotatedSentence::from_text("a", "x", Language::Es, DatasetTag::Source);
        assert!(s.validate().is_err());
        let s = AnnotatedSentence::from_text("a", "x", Language::En, DatasetTag::Translated);
        assert!(s.validate().is_err());
    }

    fn numbered(n: usize) -> Corpus {
        Corpus::from_sentences((0..n).map(|i| sentence(&format!("s{i}"), "w")).collect()).unwrap()
    }

    #[test]
    fn split_sizes_follow_fraction() {
        let (train, validation) = split_train_validation(&numbered(5000), 0.10, 42).unwrap();
        assert_eq!((train.len(), validation.len()), (4500, 500));
        assert_eq!(validation.provenance["split.seed"], "42");
    }

    #[test]
    fn split_is_deterministic() {
        let corpus = numbered(100);
        assert_eq!(
            split_train_validation(&corpus, 0.1, 9).unwrap(),
            split_train_validation(&corpus, 0.1, 9).unwrap()
        );
    }

    #[test]
    fn split_differs_between_seeds() {
        let corpus = numbered(100);
        let ids = |seed| -> Vec<String> {
            let (_, v) = split_train_validation(&corpus, 0.1, seed).unwrap();
            v.sentences.into_iter().map(|s| s.id).collect()
        };
        assert_eq!(ids(1).len(), 10);
        assert_ne!(ids(1), ids(2));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let corpus = numbered(10);
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(
                split_train_validation(&corpus, f, 1),
                Err(CorpusError::InvalidFraction(_))
            ));
        }
        assert!(matches!(
            split_train_validation(&Corpus::default(), 0.5, 1),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(validation_size(5, 0.5), 3);
        assert_eq!(validation_size(15, 0.1), 2);
        assert_eq!(validation_size(14, 0.1), 1);
    }

    #[test]
    fn label_distribution_counts() {
        assert_eq!(
            label_distribution(&Corpus::default()).unwrap().values().sum::<usize>(),
            0
        );
        let corpus = Corpus::from_sentences(vec![
            sentence("a", "x").with_emotion(EmotionLabel::Joy),
            sentence("b", "x").with_emotion(EmotionLabel::Joy),
            sentence("c", "x").with_emotion(EmotionLabel::Fear),
        ])
        .unwrap();
        let counts = label_distribution(&corpus).unwrap();
        assert_eq!(counts.len(), 6);
        assert_eq!(counts[&EmotionLabel::Joy], 2);
        assert_eq!(counts[&EmotionLabel::Fear], 1);
        assert_eq!(counts[&EmotionLabel::Love], 0);

        let unlabeled = Corpus::from_sentences(vec![sentence("z", "x")]).unwrap();
        let err = label_distribution(&unlabeled).unwrap_err();
        assert!(err.to_string().contains('z'));
    }
}
