//! Machine translation behind a pluggable backend contract.
//!
//! Every translation goes through [`translate_batch`], which consults the
//! on-disk [`TranslationCache`] first and only sends cache misses to the
//! backend. Results are persisted as soon as they arrive, so an interrupted
//! batch keeps everything translated so far.

mod cache;
mod remote;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{cache_key, CacheEntry, TranslationCache};
pub use remote::RemoteBackend;

use crate::corpus::Language;
use crate::projection::MarkerScheme;
use crate::ErrorCategory;

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("source and target language are both {0}")]
    SameLanguage(Language),
    #[error("nothing to translate")]
    EmptyBatch,
    #[error("backend {backend} failed on item {index} after {attempts} attempt(s): {message}")]
    Backend {
        backend: String,
        index: usize,
        attempts: usize,
        message: String,
    },
    #[error("translation cache I/O error on {path}: {source}")]
    CacheIo { path: String, source: std::io::Error },
    #[error("corrupt translation cache entry {path}: {message}")]
    CacheCorrupt { path: String, message: String },
    #[error("translation configuration: {0}")]
    Config(String),
}

impl TranslateError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            TranslateError::Backend { .. } => ErrorCategory::Backend,
            TranslateError::SameLanguage(_) | TranslateError::EmptyBatch | TranslateError::Config(_) => {
                ErrorCategory::Config
            }
            TranslateError::CacheIo { .. } | TranslateError::CacheCorrupt { .. } => ErrorCategory::Internal,
        }
    }

    pub(crate) fn cache_io(path: &Path, source: std::io::Error) -> Self {
        TranslateError::CacheIo {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Failure reported by a backend for a single text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendError {
    pub message: String,
    /// Whether trying again may succeed (timeouts, throttling, 5xx).
    pub retryable: bool,
}

impl BackendError {
    pub fn transient(message: impl Into<String>) -> Self {
        BackendError {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn permanent(message: impl Into<String>) -> Self {
        BackendError {
            message: message.into(),
            retryable: false,
        }
    }
}

pub trait TranslationBackend: Send + Sync {
    /// Stable identifier; part of every cache key.
    fn id(&self) -> &str;

    fn translate(&self, text: &str, src: Language, tgt: Language) -> Result<String, BackendError>;
}

/// Returns its input unchanged.
#[derive(Debug, Default)]
pub struct IdentityBackend {
    calls: AtomicUsize,
}

impl IdentityBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl TranslationBackend for IdentityBackend {
    fn id(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, _src: Language, _tgt: Language) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(text.to_string())
    }
}

/// Word-by-word substitution from a fixed dictionary.
///
/// Words without an entry pass through untouched, so marker symbols survive
/// unless the backend is told to drop them.
#[derive(Debug)]
pub struct DictionaryBackend {
    id: String,
    entries: HashMap<(Option<Language>, String), String>,
    drop_markers: Option<MarkerScheme>,
    calls: AtomicUsize,
}

impl DictionaryBackend {
    /// Entries that apply to every target language.
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self::from_entries(entries.into_iter().map(|(k, v)| (None, k.into(), v.into())))
    }

    /// Entries optionally restricted to one target language; a
    /// language-specific entry takes precedence over a generic one.
    pub fn from_entries(entries: impl IntoIterator<Item = (Option<Language>, String, String)>) -> Self {
        let entries: HashMap<_, _> = entries.into_iter().map(|(lang, k, v)| ((lang, k), v)).collect();
        let mut backend = DictionaryBackend {
            id: String::new(),
            entries,
            drop_markers: None,
            calls: AtomicUsize::new(0),
        };
        backend.refresh_id();
        backend
    }

    /// Reads a dictionary file with lines `source<TAB>target` or
    /// `lang<TAB>source<TAB>target`. Lines starting with `#` are ignored.
    pub fn from_tsv(path: &Path) -> Result<Self, TranslateError> {
        let text = fs::read_to_string(path).map_err(|e| TranslateError::Config(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                [src, tgt] => entries.push((None, src.to_string(), tgt.to_string())),
                [lang, src, tgt] => {
                    let lang: Language = lang
                        .parse()
                        .map_err(|e| TranslateError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?;
                    entries.push((Some(lang), src.to_string(), tgt.to_string()));
                }
                _ => {
                    return Err(TranslateError::Config(format!(
                        "{} line {}: expected 2 or 3 tab-separated columns",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        Ok(Self::from_entries(entries))
    }

    /// Makes the backend lose every standalone symbol of `scheme`, the way a
    /// real system sometimes drops markers.
    pub fn dropping_markers(mut self, scheme: MarkerScheme) -> Self {
        self.drop_markers = Some(scheme);
        self.refresh_id();
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn refresh_id(&mut self) {
        let mut sorted: Vec<_> = self.entries.iter().collect();
        sorted.sort();
        let mut hasher = Sha256::new();
        for ((lang, k), v) in sorted {
            let lang = lang.map_or("*", Language::code);
            hasher.update(format!("{lang}\t{k}\t{v}\n").as_bytes());
        }
        let digest = hex::encode(hasher.finalize());
        let mut id = format!("dictionary-{}", &digest[..12]);
        if let Some(scheme) = &self.drop_markers {
            id.push_str(&format!("+drop[{scheme}]"));
        }
        self.id = id;
    }

    fn is_marker(&self, word: &str) -> bool {
        self.drop_markers
            .as_ref()
            .is_some_and(|s| s.pairs().iter().any(|p| p.open == word || p.close == word))
    }
}

impl TranslationBackend for DictionaryBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, text: &str, _src: Language, tgt: Language) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let words: Vec<&str> = text
            .split_whitespace()
            .filter(|w| !self.is_marker(w))
            .map(|w| {
                self.entries
                    .get(&(Some(tgt), w.to_string()))
                    .or_else(|| self.entries.get(&(None, w.to_string())))
                    .map_or(w, String::as_str)
            })
            .collect();
        Ok(words.join(" "))
    }
}

/// Retry schedule for transient backend failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: usize,
    /// Delay before the first retry; doubled on each further retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

/// Translates `texts` in order, using at most `parallelism` concurrent
/// backend requests and the default [`RetryPolicy`].
pub fn translate_batch(
    texts: &[String],
    src: Language,
    tgt: Language,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    parallelism: usize,
) -> Result<Vec<String>, TranslateError> {
    translate_batch_with(texts, src, tgt, backend, cache, parallelism, RetryPolicy::default())
}

pub fn translate_batch_with(
    texts: &[String],
    src: Language,
    tgt: Language,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    parallelism: usize,
    retry: RetryPolicy,
) -> Result<Vec<String>, TranslateError> {
    if src == tgt {
        return Err(TranslateError::SameLanguage(src));
    }
    if texts.is_empty() {
        return Err(TranslateError::EmptyBatch);
    }
    if parallelism == 0 {
        return Err(TranslateError::Config("parallelism must be positive".into()));
    }

    let mut results: Vec<Option<String>> = vec![None; texts.len()];
    // Distinct missing texts, each with every position it occupies.
    let mut pending: Vec<(String, Vec<usize>)> = Vec::new();
    let mut pending_by_key: HashMap<String, usize> = HashMap::new();
    for (i, text) in texts.iter().enumerate() {
        let key = cache_key(text, src, tgt, backend.id());
        if let Some(&slot) = pending_by_key.get(&key) {
            pending[slot].1.push(i);
        } else if let Some(hit) = cache.get(&key)? {
            results[i] = Some(hit);
        } else {
            pending_by_key.insert(key, pending.len());
            pending.push((text.clone(), vec![i]));
        }
    }

    if !pending.is_empty() {
        let next = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let done: Mutex<Vec<(usize, String)>> = Mutex::new(Vec::with_capacity(pending.len()));
        let failure: Mutex<Option<TranslateError>> = Mutex::new(None);
        let workers = parallelism.min(pending.len());

        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if stop.load(Ordering::Acquire) {
                        break;
                    }
                    let job = next.fetch_add(1, Ordering::AcqRel);
                    let Some((text, positions)) = pending.get(job) else {
                        break;
                    };
                    let outcome = translate_one(backend, text, src, tgt, retry, positions[0])
                        .and_then(|translated| cache.put(text, src, tgt, backend.id(), &translated));
                    match outcome {
                        Ok(stored) => done.lock().expect("result lock").push((job, stored)),
                        Err(e) => {
                            stop.store(true, Ordering::Release);
                            let mut slot = failure.lock().expect("failure lock");
                            let replace = match (&*slot, &e) {
                                (None, _) => true,
                                (
                                    Some(TranslateError::Backend { index: old, .. }),
                                    TranslateError::Backend { index: new, .. },
                                ) => new < old,
                                _ => false,
                            };
                            if replace {
                                *slot = Some(e);
                            }
                            break;
                        }
                    }
                });
            }
        });

        if let Some(e) = failure.into_inner().expect("failure lock") {
            return Err(e);
        }
        for (job, translated) in done.into_inner().expect("result lock") {
            for &i in &pending[job].1 {
                results[i] = Some(translated.clone());
            }
        }
    }

    Ok(results
        .into_iter()
        .map(|r| r.expect("every position is filled"))
        .collect())
}

fn translate_one(
    backend: &dyn TranslationBackend,
    text: &str,
    src: Language,
    tgt: Language,
    retry: RetryPolicy,
    index: usize,
) -> Result<String, TranslateError> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match backend.translate(text, src, tgt) {
            Ok(translated) => return Ok(translated),
            Err(e) if e.retryable && attempts <= retry.max_retries => {
                let delay = retry.base_delay.saturating_mul(1 << (attempts - 1).min(16));
                thread::sleep(delay);
            }
            Err(e) => {
                return Err(TranslateError::Backend {
                    backend: backend.id().to_string(),
                    index,
                    attempts,
                    message: e.message,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn no_wait() -> RetryPolicy {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::ZERO,
        }
    }

    /// Fails on texts containing "bad"; transiently fails the first
    /// `flaky` calls.
    struct Faulty {
        flaky: AtomicUsize,
        calls: AtomicUsize,
    }

    impl TranslationBackend for Faulty {
        fn id(&self) -> &str {
            "faulty"
        }

        fn translate(&self, text: &str, _: Language, _: Language) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if text.contains("bad") {
                return Err(BackendError::transient("boom"));
            }
            if self
                .flaky
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                return Err(BackendError::transient("throttled"));
            }
            Ok(text.to_uppercase())
        }
    }

    #[test]
    fn identity_batch() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let out = translate_batch(
            &strings(&["a b", "c"]),
            Language::En,
            Language::Es,
            &IdentityBackend::new(),
            &cache,
            2,
        )
        .unwrap();
        assert_eq!(out, ["a b", "c"]);
    }

    #[test]
    fn dictionary_substitutes_known_words() {
        let backend = DictionaryBackend::new([("love", "quiero")]);
        let out = backend.translate("I [ love ] you", Language::En, Language::Es).unwrap();
        assert_eq!(out, "I [ quiero ] you");
        let dropping = DictionaryBackend::new([("love", "quiero")]).dropping_markers(MarkerScheme::default());
        assert_eq!(
            dropping
                .translate("I [ love ] you", Language::En, Language::Es)
                .unwrap(),
            "I quiero you"
        );
        assert_ne!(backend.id(), dropping.id());
    }

    #[test]
    fn language_specific_entries_win() {
        let backend = DictionaryBackend::from_entries([
            (None, "love".to_string(), "amor".to_string()),
            (Some(Language::Fr), "love".to_string(), "aime".to_string()),
        ]);
        assert_eq!(backend.translate("love", Language::En, Language::Fr).unwrap(), "aime");
        assert_eq!(backend.translate("love", Language::En, Language::Es).unwrap(), "amor");
    }

    #[test]
    fn warm_cache_makes_no_backend_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let backend = DictionaryBackend::new([("love", "quiero")]);
        let texts = strings(&["I [ love ] you", "hello", "I [ love ] you"]);
        let first = translate_batch(&texts, Language::En, Language::Es, &backend, &cache, 3).unwrap();
        assert_eq!(backend.calls(), 2);
        let second = translate_batch(&texts, Language::En, Language::Es, &backend, &cache, 3).unwrap();
        assert_eq!(backend.calls(), 2);
        assert_eq!(first, second);
    }

    #[test]
    fn rejects_bad_arguments() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let b = IdentityBackend::new();
        assert!(matches!(
            translate_batch(&strings(&["x"]), Language::Es, Language::Es, &b, &cache, 1),
            Err(TranslateError::SameLanguage(_))
        ));
        assert!(matches!(
            translate_batch(&[], Language::En, Language::Es, &b, &cache, 1),
            Err(TranslateError::EmptyBatch)
        ));
        assert!(translate_batch(&strings(&["x"]), Language::En, Language::Es, &b, &cache, 0).is_err());
    }

    #[test]
    fn transient_failures_are_retried() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let backend = Faulty {
            flaky: AtomicUsize::new(2),
            calls: AtomicUsize::new(0),
        };
        let out = translate_batch_with(
            &strings(&["ok"]),
            Language::En,
            Language::Nl,
            &backend,
            &cache,
            1,
            no_wait(),
        )
        .unwrap();
        assert_eq!(out, ["OK"]);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn persistent_failure_reports_index_and_keeps_partial_results() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let backend = Faulty {
            flaky: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        };
        let texts = strings(&["fine", "bad one", "later"]);
        let err = translate_batch_with(&texts, Language::En, Language::Ru, &backend, &cache, 1, no_wait()).unwrap_err();
        match err {
            TranslateError::Backend { index, attempts, .. } => {
                assert_eq!(index, 1);
                assert_eq!(attempts, 4);
            }
            other => panic!("unexpected error {other}"),
        }
        let key = cache_key("fine", Language::En, Language::Ru, "faulty");
        assert_eq!(cache.get(&key).unwrap().as_deref(), Some("FINE"));
    }
}
