//! Content-addressed translation cache on disk.
//!
//! Layout: `<root>/<first two hex chars of key>/<key>.json`, each file holding
//! `{"text", "translated", "src", "tgt", "backend"}`. Entries are immutable:
//! the first write of a key wins and later writes read the stored value back.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TranslateError;
use crate::corpus::Language;

/// Hex SHA-256 over the length-prefixed backend id, language pair and text.
pub fn cache_key(text: &str, src: Language, tgt: Language, backend_id: &str) -> String {
    let mut hasher = Sha256::new();
    for field in ["xlproject-mt-v1", backend_id, src.code(), tgt.code(), text] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CacheFile {
    text: String,
    translated: String,
    src: String,
    tgt: String,
    backend: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub key: String,
    pub text: String,
    pub translated: String,
    pub src: String,
    pub tgt: String,
    pub backend: String,
    /// File modification time of the entry.
    pub created_at: SystemTime,
}

#[derive(Debug, Clone)]
pub struct TranslationCache {
    root: PathBuf,
}

impl TranslationCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, TranslateError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| TranslateError::cache_io(&root, e))?;
        Ok(TranslationCache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.root.join(shard).join(format!("{key}.json"))
    }

    pub fn entry(&self, key: &str) -> Result<Option<CacheEntry>, TranslateError> {
        let path = self.entry_path(key);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(TranslateError::cache_io(&path, e)),
        };
        let file: CacheFile = serde_json::from_slice(&bytes).map_err(|e| TranslateError::CacheCorrupt {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let created_at = fs::metadata(&path)
            .and_then(|m| m.modified())
            .map_err(|e| TranslateError::cache_io(&path, e))?;
        Ok(Some(CacheEntry {
            key: key.to_string(),
            text: file.text,
            translated: file.translated,
            src: file.src,
            tgt: file.tgt,
            backend: file.backend,
            created_at,
        }))
    }

    pub fn get(&self, key: &str) -> Result<Option<String>, TranslateError> {
        Ok(self.entry(key)?.map(|e| e.translated))
    }

    /// Stores a translation unless the key already exists, and returns the
    /// value that ends up in the cache.
    pub fn put(
        &self,
        text: &str,
        src: Language,
        tgt: Language,
        backend_id: &str,
        translated: &str,
    ) -> Result<String, TranslateError> {
        let key = cache_key(text, src, tgt, backend_id);
        let path = self.entry_path(&key);
        let dir = path.parent().expect("entry path has a shard directory");
        fs::create_dir_all(dir).map_err(|e| TranslateError::cache_io(dir, e))?;

        let file = CacheFile {
            text: text.to_string(),
            translated: translated.to_string(),
            src: src.code().to_string(),
            tgt: tgt.code().to_string(),
            backend: backend_id.to_string(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| TranslateError::cache_io(dir, e))?;
        serde_json::to_writer(&mut tmp, &file)
            .map_err(io::Error::from)
            .and_then(|_| tmp.flush())
            .map_err(|e| TranslateError::cache_io(tmp.path(), e))?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(file.translated),
            Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => {
                Ok(self.get(&key)?.expect("entry exists after a clobber conflict"))
            }
            Err(e) => Err(TranslateError::cache_io(&path, e.error)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_stable_and_separates_inputs() {
        let a = cache_key("I love you", Language::En, Language::Es, "identity");
        assert_eq!(a, cache_key("I love you", Language::En, Language::Es, "identity"));
        assert_eq!(a.len(), 64);
        assert_ne!(a, cache_key("I love yoU", Language::En, Language::Es, "identity"));
        assert_ne!(a, cache_key("I love you", Language::En, Language::Fr, "identity"));
        assert_ne!(a, cache_key("I love you", Language::En, Language::Es, "remote"));
        // length prefixes keep field boundaries unambiguous
        assert_ne!(
            cache_key("b", Language::En, Language::Es, "a"),
            cache_key("", Language::En, Language::Es, "ab")
        );
    }

    #[test]
    fn first_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let stored = cache.put("hi", Language::En, Language::Es, "b", "hola").unwrap();
        assert_eq!(stored, "hola");
        let stored = cache.put("hi", Language::En, Language::Es, "b", "buenas").unwrap();
        assert_eq!(stored, "hola");
        let key = cache_key("hi", Language::En, Language::Es, "b");
        let entry = cache.entry(&key).unwrap().unwrap();
        assert_eq!(entry.translated, "hola");
        assert_eq!(entry.backend, "b");
        assert!(cache.entry_path(&key).starts_with(dir.path().join(&key[..2])));
    }

    #[test]
    fn entry_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        cache.put("a b", Language::En, Language::Nl, "identity", "a b").unwrap();
        let key = cache_key("a b", Language::En, Language::Nl, "identity");
        let text = fs::read_to_string(cache.entry_path(&key)).unwrap();
        assert_eq!(
            text,
            r#"{"text":"a b","translated":"a b","src":"en","tgt":"nl","backend":"identity"}"#
        );
    }

    #[test]
    fn missing_entry_is_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        assert_eq!(cache.get(&"0".repeat(64)).unwrap(), None);
    }
}
