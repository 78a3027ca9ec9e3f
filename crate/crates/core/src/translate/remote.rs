//! Generic JSON-over-HTTP translation service.
//!
//! Request: `POST <endpoint>` with `{"q": text, "source": src, "target": tgt}`
//! (plus `"api_key"` when a key is configured). Response: `{"translatedText": ...}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, TranslationBackend};
use crate::corpus::Language;

/// Environment variable holding the service key.
pub const API_KEY_ENV: &str = "XLPROJECT_MT_API_KEY";

#[derive(Serialize)]
struct Request<'a> {
    q: &'a str,
    source: &'a str,
    target: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    api_key: Option<&'a str>,
}

#[derive(Deserialize)]
struct Response {
    #[serde(rename = "translatedText")]
    translated_text: String,
}

pub struct RemoteBackend {
    id: String,
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("id", &self.id)
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let endpoint = endpoint.into();
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build();
        RemoteBackend {
            id: format!("remote:{endpoint}"),
            endpoint,
            api_key,
            agent: config.into(),
        }
    }

    /// Reads the key from `XLPROJECT_MT_API_KEY` when it is set.
    pub fn from_env(endpoint: impl Into<String>) -> Self {
        Self::new(endpoint, std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl TranslationBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn translate(&self, text: &str, src: Language, tgt: Language) -> Result<String, BackendError> {
        let request = Request {
            q: text,
            source: src.code(),
            target: tgt.code(),
            api_key: self.api_key.as_deref(),
        };
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|e| BackendError::transient(e.to_string()))?;
        let status = response.status().as_u16();
        match status {
            200..=299 => response
                .body_mut()
                .read_json::<Response>()
                .map(|r| r.translated_text)
                .map_err(|e| BackendError::permanent(format!("unreadable response: {e}"))),
            408 | 429 | 500..=599 => Err(BackendError::transient(format!("HTTP {status}"))),
            _ => Err(BackendError::permanent(format!("HTTP {status}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves `responses` in order, one per connection, and returns the
    /// request bodies it saw.
    fn serve(responses: Vec<(u16, &'static str)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/translate", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; length];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    #[test]
    fn posts_json_and_reads_translation() {
        let (url, server) = serve(vec![(200, r#"{"translatedText":"Te [ quiero ]"}"#)]);
        let backend = RemoteBackend::new(url, Some("k".into()));
        let out = backend.translate("I [ love ]", Language::En, Language::Es).unwrap();
        assert_eq!(out, "Te [ quiero ]");
        let bodies = server.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(
            sent,
            serde_json::json!({"q": "I [ love ]", "source": "en", "target": "es", "api_key": "k"})
        );
    }

    #[test]
    fn classifies_http_failures() {
        let (url, server) = serve(vec![(503, "{}"), (400, "{}")]);
        let backend = RemoteBackend::new(url, None);
        assert!(
            backend
                .translate("a", Language::En, Language::Fr)
                .unwrap_err()
                .retryable
        );
        assert!(
            !backend
                .translate("a", Language::En, Language::Fr)
                .unwrap_err()
                .retryable
        );
        server.join().unwrap();
    }

    #[test]
    fn key_is_not_debug_printed() {
        let backend = RemoteBackend::new("http://localhost:1/x", Some("secret".into()));
        assert!(!format!("{backend:?}").contains("secret"));
    }
}
