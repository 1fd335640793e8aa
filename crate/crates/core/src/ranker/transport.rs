//! Request/response transports for the LMM annotator.
//!
//! A request is the query text plus one PNG image; a response is the
//! completion text. Mock transports answer in-process; the replay table
//! maps the SHA-256 of the PNG bytes to a recorded response.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::Engine as _;
use sha2::{Digest, Sha256};

use crate::error::AnnotationError;

pub trait Transport: Send {
    fn complete(&mut self, prompt: &str, image_png: &[u8]) -> Result<String, AnnotationError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn complete(&mut self, prompt: &str, image_png: &[u8]) -> Result<String, AnnotationError> {
        (**self).complete(prompt, image_png)
    }
}

/// Lowercase hex SHA-256 of the encoded image.
pub fn image_checksum(image_png: &[u8]) -> String {
    hex::encode(Sha256::digest(image_png))
}

/// Returns the same completion for every request.
#[derive(Debug, Clone)]
pub struct FixedReply {
    text: String,
}

impl FixedReply {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    /// `A1: Yes` .. `An: Yes` (or all `No`).
    pub fn all(yes: bool, n: usize) -> Self {
        let word = if yes { "Yes" } else { "No" };
        Self::new((1..=n).map(|i| format!("A{i}: {word}\n")).collect::<String>())
    }
}

impl Transport for FixedReply {
    fn complete(&mut self, _prompt: &str, _image_png: &[u8]) -> Result<String, AnnotationError> {
        Ok(self.text.clone())
    }
}

pub type ReplayTable = BTreeMap<String, String>;

/// Serves recorded responses keyed by image checksum.
#[derive(Debug, Clone, Default)]
pub struct ReplayTransport {
    table: ReplayTable,
}

impl ReplayTransport {
    pub fn from_table(table: ReplayTable) -> Self {
        Self { table }
    }

    /// Loads a JSON object `{ "<sha256 hex>": "<response text>", ... }`.
    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        Ok(Self { table: read_table(path)? })
    }

    pub fn table(&self) -> &ReplayTable {
        &self.table
    }
}

impl Transport for ReplayTransport {
    fn complete(&mut self, _prompt: &str, image_png: &[u8]) -> Result<String, AnnotationError> {
        let checksum = image_checksum(image_png);
        self.table
            .get(&checksum)
            .cloned()
            .ok_or(AnnotationError::Unrecorded { checksum })
    }
}

pub fn read_table(path: &Path) -> Result<ReplayTable, AnnotationError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AnnotationError::Transport(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| AnnotationError::Transport(format!("{}: {e}", path.display())))
}

pub fn write_table(path: &Path, table: &ReplayTable) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(table).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Forwards to `inner` and records every successful exchange. With a
/// file attached, the table is rewritten after each new entry.
pub struct RecordingTransport<T> {
    inner: T,
    table: ReplayTable,
    file: Option<PathBuf>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        Self { inner, table: ReplayTable::new(), file: None }
    }

    pub fn to_file(inner: T, path: impl Into<PathBuf>) -> Self {
        Self { inner, table: ReplayTable::new(), file: Some(path.into()) }
    }

    pub fn table(&self) -> &ReplayTable {
        &self.table
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        write_table(path, &self.table)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn complete(&mut self, prompt: &str, image_png: &[u8]) -> Result<String, AnnotationError> {
        let reply = self.inner.complete(prompt, image_png)?;
        let fresh = self.table.insert(image_checksum(image_png), reply.clone()).is_none();
        if let (true, Some(path)) = (fresh, &self.file) {
            write_table(path, &self.table)
                .map_err(|e| AnnotationError::Transport(format!("{}: {e}", path.display())))?;
        }
        Ok(reply)
    }
}

/// OpenAI-style chat-completions endpoint taking an inline PNG data URL.
pub struct HttpTransport {
    url: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self { url: url.into(), model: model.into(), api_key, timeout, agent }
    }

    pub fn request_body(&self, prompt: &str, image_png: &[u8]) -> serde_json::Value {
        let data_url = format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(image_png)
        );
        serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{
                "role": "user",
                "content": [
                    { "type": "image_url", "image_url": { "url": data_url } },
                    { "type": "text", "text": prompt },
                ],
            }],
        })
    }
}

impl Transport for HttpTransport {
    fn complete(&mut self, prompt: &str, image_png: &[u8]) -> Result<String, AnnotationError> {
        let body = self.request_body(prompt, image_png).to_string();
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.as_bytes()).map_err(|e| match e {
            ureq::Error::Timeout(_) => AnnotationError::Timeout(self.timeout),
            other => AnnotationError::Transport(other.to_string()),
        })?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AnnotationError::Transport(e.to_string()))?;
        let json: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| AnnotationError::Transport(format!("bad response: {e}")))?;
        json.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| AnnotationError::Transport("response has no choices[0].message.content".into()))
    }
}

/// Where LMM queries go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `mock:yes` / `mock:no`
    Mock { yes: bool },
    /// `replay:<path>`
    Replay(PathBuf),
    /// `http://...` or `https://...`
    Http(String),
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "mock:yes" => Ok(Endpoint::Mock { yes: true }),
            "mock:no" => Ok(Endpoint::Mock { yes: false }),
            _ if s.starts_with("http://") || s.starts_with("https://") => Ok(Endpoint::Http(s.to_owned())),
            _ => match s.strip_prefix("replay:") {
                Some(p) if !p.is_empty() => Ok(Endpoint::Replay(PathBuf::from(p))),
                _ => Err(format!("unrecognized LMM endpoint '{s}'")),
            },
        }
    }
}

/// Settings only the HTTP transport uses.
#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self { model: "qwen-vl-plus-latest".into(), api_key: None, timeout: Duration::from_secs(60) }
    }
}

pub fn connect(endpoint: &Endpoint, n_questions: usize, http: &HttpSettings) -> Result<Box<dyn Transport>, AnnotationError> {
    Ok(match endpoint {
        Endpoint::Mock { yes } => Box::new(FixedReply::all(*yes, n_questions)),
        Endpoint::Replay(path) => Box::new(ReplayTransport::load(path)?),
        Endpoint::Http(url) => Box::new(HttpTransport::new(url.clone(), http.model.clone(), http.api_key.clone(), http.timeout)),
    })
}
