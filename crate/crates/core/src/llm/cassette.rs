//! Recorded prompt/response fixtures and the backends that replay or record
//! them. A cassette file is JSON-lines, one entry per line.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse, TemplateId};

/// First 16 hex digits of the SHA-256 of the rendered prompt.
pub fn prompt_digest(prompt: &str) -> String {
    let hash = Sha256::digest(prompt.as_bytes());
    hex::encode(&hash[..8])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CassetteKey {
    pub template: TemplateId,
    pub turn: usize,
    pub digest: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub attempt: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    #[serde(flatten)]
    pub key: CassetteKey,
    pub response: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CassetteError {
    #[error("cassette {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cassette {path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate cassette key: template `{}` turn {} digest {}", .0.template, .0.turn, .0.digest)]
    DuplicateKey(CassetteKey),
}

#[derive(Debug, Clone, Default)]
pub struct Cassette {
    entries: Vec<CassetteEntry>,
    index: HashMap<CassetteKey, usize>,
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, CassetteError> {
        let io_err = |source| CassetteError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(io_err)?;
        let mut cassette = Cassette::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry =
                serde_json::from_str(&line).map_err(|source| CassetteError::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    source,
                })?;
            cassette.insert(entry)?;
        }
        Ok(cassette)
    }

    pub fn save(&self, path: &Path) -> Result<(), CassetteError> {
        let io_err = |source| CassetteError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = File::create(path).map_err(io_err)?;
        for entry in &self.entries {
            writeln!(file, "{}", entry_line(entry)).map_err(io_err)?;
        }
        Ok(())
    }

    pub fn insert(&mut self, entry: CassetteEntry) -> Result<(), CassetteError> {
        if self.index.contains_key(&entry.key) {
            return Err(CassetteError::DuplicateKey(entry.key));
        }
        self.index.insert(entry.key.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn contains(&self, key: &CassetteKey) -> bool {
        self.index.contains_key(key)
    }

    /// Exact match, else the latest earlier attempt recorded for the same
    /// prompt.
    pub fn lookup(&self, key: &CassetteKey) -> Option<&str> {
        let mut probe = key.clone();
        loop {
            if let Some(&i) = self.index.get(&probe) {
                return Some(&self.entries[i].response);
            }
            if probe.attempt == 0 {
                return None;
            }
            probe.attempt -= 1;
        }
    }

    pub fn entries(&self) -> &[CassetteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn entry_line(entry: &CassetteEntry) -> String {
    serde_json::to_string(entry).expect("cassette entries serialize")
}

/// Replays a cassette. Unknown keys are errors, never network calls.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    cassette: Cassette,
}

impl ScriptedBackend {
    pub fn new(cassette: Cassette) -> Self {
        ScriptedBackend { cassette }
    }

    pub fn from_file(path: &Path) -> Result<Self, CassetteError> {
        Ok(Self::new(Cassette::load(path)?))
    }

    pub fn cassette(&self) -> &Cassette {
        &self.cassette
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let key = request.key();
        match self.cassette.lookup(&key) {
            Some(text) => Ok(LlmResponse::new(text, "scripted")),
            None => Err(LlmError::CassetteMiss {
                template: key.template,
                turn: key.turn,
                digest: key.digest,
                attempt: key.attempt,
            }),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Delegates to an inner backend and appends every new exchange to a
/// cassette file.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    recorded: Mutex<Cassette>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    /// Opens `path` for appending; existing entries are kept and not
    /// re-recorded.
    pub fn new(inner: B, path: impl Into<PathBuf>) -> Result<Self, CassetteError> {
        let path = path.into();
        let recorded = if path.exists() {
            Cassette::load(&path)?
        } else {
            Cassette::new()
        };
        Ok(RecordingBackend {
            inner,
            path,
            recorded: Mutex::new(recorded),
        })
    }

    pub fn snapshot(&self) -> Cassette {
        self.recorded.lock().expect("recorder lock poisoned").clone()
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let response = self.inner.complete(request)?;
        let entry = CassetteEntry {
            key: request.key(),
            response: response.text.clone(),
        };
        let mut recorded = self.recorded.lock().expect("recorder lock poisoned");
        if !recorded.contains(&entry.key) {
            let io_err = |source| CassetteError::Io {
                path: self.path.clone(),
                source,
            };
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(io_err)?;
            writeln!(file, "{}", entry_line(&entry)).map_err(io_err)?;
            recorded.insert(entry)?;
        }
        Ok(response)
    }

    fn name(&self) -> &str {
        "recorder"
    }
}
