use std::path::{Path, PathBuf};

use anyhow::Context;
use chainkey_core::llm::mock::SyntheticBackend;
use chainkey_core::llm::{HttpBackend, LlmBackend, RecordingBackend, ScriptedBackend};

use crate::exit::ConfigError;

/// Auth token for `http:` backends.
pub const TOKEN_ENV: &str = "CHAINKEY_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Http(String),
    Scripted(PathBuf),
    /// Appends what the `--record-from` backend answers to this cassette.
    Record(PathBuf),
    Synthetic(PathBuf),
}

impl BackendSpec {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        // A bare URL is accepted as well as `http:<url>`.
        if text.starts_with("http://") || text.starts_with("https://") {
            return Ok(BackendSpec::Http(text.to_string()));
        }
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| ConfigError(format!("backend `{text}` is not of the form kind:target")))?;
        if rest.is_empty() {
            return Err(ConfigError(format!("backend `{text}` has no target")));
        }
        match kind {
            "http" => Ok(BackendSpec::Http(rest.to_string())),
            "scripted" => Ok(BackendSpec::Scripted(rest.into())),
            "record" => Ok(BackendSpec::Record(rest.into())),
            "synthetic" => Ok(BackendSpec::Synthetic(rest.into())),
            other => Err(ConfigError(format!(
                "unknown backend kind `{other}` (expected http, scripted, record or synthetic)"
            ))),
        }
    }
}

pub fn open(spec: &BackendSpec, record_from: Option<&BackendSpec>) -> anyhow::Result<Box<dyn LlmBackend>> {
    if record_from.is_some() && !matches!(spec, BackendSpec::Record(_)) {
        return Err(ConfigError("--record-from only applies to a record: backend".into()).into());
    }
    match spec {
        BackendSpec::Http(url) => {
            let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
            Ok(Box::new(HttpBackend::new(url.clone(), token)?))
        }
        BackendSpec::Scripted(path) => {
            require_file(path, "cassette")?;
            Ok(Box::new(ScriptedBackend::from_file(path)?))
        }
        BackendSpec::Synthetic(path) => {
            require_file(path, "synthetic spec")?;
            let backend = SyntheticBackend::from_file(path)
                .with_context(|| format!("loading synthetic spec {}", path.display()))?;
            Ok(Box::new(backend))
        }
        BackendSpec::Record(path) => {
            let inner = match record_from {
                None => return Err(ConfigError("a record: backend needs --record-from".into()).into()),
                Some(BackendSpec::Record(_)) => {
                    return Err(ConfigError("--record-from cannot itself be a record: backend".into()).into())
                }
                Some(inner) => open(inner, None)?,
            };
            Ok(Box::new(RecordingBackend::new(inner, path.clone())?))
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), ConfigError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ConfigError(format!("{what} {} does not exist", path.display())))
    }
}
