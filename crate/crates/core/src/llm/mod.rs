//! Language-model access: prompt templates, completion backends, reply parsing.

mod cassette;
mod http;
pub mod mock;
mod parse;
mod template;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use cassette::{prompt_digest, Cassette, CassetteEntry, CassetteError, CassetteKey, RecordingBackend, ScriptedBackend};
pub use http::HttpBackend;
pub use parse::{
    extract_json, parse_cok_response, render_cok_response, CokParseError, ExtractError, ADDED_MARKER,
    UPDATED_MARKER,
};
pub use template::{bindings, render_prompt, Bindings, TemplateError, TemplateId, ERROR_DIMENSIONS};

pub const DEFAULT_TEMPERATURE: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub temperature: f64,
    /// Which template produced the prompt; part of the replay key.
    pub template: TemplateId,
    /// Pipeline turn that issued the call.
    pub turn: usize,
    /// Re-ask counter for identical prompts within one turn.
    pub attempt: u32,
}

impl LlmRequest {
    pub fn new(template: TemplateId, turn: usize, prompt: impl Into<String>) -> Self {
        LlmRequest {
            prompt: prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            template,
            turn,
            attempt: 0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, LlmError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(LlmError::InvalidTemperature(temperature));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn with_attempt(mut self, attempt: u32) -> Self {
        self.attempt = attempt;
        self
    }

    pub fn key(&self) -> CassetteKey {
        CassetteKey {
            template: self.template,
            turn: self.turn,
            digest: prompt_digest(&self.prompt),
            attempt: self.attempt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    #[serde(default)]
    pub meta: IndexMap<String, String>,
}

impl LlmResponse {
    pub fn new(text: impl Into<String>, backend: &str) -> Self {
        let mut meta = IndexMap::new();
        meta.insert("backend".to_string(), backend.to_string());
        LlmResponse {
            text: text.into(),
            meta,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("temperature {0} outside [0, 2]")]
    InvalidTemperature(f64),
    #[error("http transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("backend reply is not usable: {0}")]
    BadReply(String),
    #[error("no recorded response for template `{template}` at turn {turn} (digest {digest}, attempt {attempt})")]
    CassetteMiss {
        template: TemplateId,
        turn: usize,
        digest: String,
        attempt: u32,
    },
    #[error(transparent)]
    Cassette(#[from] CassetteError),
}

/// A text-completion service. Implementations must tolerate concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;

    fn name(&self) -> &str;
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

pub fn complete(backend: &dyn LlmBackend, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
    backend.complete(request)
}

/// Backend driven by a closure. Handy for tests and one-off adapters.
pub struct FnBackend<F> {
    name: String,
    respond: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, respond: F) -> Self {
        FnBackend {
            name: name.into(),
            respond,
        }
    }
}

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (self.respond)(request).map(|text| LlmResponse::new(text, &self.name))
    }

    fn name(&self) -> &str {
        &self.name
    }
}
