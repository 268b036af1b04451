//! Text generation: the backend abstraction, output parsing, and the
//! windowed chaptering controller.
//!
//! Backends are registered by name in a [`BackendRegistry`]; the built-in
//! ones are `mock` (deterministic, driven by marker lines in the prompt) and
//! `http` (an OpenAI-compatible chat-completions client).

mod http;
mod mock;
mod parse;
mod window;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::{HttpBackend, API_KEY_ENV};
pub use mock::{MockBackend, CHAPTER_MARKER};
pub use parse::{parse_chapter_lines, parse_chapter_output, write_chapters, ParseReport};
pub use window::{
    chapter_video, partition_windows, RunReport, WindowMode, WindowReport, WindowingConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorRequest {
    pub prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl GeneratorRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GeneratorRequest {
            prompt: prompt.into(),
            max_output_tokens: 1024,
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.trim().is_empty() {
            return Err(Error::EmptyPrompt);
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidOptions(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorResponse {
    pub raw_text: String,
    pub usage: Option<Usage>,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn complete(&self, req: &GeneratorRequest) -> Result<GeneratorResponse>;
}

/// Checks the request, then forwards it to the backend.
pub fn generate(backend: &dyn Backend, req: &GeneratorRequest) -> Result<GeneratorResponse> {
    req.validate()?;
    backend.complete(req)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: String,
    pub base_url: String,
    pub model: String,
    /// Extra attempts after the first one.
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: "mock".into(),
            base_url: "http://127.0.0.1:8000".into(),
            model: "chapter-llama".into(),
            retries: 3,
            backoff_ms: 500,
            timeout_secs: 120,
            max_output_tokens: 1024,
            temperature: 0.0,
        }
    }
}

type BackendFactory = fn(&BackendConfig) -> Result<Arc<dyn Backend>>;

pub struct BackendRegistry(BTreeMap<&'static str, BackendFactory>);

impl Default for BackendRegistry {
    fn default() -> Self {
        BackendRegistry::empty()
            .with("mock", |_| Ok(Arc::new(MockBackend)))
            .with("http", |cfg| Ok(Arc::new(HttpBackend::from_config(cfg)?)))
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry(BTreeMap::new())
    }

    pub fn with(mut self, name: &'static str, factory: BackendFactory) -> Self {
        self.0.insert(name, factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.0.keys().copied()
    }

    pub fn build(&self, cfg: &BackendConfig) -> Result<Arc<dyn Backend>> {
        let factory = self
            .0
            .get(cfg.kind.as_str())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "backend",
                name: cfg.kind.clone(),
                available: self.names().collect::<Vec<_>>().join(", "),
            })?;
        factory(cfg)
    }
}
