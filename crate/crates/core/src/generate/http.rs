use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendConfig, GeneratorRequest, GeneratorResponse, Usage};
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "CHAPTERFORGE_API_KEY";

const BODY_EXCERPT_CHARS: usize = 512;
const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

/// Client for `POST {base_url}/v1/chat/completions`. The prompt travels as a
/// single user message.
///
/// Transport failures, 429 and 5xx responses are retried with exponential
/// backoff. Other non-2xx statuses and unparseable bodies fail immediately.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retries: u32,
    backoff: Duration,
}

enum Attempt {
    Done(GeneratorResponse),
    Retry(Error),
    Fatal(Error),
}

impl HttpBackend {
    /// Reads the bearer token from [`API_KEY_ENV`] when set.
    pub fn from_config(cfg: &BackendConfig) -> Result<Self> {
        if cfg.base_url.trim().is_empty() {
            return Err(Error::Config("backend.base_url is empty".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            agent,
            endpoint: format!("{}/v1/chat/completions", cfg.base_url.trim_end_matches('/')),
            model: cfg.model.clone(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            retries: cfg.retries,
            backoff: Duration::from_millis(cfg.backoff_ms),
        })
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, req: &GeneratorRequest) -> Attempt {
        let body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": req.prompt }],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = match call.send_json(&body) {
            Ok(resp) => resp,
            Err(e) => {
                return Attempt::Retry(Error::Transport {
                    attempts: 0,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(text) => text,
            Err(e) => {
                return Attempt::Retry(Error::Transport {
                    attempts: 0,
                    message: e.to_string(),
                })
            }
        };
        if !(200..300).contains(&status) {
            let err = Error::Protocol {
                status,
                body: excerpt(&text),
            };
            return if status == 429 || status >= 500 {
                Attempt::Retry(err)
            } else {
                Attempt::Fatal(err)
            };
        }
        let malformed = |detail: &str| {
            Attempt::Fatal(Error::Protocol {
                status,
                body: format!("{detail}: {}", excerpt(&text)),
            })
        };
        let parsed: CompletionResponse = match serde_json::from_str(&text) {
            Ok(p) => p,
            Err(e) => return malformed(&format!("malformed response JSON ({e})")),
        };
        match parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
        {
            Some(raw_text) => Attempt::Done(GeneratorResponse {
                raw_text,
                usage: parsed.usage,
            }),
            None => malformed("response has no choices[0].message.content"),
        }
    }
}

fn excerpt(text: &str) -> String {
    match text.char_indices().nth(BODY_EXCERPT_CHARS) {
        Some((i, _)) => format!("{}...", &text[..i]),
        None => text.to_string(),
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &'static str {
        "http"
    }

    fn complete(&self, req: &GeneratorRequest) -> Result<GeneratorResponse> {
        let attempts = self.retries as usize + 1;
        let mut delay = self.backoff;
        for attempt in 1..=attempts {
            match self.attempt(req) {
                Attempt::Done(resp) => return Ok(resp),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if attempt == attempts => {
                    return Err(match e {
                        Error::Transport { message, .. } => Error::Transport { attempts, message },
                        other => other,
                    })
                }
                Attempt::Retry(e) => {
                    log::warn!("{} attempt {attempt}/{attempts} failed: {e}", self.endpoint);
                    thread::sleep(delay);
                    delay = (delay * 2).min(MAX_BACKOFF);
                }
            }
        }
        unreachable!("loop returns on the final attempt")
    }
}
