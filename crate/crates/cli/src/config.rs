use std::path::Path;

use chapterforge::generate::{BackendConfig, WindowMode, WindowingConfig};
use chapterforge::prompt::{template_overhead, token_counter, PromptOptions};
use chapterforge::{Timestamp, VideoDocument};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingSection {
    pub window_tokens: usize,
    pub mode: WindowMode,
    /// Registered token counter name.
    pub counter: String,
}

impl Default for WindowingSection {
    fn default() -> Self {
        WindowingSection {
            window_tokens: 15_000,
            mode: WindowMode::Iterative,
            counter: "bytes4".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backend: BackendConfig,
    pub windowing: WindowingSection,
    pub prompt: PromptOptions,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, String> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        self.prompt.validate().map_err(|e| e.to_string())?;
        let counter = token_counter(&self.windowing.counter).map_err(|e| e.to_string())?;
        // durations render at a fixed width, so any document gives the same overhead
        let probe =
            VideoDocument::new("probe", Timestamp::ZERO, Vec::new()).map_err(|e| e.to_string())?;
        let overhead = template_overhead(counter.as_ref(), &probe, &self.prompt);
        if self.windowing.window_tokens <= overhead {
            return Err(format!(
                "windowing.window_tokens = {} does not exceed the {overhead}-token prompt template",
                self.windowing.window_tokens
            ));
        }
        Ok(())
    }

    pub fn windowing(&self) -> Result<WindowingConfig, String> {
        let counter = token_counter(&self.windowing.counter).map_err(|e| e.to_string())?;
        let mut w = WindowingConfig::new(self.windowing.window_tokens, counter)
            .with_mode(self.windowing.mode);
        w.max_output_tokens = self.backend.max_output_tokens;
        w.temperature = self.backend.temperature;
        Ok(w)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unprintable: {e}>"))
    }
}
