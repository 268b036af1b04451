use std::sync::LazyLock;

use regex::Regex;

use super::{Backend, GeneratorRequest, GeneratorResponse};
use crate::error::Result;

pub const CHAPTER_MARKER: &str = "§CHAPTER§";

static TRANSCRIPT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:(?:ASR|Caption) )?(\d{2}:\d{2}:\d{2})(?: - \d{2}:\d{2}:\d{2})?: (.*)$")
        .unwrap()
});

/// Emits `HH:MM:SS - Title` for every transcript line whose text contains
/// [`CHAPTER_MARKER`], using that line's timestamp and the text after the
/// marker as the title. Output depends only on the prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl MockBackend {
    pub fn respond(prompt: &str) -> String {
        let mut out = String::new();
        for line in prompt.lines() {
            let Some(caps) = TRANSCRIPT_LINE.captures(line) else {
                continue;
            };
            let text = caps.get(2).map_or("", |m| m.as_str());
            let Some(pos) = text.find(CHAPTER_MARKER) else {
                continue;
            };
            let title = text[pos + CHAPTER_MARKER.len()..].trim();
            out.push_str(&caps[1]);
            out.push_str(" - ");
            out.push_str(title);
            out.push('\n');
        }
        out
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn complete(&self, req: &GeneratorRequest) -> Result<GeneratorResponse> {
        Ok(GeneratorResponse {
            raw_text: Self::respond(&req.prompt),
            usage: None,
        })
    }
}
