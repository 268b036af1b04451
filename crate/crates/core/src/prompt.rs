//! Prompt serialization: transcript lines, the instruction template, and
//! token accounting.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Modality, TimedUtterance, VideoDocument};

pub const TASK_BOTH: &str =
    "use the provided captions and ASR transcript to identify distinct chapters based on content shifts.";
pub const TASK_SPEECH: &str =
    "use the provided ASR transcript to identify distinct chapters based on content shifts.";
pub const TASK_CAPTIONS: &str =
    "use the provided captions to identify distinct chapters based on content shifts.";

const TEMPLATE_HEAD: &str = "Given the complete transcript of a video of duration ";
const TEMPLATE_TAIL: &str = " Identify the approximate start time of each chapter in the format \
'hh:mm:ss - Title'. Ensure each chapter entry is on a new line. Focus on significant topic \
changes that would merit a new chapter in a video, but do not provide summaries of the chapters.\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptOptions {
    pub include_speech: bool,
    pub include_captions: bool,
    pub modality_prefixes: bool,
    pub include_asr_end: bool,
    /// Overrides the modality-dependent default task sentence.
    pub task_text: Option<String>,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            include_speech: true,
            include_captions: true,
            modality_prefixes: true,
            include_asr_end: false,
            task_text: None,
        }
    }
}

impl PromptOptions {
    pub fn speech_only() -> Self {
        PromptOptions {
            include_captions: false,
            ..Default::default()
        }
    }

    pub fn captions_only() -> Self {
        PromptOptions {
            include_speech: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.include_speech && !self.include_captions {
            return Err(Error::InvalidOptions(
                "at least one of speech or captions must be included".into(),
            ));
        }
        if let Some(task) = &self.task_text {
            if task.trim().is_empty() {
                return Err(Error::InvalidOptions("task text is empty".into()));
            }
        }
        Ok(())
    }

    pub fn task(&self) -> &str {
        match (&self.task_text, self.include_speech, self.include_captions) {
            (Some(t), _, _) => t,
            (None, true, true) => TASK_BOTH,
            (None, true, false) => TASK_SPEECH,
            (None, false, _) => TASK_CAPTIONS,
        }
    }

    /// Prefixes only appear when both modalities share the transcript.
    pub fn uses_prefixes(&self) -> bool {
        self.modality_prefixes && self.include_speech && self.include_captions
    }

    fn accepts(&self, m: Modality) -> bool {
        match m {
            Modality::Speech => self.include_speech,
            Modality::Caption => self.include_captions,
        }
    }
}

/// Maps text to a token count. Implementations must return 0 for the empty
/// string and be monotone under concatenation.
pub trait TokenCounter: Send + Sync {
    fn name(&self) -> &'static str;
    fn count(&self, text: &str) -> usize;
}

/// `ceil(utf8_len / 4)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteHeuristicCounter;

impl TokenCounter for ByteHeuristicCounter {
    fn name(&self) -> &'static str {
        "bytes4"
    }

    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }
}

/// One token per whitespace-separated word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn name(&self) -> &'static str {
        "words"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

pub fn default_counter() -> Arc<dyn TokenCounter> {
    Arc::new(ByteHeuristicCounter)
}

pub const TOKEN_COUNTERS: &[&str] = &["bytes4", "words"];

pub fn token_counter(name: &str) -> Result<Arc<dyn TokenCounter>> {
    match name {
        "bytes4" => Ok(Arc::new(ByteHeuristicCounter)),
        "words" => Ok(Arc::new(WhitespaceCounter)),
        _ => Err(Error::UnknownStrategy {
            kind: "token counter",
            name: name.to_string(),
            available: TOKEN_COUNTERS.join(", "),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptLine {
    pub source_index: usize,
    /// Without the trailing newline.
    pub rendered: String,
    pub token_count: usize,
}

/// Renders `[ASR |Caption ]HH:MM:SS[ - HH:MM:SS]: text`.
pub fn render_line(u: &TimedUtterance, opts: &PromptOptions) -> String {
    let mut out = String::with_capacity(u.text().len() + 24);
    if opts.uses_prefixes() {
        out.push_str(u.modality().prefix());
        out.push(' ');
    }
    out.push_str(&u.start().to_string());
    if opts.include_asr_end {
        if let Some(end) = u.end() {
            out.push_str(" - ");
            out.push_str(&end.to_string());
        }
    }
    out.push_str(": ");
    out.push_str(u.text());
    out
}

/// Lines for every utterance that passes the modality filter, in document
/// order: (start, Speech before Caption, file order).
pub fn build_transcript(
    doc: &VideoDocument,
    opts: &PromptOptions,
    counter: &dyn TokenCounter,
) -> Result<Vec<TranscriptLine>> {
    opts.validate()?;
    let lines: Vec<_> = doc
        .utterances()
        .iter()
        .enumerate()
        .filter(|(_, u)| opts.accepts(u.modality()))
        .map(|(source_index, u)| {
            let rendered = render_line(u, opts);
            TranscriptLine {
                source_index,
                token_count: counter.count(&rendered),
                rendered,
            }
        })
        .collect();
    if lines.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    Ok(lines)
}

/// Joins lines, each terminated by a single newline.
pub fn join_lines(lines: &[TranscriptLine]) -> String {
    let mut out = String::with_capacity(lines.iter().map(|l| l.rendered.len() + 1).sum());
    for l in lines {
        out.push_str(&l.rendered);
        out.push('\n');
    }
    out
}

/// Instantiates the instruction template. The template's sentence after
/// `{task}` ends with a period, which is supplied by the task sentence
/// itself when present.
pub fn build_prompt(doc: &VideoDocument, transcript_text: &str, opts: &PromptOptions) -> String {
    let task = opts.task().trim();
    let mut out = String::with_capacity(
        TEMPLATE_HEAD.len() + task.len() + TEMPLATE_TAIL.len() + transcript_text.len() + 12,
    );
    out.push_str(TEMPLATE_HEAD);
    out.push_str(&doc.duration().to_string());
    out.push_str(", ");
    out.push_str(task);
    if !task.ends_with('.') {
        out.push('.');
    }
    out.push_str(TEMPLATE_TAIL);
    out.push_str(transcript_text);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TokenTally {
    pub per_line: Vec<usize>,
    pub total: usize,
    /// Tokens of the instantiated template with an empty transcript.
    pub template_overhead: usize,
}

pub fn count_tokens(
    counter: &dyn TokenCounter,
    lines: &[TranscriptLine],
    doc: &VideoDocument,
    opts: &PromptOptions,
) -> TokenTally {
    let per_line: Vec<usize> = lines.iter().map(|l| counter.count(&l.rendered)).collect();
    TokenTally {
        total: per_line.iter().sum(),
        per_line,
        template_overhead: template_overhead(counter, doc, opts),
    }
}

pub fn template_overhead(
    counter: &dyn TokenCounter,
    doc: &VideoDocument,
    opts: &PromptOptions,
) -> usize {
    counter.count(&build_prompt(doc, "", opts))
}
