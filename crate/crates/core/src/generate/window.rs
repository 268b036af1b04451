use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::parse::{coerce_to_zero, parse_chapter_lines, ParseReport};
use super::{generate, Backend, GeneratorRequest};
use crate::error::{Error, Result};
use crate::model::{Chapter, ChapterSet, Timestamp, VideoDocument};
use crate::prompt::{
    build_prompt, build_transcript, join_lines, template_overhead, PromptOptions, TokenCounter,
    TranscriptLine,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    /// Every window is sent and the results merged.
    #[default]
    Iterative,
    /// Only the first window is sent; the rest of the transcript is ignored.
    FirstOnly,
}

#[derive(Clone)]
pub struct WindowingConfig {
    /// Budget for the transcript lines of one window.
    pub window_tokens: usize,
    pub counter: Arc<dyn TokenCounter>,
    pub mode: WindowMode,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl WindowingConfig {
    pub fn new(window_tokens: usize, counter: Arc<dyn TokenCounter>) -> Self {
        WindowingConfig {
            window_tokens,
            counter,
            mode: WindowMode::Iterative,
            max_output_tokens: 1024,
            temperature: 0.0,
        }
    }

    pub fn with_mode(mut self, mode: WindowMode) -> Self {
        self.mode = mode;
        self
    }
}

impl std::fmt::Debug for WindowingConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WindowingConfig")
            .field("window_tokens", &self.window_tokens)
            .field("counter", &self.counter.name())
            .field("mode", &self.mode)
            .field("max_output_tokens", &self.max_output_tokens)
            .field("temperature", &self.temperature)
            .finish()
    }
}

/// Greedy packing of consecutive lines under `budget` tokens. A line larger
/// than the budget gets a window of its own.
pub fn partition_windows(lines: &[TranscriptLine], budget: usize) -> Vec<Range<usize>> {
    let mut windows = Vec::new();
    let mut begin = 0;
    let mut used = 0;
    for (i, line) in lines.iter().enumerate() {
        if i > begin && used + line.token_count > budget {
            windows.push(begin..i);
            begin = i;
            used = 0;
        }
        used += line.token_count;
    }
    if begin < lines.len() {
        windows.push(begin..lines.len());
    }
    windows
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowReport {
    pub index: usize,
    pub lines: usize,
    pub transcript_tokens: usize,
    pub prompt_tokens: usize,
    pub first_start: Timestamp,
    pub chapters_parsed: usize,
    /// Chapters starting before this window's first line.
    pub dropped_out_of_window: usize,
    pub contributed_nothing: bool,
    pub parse: ParseReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub video_id: String,
    pub mode: WindowMode,
    pub window_tokens: usize,
    pub template_overhead: usize,
    pub total_windows: usize,
    pub windows_used: usize,
    pub windows: Vec<WindowReport>,
    pub empty_windows: usize,
    pub dropped_out_of_window: usize,
    /// Entries dropped when concatenating windows.
    pub dropped_merge: usize,
    pub parse: ParseReport,
    pub chapters: usize,
}

/// Chapters a video by sending its transcript window by window.
///
/// Every window reuses the full prompt template with the whole-video
/// duration. Window outputs are concatenated in order and made strictly
/// increasing; the first chapter is moved to 00:00:00 only at the end.
pub fn chapter_video(
    doc: &VideoDocument,
    opts: &PromptOptions,
    backend: &dyn Backend,
    windowing: &WindowingConfig,
) -> Result<(ChapterSet, RunReport)> {
    let counter = windowing.counter.as_ref();
    let overhead = template_overhead(counter, doc, opts);
    if windowing.window_tokens <= overhead {
        return Err(Error::Config(format!(
            "window of {} tokens does not exceed the {overhead}-token prompt template",
            windowing.window_tokens
        )));
    }
    let lines = build_transcript(doc, opts, counter)?;
    let windows = partition_windows(&lines, windowing.window_tokens);
    let to_send = match windowing.mode {
        WindowMode::Iterative => windows.len(),
        WindowMode::FirstOnly => 1,
    };

    let mut report = RunReport {
        video_id: doc.video_id().to_string(),
        mode: windowing.mode,
        window_tokens: windowing.window_tokens,
        template_overhead: overhead,
        total_windows: windows.len(),
        windows_used: to_send,
        windows: Vec::with_capacity(to_send),
        empty_windows: 0,
        dropped_out_of_window: 0,
        dropped_merge: 0,
        parse: ParseReport::default(),
        chapters: 0,
    };
    let mut merged: Vec<Chapter> = Vec::new();

    for (index, range) in windows.into_iter().take(to_send).enumerate() {
        let window_lines = &lines[range];
        let first_start = doc.utterances()[window_lines[0].source_index].start();
        let prompt = build_prompt(doc, &join_lines(window_lines), opts);
        let request = GeneratorRequest {
            max_output_tokens: windowing.max_output_tokens,
            temperature: windowing.temperature,
            ..GeneratorRequest::new(prompt)
        };
        let response = generate(backend, &request).map_err(|e| Error::Window {
            window: index,
            source: Box::new(e),
        })?;
        let (parsed, parse) = parse_chapter_lines(&response.raw_text, doc.duration());
        if index == 0 && parsed.is_empty() {
            return Err(Error::NoChaptersParsed {
                raw: response.raw_text,
            });
        }
        let chapters_parsed = parsed.len();
        let mut dropped_out_of_window = 0;
        let mut contributed = 0;
        for chapter in parsed {
            if index > 0 && chapter.start() < first_start {
                dropped_out_of_window += 1;
            } else if merged.last().is_some_and(|c| chapter.start() <= c.start()) {
                report.dropped_merge += 1;
            } else {
                merged.push(chapter);
                contributed += 1;
            }
        }
        if contributed == 0 {
            report.empty_windows += 1;
            log::debug!("{}: window {index} contributed nothing", doc.video_id());
        }
        report.dropped_out_of_window += dropped_out_of_window;
        report.parse.absorb(&parse);
        report.windows.push(WindowReport {
            index,
            lines: window_lines.len(),
            transcript_tokens: window_lines.iter().map(|l| l.token_count).sum(),
            prompt_tokens: counter.count(&request.prompt),
            first_start,
            chapters_parsed,
            dropped_out_of_window,
            contributed_nothing: contributed == 0,
            parse,
        });
    }

    let merged = coerce_to_zero(merged, &mut report.parse)
        .expect("first window contributed at least one chapter");
    let chapters = ChapterSet::new(merged, doc.duration())?;
    report.chapters = chapters.len();
    Ok((chapters, report))
}
