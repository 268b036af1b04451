//! Loaders for ASR, caption, chapter, and manifest files.
//!
//! ASR and caption files are JSON Lines. Chapter files are plain text with
//! one `HH:MM:SS - Title` entry per line; a non-blank line without a
//! leading timestamp continues the previous title (wrapped listings).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    parse_timestamp, sort_utterances, Chapter, ChapterSet, TimedUtterance, Timestamp, VideoDocument,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsrRecord {
    pub start: f64,
    pub end: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionRecord {
    pub time: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoadedUtterances {
    pub utterances: Vec<TimedUtterance>,
    /// Records starting after the video duration.
    pub dropped: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Yields `(line_number, record)` for every non-blank line.
fn jsonl_records<'a, T: serde::de::DeserializeOwned>(
    text: &'a str,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, T)>> + 'a {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(move |(i, line)| {
            serde_json::from_str(line)
                .map(|r| (i + 1, r))
                .map_err(|e| Error::Record {
                    path: path.to_path_buf(),
                    index: i + 1,
                    message: e.to_string(),
                })
        })
}

fn record_err(path: &Path, index: usize, e: Error) -> Error {
    Error::Record {
        path: path.to_path_buf(),
        index,
        message: e.to_string(),
    }
}

/// Parses ASR JSONL text. Record indices in errors are 1-based line numbers.
pub fn parse_asr(text: &str, path: &Path, duration: Timestamp) -> Result<LoadedUtterances> {
    let mut out = LoadedUtterances::default();
    for record in jsonl_records::<AsrRecord>(text, path) {
        let (index, r) = record?;
        if r.start > r.end {
            return Err(Error::Record {
                path: path.to_path_buf(),
                index,
                message: format!("start {} is after end {}", r.start, r.end),
            });
        }
        let start = Timestamp::from_secs_f64(r.start).map_err(|e| record_err(path, index, e))?;
        if start > duration {
            out.dropped += 1;
            continue;
        }
        let end = Timestamp::from_secs_f64(r.end).map_err(|e| record_err(path, index, e))?;
        let u = TimedUtterance::speech(start, Some(end), r.text)
            .map_err(|e| record_err(path, index, e))?;
        out.utterances.push(u);
    }
    if out.dropped > 0 {
        log::warn!(
            "{}: dropped {} ASR record(s) past {duration}",
            path.display(),
            out.dropped
        );
    }
    sort_utterances(&mut out.utterances);
    Ok(out)
}

pub fn load_asr(path: impl AsRef<Path>, duration: Timestamp) -> Result<LoadedUtterances> {
    let path = path.as_ref();
    parse_asr(&read(path)?, path, duration)
}

pub fn parse_captions(text: &str, path: &Path, duration: Timestamp) -> Result<LoadedUtterances> {
    let mut out = LoadedUtterances::default();
    for record in jsonl_records::<CaptionRecord>(text, path) {
        let (index, r) = record?;
        let time = Timestamp::from_secs_f64(r.time).map_err(|e| record_err(path, index, e))?;
        if time > duration {
            out.dropped += 1;
            continue;
        }
        let u = TimedUtterance::caption(time, r.text).map_err(|e| record_err(path, index, e))?;
        out.utterances.push(u);
    }
    if out.dropped > 0 {
        log::warn!(
            "{}: dropped {} caption record(s) past {duration}",
            path.display(),
            out.dropped
        );
    }
    sort_utterances(&mut out.utterances);
    Ok(out)
}

pub fn load_captions(path: impl AsRef<Path>, duration: Timestamp) -> Result<LoadedUtterances> {
    let path = path.as_ref();
    parse_captions(&read(path)?, path, duration)
}

static CHAPTER_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{2}:\d{2}:\d{2}) -(?: (.*))?$").unwrap());

/// Parses chapter-file text.
pub fn parse_chapters(text: &str, path: &Path, duration: Timestamp) -> Result<ChapterSet> {
    let err = |line: usize, message: String| Error::ChapterFile {
        path: path.to_path_buf(),
        line,
        message,
    };
    // (line number, start, title pieces)
    let mut entries: Vec<(usize, Timestamp, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        match CHAPTER_LINE.captures(line) {
            Some(caps) => {
                let start = parse_timestamp(&caps[1]).map_err(|e| err(lineno, e.to_string()))?;
                let title = caps.get(2).map_or("", |m| m.as_str()).trim().to_string();
                entries.push((lineno, start, title));
            }
            None => match entries.last_mut() {
                Some((_, _, title)) => {
                    let piece = line.trim();
                    if !title.is_empty() {
                        title.push(' ');
                    }
                    title.push_str(piece);
                }
                None => {
                    return Err(err(
                        lineno,
                        "first entry lacks an HH:MM:SS timestamp".to_string(),
                    ))
                }
            },
        }
    }
    if entries.is_empty() {
        return Err(err(0, "no chapter entries".to_string()));
    }
    for pair in entries.windows(2) {
        let (prev_line, prev, _) = &pair[0];
        let (line, start, _) = &pair[1];
        if start <= prev {
            return Err(err(
                *line,
                format!("start {start} does not follow {prev} on line {prev_line}"),
            ));
        }
    }
    let (last_line, last, _) = &entries[entries.len() - 1];
    if *last >= duration {
        return Err(err(
            *last_line,
            format!("start {last} is not before duration {duration}"),
        ));
    }
    let chapters = entries
        .into_iter()
        .map(|(lineno, start, title)| {
            Chapter::new(start, title).map_err(|e| err(lineno, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    ChapterSet::new(chapters, duration)
}

pub fn load_chapters(path: impl AsRef<Path>, duration: Timestamp) -> Result<ChapterSet> {
    let path = path.as_ref();
    parse_chapters(&read(path)?, path, duration)
}

/// One video in a corpus manifest. Relative paths are resolved against the
/// manifest's directory by [`read_manifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub duration: f64,
    pub asr: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub chapters: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn duration(&self) -> Result<Timestamp> {
        Timestamp::from_secs_f64(self.duration)
            .map_err(|e| Error::InvalidDocument(format!("{}: {e}", self.video_id)))
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
    jsonl_records::<ManifestEntry>(&text, path)
        .map(|r| {
            r.map(|(_, e)| ManifestEntry {
                asr: resolve(e.asr),
                captions: resolve(e.captions),
                chapters: resolve(e.chapters),
                ..e
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedDocument {
    pub document: VideoDocument,
    pub dropped_asr: usize,
    pub dropped_captions: usize,
}

/// Loads the ASR and caption files named by a manifest entry.
pub fn load_document(entry: &ManifestEntry) -> Result<LoadedDocument> {
    let duration = entry.duration()?;
    let mut utterances = Vec::new();
    let mut dropped_asr = 0;
    let mut dropped_captions = 0;
    if let Some(p) = &entry.asr {
        let loaded = load_asr(p, duration)?;
        dropped_asr = loaded.dropped;
        utterances.extend(loaded.utterances);
    }
    if let Some(p) = &entry.captions {
        let loaded = load_captions(p, duration)?;
        dropped_captions = loaded.dropped;
        utterances.extend(loaded.utterances);
    }
    Ok(LoadedDocument {
        document: VideoDocument::new(entry.video_id.clone(), duration, utterances)?,
        dropped_asr,
        dropped_captions,
    })
}
