//! Core domain types shared by every stage of the pipeline.
//!
//! A chapter only carries its start time; its end is implied by the next
//! chapter's start or by the video duration. [`ChapterSet::segments`]
//! materializes those implicit intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whole seconds from the start of a video.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(u32);

impl Timestamp {
    /// 99:59:59
    pub const MAX_SECONDS: u32 = 359_999;
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn new(seconds: u32) -> Result<Self> {
        if seconds > Self::MAX_SECONDS {
            return Err(Error::TimestampRange(seconds as u64));
        }
        Ok(Timestamp(seconds))
    }

    /// Floors a fractional time. Negative and NaN inputs are rejected.
    pub fn from_secs_f64(seconds: f64) -> Result<Self> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(Error::InvalidUtterance(format!(
                "time {seconds} is not a non-negative finite number"
            )));
        }
        let floored = seconds.floor();
        if floored > Self::MAX_SECONDS as f64 {
            return Err(Error::TimestampRange(floored as u64));
        }
        Ok(Timestamp(floored as u32))
    }

    pub fn seconds(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        write!(f, "{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
    }
}

/// Renders `HH:MM:SS`.
pub fn format_timestamp(t: Timestamp) -> String {
    t.to_string()
}

/// Parses exactly `HH:MM:SS`; minutes and seconds must be below 60.
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let bytes = s.as_bytes();
    let fail = |offset: usize, reason: &'static str| Error::TimestampParse {
        input: s.to_string(),
        offset,
        reason,
    };
    let mut fields = [0u32; 3];
    for (i, &b) in bytes.iter().enumerate().take(8) {
        match i {
            2 | 5 => {
                if b != b':' {
                    return Err(fail(i, "expected ':'"));
                }
            }
            _ => {
                if !b.is_ascii_digit() {
                    return Err(fail(i, "expected digit"));
                }
                fields[i / 3] = fields[i / 3] * 10 + (b - b'0') as u32;
            }
        }
    }
    if bytes.len() < 8 {
        return Err(fail(bytes.len(), "unexpected end of input"));
    }
    if bytes.len() > 8 {
        return Err(fail(8, "trailing characters"));
    }
    let [h, m, sec] = fields;
    if m >= 60 {
        return Err(fail(3, "minutes out of range"));
    }
    if sec >= 60 {
        return Err(fail(6, "seconds out of range"));
    }
    Ok(Timestamp(h * 3600 + m * 60 + sec))
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_timestamp(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    Speech,
    Caption,
}

impl Modality {
    /// Prefix used when both modalities share one transcript.
    pub fn prefix(self) -> &'static str {
        match self {
            Modality::Speech => "ASR",
            Modality::Caption => "Caption",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedUtterance {
    modality: Modality,
    start: Timestamp,
    end: Option<Timestamp>,
    text: String,
}

impl TimedUtterance {
    pub fn speech(
        start: Timestamp,
        end: Option<Timestamp>,
        text: impl Into<String>,
    ) -> Result<Self> {
        let text = text.into();
        if let Some(end) = end {
            if end < start {
                return Err(Error::InvalidUtterance(format!(
                    "end {end} precedes start {start}"
                )));
            }
        }
        Self::checked(Modality::Speech, start, end, text)
    }

    pub fn caption(time: Timestamp, text: impl Into<String>) -> Result<Self> {
        Self::checked(Modality::Caption, time, None, text.into())
    }

    fn checked(
        modality: Modality,
        start: Timestamp,
        end: Option<Timestamp>,
        text: String,
    ) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::InvalidUtterance(format!(
                "{} record at {start} has empty text",
                modality.prefix()
            )));
        }
        // one record must render as exactly one transcript line
        let text = if text.contains(['\n', '\r']) {
            text.split(['\n', '\r'])
                .filter(|p| !p.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
        } else {
            text
        };
        Ok(TimedUtterance {
            modality,
            start,
            end,
            text,
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Option<Timestamp> {
        self.end
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Sorts by (start, Speech before Caption). Stable, so equal keys keep
/// their input order.
pub fn sort_utterances(utterances: &mut [TimedUtterance]) {
    utterances.sort_by_key(|u| (u.start, u.modality));
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoDocument {
    video_id: String,
    duration: Timestamp,
    utterances: Vec<TimedUtterance>,
}

impl VideoDocument {
    pub fn new(
        video_id: impl Into<String>,
        duration: Timestamp,
        mut utterances: Vec<TimedUtterance>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if let Some(u) = utterances.iter().find(|u| u.start > duration) {
            return Err(Error::InvalidDocument(format!(
                "{video_id}: utterance at {} starts after duration {duration}",
                u.start
            )));
        }
        sort_utterances(&mut utterances);
        Ok(VideoDocument {
            video_id,
            duration,
            utterances,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn duration(&self) -> Timestamp {
        self.duration
    }

    pub fn utterances(&self) -> &[TimedUtterance] {
        &self.utterances
    }

    pub fn has_speech(&self) -> bool {
        self.utterances
            .iter()
            .any(|u| u.modality == Modality::Speech)
    }

    /// Copy of this document keeping only utterances accepted by `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&TimedUtterance) -> bool) -> VideoDocument {
        VideoDocument {
            video_id: self.video_id.clone(),
            duration: self.duration,
            utterances: self
                .utterances
                .iter()
                .filter(|u| keep(u))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chapter {
    start: Timestamp,
    title: String,
}

impl Chapter {
    /// The title is trimmed; embedded line breaks are rejected.
    pub fn new(start: Timestamp, title: impl AsRef<str>) -> Result<Self> {
        let title = title.as_ref().trim();
        if title.contains(['\n', '\r']) {
            return Err(Error::InvalidChapters(format!(
                "title at {start} contains a line break"
            )));
        }
        Ok(Chapter {
            start,
            title: title.to_string(),
        })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn title(&self) -> &str {
        &self.title
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChapterSet {
    chapters: Vec<Chapter>,
    duration: Timestamp,
}

impl ChapterSet {
    pub fn new(chapters: Vec<Chapter>, duration: Timestamp) -> Result<Self> {
        if chapters.is_empty() {
            return Err(Error::InvalidChapters("no chapters".into()));
        }
        for pair in chapters.windows(2) {
            if pair[1].start <= pair[0].start {
                return Err(Error::InvalidChapters(format!(
                    "start {} does not follow {}",
                    pair[1].start, pair[0].start
                )));
            }
        }
        let last = chapters[chapters.len() - 1].start;
        if last >= duration {
            return Err(Error::InvalidChapters(format!(
                "start {last} is not before duration {duration}"
            )));
        }
        Ok(ChapterSet { chapters, duration })
    }

    pub fn chapters(&self) -> &[Chapter] {
        &self.chapters
    }

    pub fn duration(&self) -> Timestamp {
        self.duration
    }

    pub fn len(&self) -> usize {
        self.chapters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chapters.is_empty()
    }

    pub fn starts(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.chapters.iter().map(|c| c.start)
    }

    pub fn segments(&self) -> Vec<Segment> {
        segments_of(self)
    }
}

/// Half-open interval `[begin, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Segment {
    begin: Timestamp,
    end: Timestamp,
}

impl Segment {
    pub fn new(begin: Timestamp, end: Timestamp) -> Result<Self> {
        if begin >= end {
            return Err(Error::InvalidChapters(format!(
                "empty segment [{begin}, {end})"
            )));
        }
        Ok(Segment { begin, end })
    }

    pub fn begin(&self) -> Timestamp {
        self.begin
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn length(&self) -> u32 {
        self.end.0 - self.begin.0
    }

    pub fn intersection(&self, other: &Segment) -> u32 {
        let lo = self.begin.0.max(other.begin.0);
        let hi = self.end.0.min(other.end.0);
        hi.saturating_sub(lo)
    }

    pub fn union(&self, other: &Segment) -> u32 {
        self.length() + other.length() - self.intersection(other)
    }

    /// Intersection over union in `[0, 1]`.
    pub fn iou(&self, other: &Segment) -> f64 {
        self.intersection(other) as f64 / self.union(other) as f64
    }
}

/// Chapter `i` spans `[start_i, start_{i+1})`; the last one runs to the
/// video's end.
pub fn segments_of(cs: &ChapterSet) -> Vec<Segment> {
    let ends = cs
        .chapters
        .iter()
        .skip(1)
        .map(|c| c.start)
        .chain(std::iter::once(cs.duration));
    cs.chapters
        .iter()
        .zip(ends)
        .map(|(c, end)| Segment {
            begin: c.start,
            end,
        })
        .collect()
}
