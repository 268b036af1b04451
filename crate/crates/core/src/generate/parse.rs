use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{parse_timestamp, Chapter, ChapterSet, Timestamp};

static OUTPUT_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{2}:\d{2}:\d{2}) -(?: (.*))?$").unwrap());

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    /// Non-blank lines that are not `HH:MM:SS - Title` entries.
    pub discarded_lines: usize,
    /// Entries moved back inside the video.
    pub clamped: usize,
    /// Entries not after the previously kept start.
    pub dropped_non_monotonic: usize,
    pub coerced_first_to_zero: bool,
}

impl ParseReport {
    pub fn is_clean(&self) -> bool {
        *self == ParseReport::default()
    }

    pub(crate) fn absorb(&mut self, other: &ParseReport) {
        self.discarded_lines += other.discarded_lines;
        self.clamped += other.clamped;
        self.dropped_non_monotonic += other.dropped_non_monotonic;
        self.coerced_first_to_zero |= other.coerced_first_to_zero;
    }
}

/// Extracts chapter entries from raw model output without forcing the first
/// one to start at zero. Starts are clamped into `[0, duration - 1]` and any
/// entry not strictly after the last kept one is dropped.
pub fn parse_chapter_lines(raw: &str, duration: Timestamp) -> (Vec<Chapter>, ParseReport) {
    let mut report = ParseReport::default();
    let mut kept: Vec<Chapter> = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let entry = OUTPUT_LINE.captures(line).and_then(|caps| {
            let start = parse_timestamp(&caps[1]).ok()?;
            let title = caps.get(2).map_or("", |m| m.as_str()).replace('\r', " ");
            Some((start, title))
        });
        let Some((mut start, title)) = entry else {
            report.discarded_lines += 1;
            continue;
        };
        if duration.seconds() == 0 {
            report.discarded_lines += 1;
            continue;
        }
        if start >= duration {
            start = Timestamp::new(duration.seconds() - 1).expect("below duration");
            report.clamped += 1;
        }
        if kept.last().is_some_and(|prev| start <= prev.start()) {
            report.dropped_non_monotonic += 1;
            continue;
        }
        kept.push(Chapter::new(start, title).expect("title has no line breaks"));
    }
    (kept, report)
}

/// Parses model output into a chapter set covering the whole video.
pub fn parse_chapter_output(raw: &str, duration: Timestamp) -> Result<(ChapterSet, ParseReport)> {
    let (chapters, mut report) = parse_chapter_lines(raw, duration);
    let chapters =
        coerce_to_zero(chapters, &mut report).ok_or_else(|| Error::NoChaptersParsed {
            raw: raw.to_string(),
        })?;
    Ok((ChapterSet::new(chapters, duration)?, report))
}

/// Moves the first start to 00:00:00 so the chapters span the video.
pub(crate) fn coerce_to_zero(
    mut chapters: Vec<Chapter>,
    report: &mut ParseReport,
) -> Option<Vec<Chapter>> {
    let first = chapters.first_mut()?;
    if first.start() > Timestamp::ZERO {
        *first = Chapter::new(Timestamp::ZERO, first.title()).expect("title already valid");
        report.coerced_first_to_zero = true;
    }
    Some(chapters)
}

/// One `HH:MM:SS - Title` line per chapter.
pub fn write_chapters(cs: &ChapterSet) -> String {
    let mut out = String::new();
    for c in cs.chapters() {
        out.push_str(&c.start().to_string());
        out.push_str(" - ");
        out.push_str(c.title());
        out.push('\n');
    }
    out
}
