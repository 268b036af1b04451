//! Frame selection: which timestamps get captioned.
//!
//! Every strategy yields a [`FramePlan`] of at most [`MAX_FRAMES`] strictly
//! increasing timestamps, all before the video's end. Strategies are
//! registered by name in a [`SelectorRegistry`] so callers can pick one at
//! runtime.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChapterSet, Timestamp};

pub const MAX_FRAMES: usize = 100;
pub const FALLBACK_INTERVAL_SECONDS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FrameStrategy {
    Equidistant(u32),
    EveryKSeconds(u32),
    ShotBoundaries,
    SpeechBased,
    NoSpeechFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FramePlan {
    timestamps: Vec<Timestamp>,
    strategy: FrameStrategy,
}

impl FramePlan {
    /// Sorts, deduplicates, drops times at or past `duration`, then keeps
    /// the earliest [`MAX_FRAMES`].
    fn build(mut timestamps: Vec<Timestamp>, duration: Timestamp, strategy: FrameStrategy) -> Self {
        timestamps.retain(|t| *t < duration);
        timestamps.sort_unstable();
        timestamps.dedup();
        timestamps.truncate(MAX_FRAMES);
        FramePlan {
            timestamps,
            strategy,
        }
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn strategy(&self) -> FrameStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// JSONL, one `{"time": <int>}` per frame.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.timestamps {
            out.push_str(&serde_json::json!({ "time": t.seconds() }).to_string());
            out.push('\n');
        }
        out
    }
}

/// Interval midpoints: `floor(duration * (i + 0.5) / n)`.
pub fn select_equidistant(duration: Timestamp, n: u32) -> Result<FramePlan> {
    if n == 0 {
        return Err(Error::InvalidOptions(
            "equidistant frame count must be >= 1".into(),
        ));
    }
    let d = duration.seconds() as u64;
    let n64 = n as u64;
    // nondecreasing in i, so distinct values can be collected in one pass
    let mut times: Vec<Timestamp> = Vec::new();
    for i in 0..n64 {
        let t = Timestamp::new(((2 * i + 1) * d / (2 * n64)) as u32)?;
        if t >= duration || times.len() == MAX_FRAMES {
            break;
        }
        if times.last() != Some(&t) {
            times.push(t);
        }
    }
    Ok(FramePlan::build(
        times,
        duration,
        FrameStrategy::Equidistant(n),
    ))
}

/// `0, k, 2k, ...` below `duration`, at most [`MAX_FRAMES`].
pub fn select_every_k(duration: Timestamp, k: u32) -> Result<FramePlan> {
    Ok(FramePlan::build(
        every_k(duration, k)?,
        duration,
        FrameStrategy::EveryKSeconds(k),
    ))
}

fn every_k(duration: Timestamp, k: u32) -> Result<Vec<Timestamp>> {
    if k == 0 {
        return Err(Error::InvalidOptions(
            "frame interval must be >= 1 s".into(),
        ));
    }
    (0..duration.seconds())
        .step_by(k as usize)
        .take(MAX_FRAMES)
        .map(Timestamp::new)
        .collect()
}

/// One frame at each predicted chapter start.
pub fn select_from_boundaries(predicted: &ChapterSet) -> FramePlan {
    FramePlan::build(
        predicted.starts().collect(),
        predicted.duration(),
        FrameStrategy::SpeechBased,
    )
}

/// The every-10-seconds plan used when a video has no speech at all.
pub fn select_no_speech_fallback(duration: Timestamp, has_speech: bool) -> Result<FramePlan> {
    if has_speech {
        return Err(Error::Misuse(
            "no-speech fallback requested for a video with speech".into(),
        ));
    }
    Ok(FramePlan::build(
        every_k(duration, FALLBACK_INTERVAL_SECONDS)?,
        duration,
        FrameStrategy::NoSpeechFallback,
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShotRecord {
    time: f64,
}

pub fn parse_shot_boundaries(text: &str, path: &Path) -> Result<Vec<Timestamp>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let err = |message: String| Error::Record {
                path: path.to_path_buf(),
                index: i + 1,
                message,
            };
            let r: ShotRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            Timestamp::from_secs_f64(r.time).map_err(|e| err(e.to_string()))
        })
        .collect()
}

pub fn plan_from_shots(shots: &[Timestamp], duration: Timestamp) -> FramePlan {
    let plan = FramePlan::build(shots.to_vec(), duration, FrameStrategy::ShotBoundaries);
    if plan.is_empty() {
        log::warn!("shot-boundary plan is empty");
    }
    plan
}

pub fn load_shot_boundaries(path: impl AsRef<Path>, duration: Timestamp) -> Result<FramePlan> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(plan_from_shots(
        &parse_shot_boundaries(&text, path)?,
        duration,
    ))
}

/// What a selector may look at.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInput<'a> {
    pub duration: Timestamp,
    pub has_speech: bool,
    /// Chapters predicted from speech alone.
    pub predicted: Option<&'a ChapterSet>,
    pub shots: Option<&'a [Timestamp]>,
}

impl<'a> SelectionInput<'a> {
    pub fn new(duration: Timestamp) -> Self {
        SelectionInput {
            duration,
            has_speech: true,
            predicted: None,
            shots: None,
        }
    }
}

pub trait FrameSelector: Send + Sync {
    fn name(&self) -> &'static str;
    fn select(&self, input: &SelectionInput<'_>) -> Result<FramePlan>;
}

pub struct Equidistant {
    pub frames: u32,
}

impl FrameSelector for Equidistant {
    fn name(&self) -> &'static str {
        "equidistant"
    }

    fn select(&self, input: &SelectionInput<'_>) -> Result<FramePlan> {
        select_equidistant(input.duration, self.frames)
    }
}

pub struct EveryK {
    pub seconds: u32,
}

impl FrameSelector for EveryK {
    fn name(&self) -> &'static str {
        "every-k"
    }

    fn select(&self, input: &SelectionInput<'_>) -> Result<FramePlan> {
        select_every_k(input.duration, self.seconds)
    }
}

/// Frames at speech-predicted chapter starts; falls back to every 10 s when
/// the video has no speech.
pub struct SpeechGuided;

impl FrameSelector for SpeechGuided {
    fn name(&self) -> &'static str {
        "speech"
    }

    fn select(&self, input: &SelectionInput<'_>) -> Result<FramePlan> {
        if !input.has_speech {
            return select_no_speech_fallback(input.duration, false);
        }
        let predicted = input.predicted.ok_or_else(|| {
            Error::Misuse("speech-guided selection needs predicted chapters".into())
        })?;
        Ok(select_from_boundaries(predicted))
    }
}

pub struct ShotBoundaries;

impl FrameSelector for ShotBoundaries {
    fn name(&self) -> &'static str {
        "shots"
    }

    fn select(&self, input: &SelectionInput<'_>) -> Result<FramePlan> {
        let shots = input
            .shots
            .ok_or_else(|| Error::Misuse("shot selection needs boundary times".into()))?;
        Ok(plan_from_shots(shots, input.duration))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectorParams {
    pub frames: u32,
    pub interval_seconds: u32,
}

impl Default for SelectorParams {
    fn default() -> Self {
        SelectorParams {
            frames: MAX_FRAMES as u32,
            interval_seconds: FALLBACK_INTERVAL_SECONDS,
        }
    }
}

type SelectorFactory = fn(&SelectorParams) -> Box<dyn FrameSelector>;

pub struct SelectorRegistry(BTreeMap<&'static str, SelectorFactory>);

impl Default for SelectorRegistry {
    fn default() -> Self {
        SelectorRegistry::empty()
            .with("equidistant", |p| {
                Box::new(Equidistant { frames: p.frames })
            })
            .with("every-k", |p| {
                Box::new(EveryK {
                    seconds: p.interval_seconds,
                })
            })
            .with("speech", |_| Box::new(SpeechGuided))
            .with("shots", |_| Box::new(ShotBoundaries))
    }
}

impl SelectorRegistry {
    pub fn empty() -> Self {
        SelectorRegistry(BTreeMap::new())
    }

    pub fn with(mut self, name: &'static str, factory: SelectorFactory) -> Self {
        self.0.insert(name, factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.0.keys().copied()
    }

    pub fn build(&self, name: &str, params: &SelectorParams) -> Result<Box<dyn FrameSelector>> {
        self.0
            .get(name)
            .map(|factory| factory(params))
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "frame selector",
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            })
    }
}
