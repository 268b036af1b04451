//! Seeded synthetic corpus of chaptered videos.
//!
//! Each video gets ground-truth chapters and a timed transcript whose speech
//! rate is calibrated in tokens per minute under
//! [`crate::prompt::ByteHeuristicCounter`].
//! At every marked chapter start the co-timed utterance reads
//! `§CHAPTER§ <title>`, which lets [`crate::generate::MockBackend`] recover
//! the ground truth exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{write_chapters, CHAPTER_MARKER};
use crate::ingest::ManifestEntry;
use crate::model::{Chapter, ChapterSet, Modality, TimedUtterance, Timestamp, VideoDocument};

pub const MIN_CHAPTER_GAP: u32 = 30;

/// Bytes of `HH:MM:SS: ` in a bare transcript line.
const LINE_OVERHEAD_BYTES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_videos: usize,
    /// Inclusive, in seconds.
    pub duration_range: (u32, u32),
    /// Inclusive.
    pub chapters_per_video: (usize, usize),
    pub speech_tokens_per_minute: f64,
    pub caption_tokens: usize,
    /// Fraction of chapter starts that carry the marker.
    pub marker_rate: f64,
    /// Markers are displaced by up to this many seconds either way. The
    /// first chapter is never displaced.
    pub boundary_jitter_seconds: u32,
    /// Captions at random times on top of the ones at chapter starts.
    pub extra_captions: usize,
    pub include_captions: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            num_videos: 10,
            duration_range: (300, 1200),
            chapters_per_video: (3, 13),
            speech_tokens_per_minute: 257.0,
            caption_tokens: 66,
            marker_rate: 1.0,
            boundary_jitter_seconds: 0,
            extra_captions: 5,
            include_captions: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (dmin, dmax) = self.duration_range;
        let (cmin, cmax) = self.chapters_per_video;
        let fail = |m: String| Err(Error::Config(m));
        if dmin == 0 || dmin > dmax {
            return fail(format!("duration range {dmin}..={dmax} is empty"));
        }
        if dmax > Timestamp::MAX_SECONDS {
            return fail(format!("duration {dmax} exceeds 99:59:59"));
        }
        if cmin == 0 || cmin > cmax {
            return fail(format!("chapter range {cmin}..={cmax} is empty"));
        }
        if cmin as u64 * MIN_CHAPTER_GAP as u64 > dmin as u64 {
            return fail(format!(
                "{cmin} chapters need at least {} s, shortest video is {dmin} s",
                cmin as u64 * MIN_CHAPTER_GAP as u64
            ));
        }
        if !(0.0..=1.0).contains(&self.marker_rate) {
            return fail(format!("marker rate {} outside [0, 1]", self.marker_rate));
        }
        if self.speech_tokens_per_minute.is_nan() || self.speech_tokens_per_minute <= 0.0 {
            return fail("speech token rate must be positive".into());
        }
        if self.caption_tokens == 0 {
            return fail("caption token target must be positive".into());
        }
        if self.boundary_jitter_seconds * 2 >= MIN_CHAPTER_GAP {
            return fail(format!(
                "jitter {} s could reorder chapters {MIN_CHAPTER_GAP} s apart",
                self.boundary_jitter_seconds
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthVideo {
    pub document: VideoDocument,
    pub ground_truth: ChapterSet,
    /// Per chapter: where its marker sits, if it has one.
    pub markers: Vec<Option<Timestamp>>,
}

impl SynthVideo {
    pub fn marked_chapters(&self) -> usize {
        self.markers.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub videos: Vec<SynthVideo>,
}

/// Independent per-video seed.
pub fn video_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let videos = (0..cfg.num_videos)
        .map(|i| generate_video(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCorpus { videos })
}

const ADJECTIVES: &[&str] = &[
    "Rocky", "Hidden", "Ancient", "Quiet", "Golden", "Narrow", "Windy", "Frozen", "Painted",
    "Lonely", "Sunny", "Misty", "Wild", "Crooked", "Silver", "Red", "Deep", "Open",
];
const NOUNS: &[&str] = &[
    "Canyon",
    "Bridge",
    "Campground",
    "Tunnel",
    "Panel",
    "Trail",
    "Lake",
    "Ridge",
    "Valley",
    "Market",
    "Kitchen",
    "Workshop",
    "Garden",
    "Harbor",
    "Station",
    "Summit",
    "Creek",
    "Bloopers",
];
const WORDS: &[&str] = &[
    "so", "we", "are", "going", "to", "look", "at", "this", "really", "nice", "place", "and",
    "then", "the", "road", "goes", "down", "into", "a", "wash", "where", "you", "can", "see",
    "old", "rock", "art", "on", "walls", "it", "is", "quite", "amazing", "honestly", "let", "me",
    "show", "how", "works", "here", "next", "thing", "about", "our", "trip", "today", "camera",
    "over", "there", "water", "little", "bit", "more", "time", "okay",
];
const CAPTION_WORDS: &[&str] = &[
    "the",
    "image",
    "features",
    "two",
    "individuals",
    "standing",
    "outdoors",
    "in",
    "a",
    "natural",
    "setting",
    "with",
    "rocky",
    "terrain",
    "and",
    "sparse",
    "vegetation",
    "background",
    "sky",
    "is",
    "clear",
    "blue",
    "man",
    "woman",
    "wearing",
    "hats",
    "near",
    "vehicle",
    "parked",
    "along",
    "dirt",
    "road",
    "cliffs",
    "visible",
    "distance",
];

/// Random words joined by spaces, as long as possible without exceeding
/// `target_bytes` (always at least one word).
fn filler(rng: &mut ChaCha8Rng, vocab: &[&str], target_bytes: usize) -> String {
    let mut out = String::new();
    loop {
        let w = vocab[rng.random_range(0..vocab.len())];
        let extra = w.len() + usize::from(!out.is_empty());
        if !out.is_empty() && out.len() + extra > target_bytes {
            return out;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
}

fn ts(seconds: u32) -> Timestamp {
    Timestamp::new(seconds).expect("validated duration range")
}

fn generate_video(cfg: &SynthConfig, index: usize) -> Result<SynthVideo> {
    let mut rng = ChaCha8Rng::seed_from_u64(video_seed(cfg.seed, index as u64));
    let video_id = format!("synth-{}-{index:04}", cfg.seed);
    let duration = rng.random_range(cfg.duration_range.0..=cfg.duration_range.1);
    let max_fit = (duration / MIN_CHAPTER_GAP) as usize;
    let (cmin, cmax) = cfg.chapters_per_video;
    let count = rng.random_range(cmin..=cmax.min(max_fit));

    // First start at 0, consecutive starts at least MIN_CHAPTER_GAP apart,
    // last chapter at least MIN_CHAPTER_GAP long.
    let slack = duration - MIN_CHAPTER_GAP * count as u32;
    let mut offsets: Vec<u32> = (1..count).map(|_| rng.random_range(0..=slack)).collect();
    offsets.sort_unstable();
    let starts: Vec<u32> = std::iter::once(0)
        .chain(
            offsets
                .iter()
                .enumerate()
                .map(|(i, o)| o + MIN_CHAPTER_GAP * (i as u32 + 1)),
        )
        .collect();

    let mut titles: Vec<String> = Vec::with_capacity(count);
    for i in 0..count {
        let base = format!(
            "{} {}",
            ADJECTIVES[rng.random_range(0..ADJECTIVES.len())],
            NOUNS[rng.random_range(0..NOUNS.len())]
        );
        let title = if titles.contains(&base) {
            format!("{base} Part {}", i + 1)
        } else {
            base
        };
        titles.push(title);
    }

    let jitter = cfg.boundary_jitter_seconds as i64;
    let markers: Vec<Option<Timestamp>> = starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let marked = rng.random_bool(cfg.marker_rate);
            let shift = if i == 0 || jitter == 0 {
                0
            } else {
                rng.random_range(-jitter..=jitter)
            };
            marked.then(|| ts((s as i64 + shift) as u32))
        })
        .collect();

    // Utterance grid: every anchor (marker or unmarked chapter start) begins
    // a run of utterances spaced 3-4 s apart.
    let mut anchors: Vec<(u32, Option<usize>)> = starts
        .iter()
        .zip(&markers)
        .enumerate()
        .map(|(i, (&s, m))| match m {
            Some(t) => (t.seconds(), Some(i)),
            None => (s, None),
        })
        .collect();
    anchors.sort_unstable();
    let mut times: Vec<(u32, Option<usize>)> = Vec::new();
    for (k, &(anchor, chapter)) in anchors.iter().enumerate() {
        let limit = anchors.get(k + 1).map_or(duration, |a| a.0);
        let mut t = anchor;
        let mut first = true;
        while t < limit {
            times.push((t, if first { chapter } else { None }));
            first = false;
            t += rng.random_range(3..=4);
        }
    }

    let mut utterances = Vec::with_capacity(times.len() + count + cfg.extra_captions);
    for (k, &(t, chapter)) in times.iter().enumerate() {
        let end = times.get(k + 1).map_or(duration, |n| n.0);
        let text = match chapter {
            Some(i) => format!("{CHAPTER_MARKER} {}", titles[i]),
            None => {
                let tokens = cfg.speech_tokens_per_minute * (end - t) as f64 / 60.0;
                let target = ((tokens * 4.0).round() as usize).saturating_sub(LINE_OVERHEAD_BYTES);
                filler(&mut rng, WORDS, target)
            }
        };
        utterances.push(TimedUtterance::speech(ts(t), Some(ts(end)), text)?);
    }
    if cfg.include_captions {
        let extras: Vec<u32> = (0..cfg.extra_captions)
            .map(|_| rng.random_range(0..duration))
            .collect();
        for t in starts.iter().copied().chain(extras) {
            let mut text = String::from("The image shows ");
            text.push_str(&filler(
                &mut rng,
                CAPTION_WORDS,
                (cfg.caption_tokens * 4).saturating_sub(text.len()),
            ));
            text.push('.');
            utterances.push(TimedUtterance::caption(ts(t), text)?);
        }
    }

    let chapters = starts
        .iter()
        .zip(&titles)
        .map(|(&s, title)| Chapter::new(ts(s), title))
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthVideo {
        document: VideoDocument::new(video_id, ts(duration), utterances)?,
        ground_truth: ChapterSet::new(chapters, ts(duration))?,
        markers,
    })
}

#[derive(Serialize)]
struct AsrLine<'a> {
    start: u32,
    end: u32,
    text: &'a str,
}

#[derive(Serialize)]
struct CaptionLine<'a> {
    time: u32,
    text: &'a str,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(&row).expect("plain records serialize"));
        out.push('\n');
    }
    out
}

/// Writes `<id>.asr.jsonl`, `<id>.captions.jsonl`, `<id>.chapters.txt` per
/// video and a `manifest.jsonl` with paths relative to `dir`. Returns the
/// manifest path.
pub fn write_corpus(corpus: &SynthCorpus, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(corpus.videos.len());
    for video in &corpus.videos {
        let doc = &video.document;
        let id = doc.video_id();
        let of = |m: Modality| doc.utterances().iter().filter(move |u| u.modality() == m);

        let asr_name = format!("{id}.asr.jsonl");
        write_file(
            &dir.join(&asr_name),
            &jsonl(of(Modality::Speech).map(|u| AsrLine {
                start: u.start().seconds(),
                end: u.end().unwrap_or(u.start()).seconds(),
                text: u.text(),
            })),
        )?;
        let has_captions = of(Modality::Caption).next().is_some();
        let captions_name = format!("{id}.captions.jsonl");
        if has_captions {
            write_file(
                &dir.join(&captions_name),
                &jsonl(of(Modality::Caption).map(|u| CaptionLine {
                    time: u.start().seconds(),
                    text: u.text(),
                })),
            )?;
        }
        let chapters_name = format!("{id}.chapters.txt");
        write_file(
            &dir.join(&chapters_name),
            &write_chapters(&video.ground_truth),
        )?;
        manifest.push(ManifestEntry {
            video_id: id.to_string(),
            duration: doc.duration().seconds() as f64,
            asr: Some(asr_name.into()),
            captions: has_captions.then(|| captions_name.into()),
            chapters: Some(chapters_name.into()),
        });
    }
    let path = dir.join("manifest.jsonl");
    let text = manifest
        .iter()
        .map(manifest_line)
        .collect::<io::Result<Vec<_>>>()
        .map_err(|e| Error::io(&path, e))?
        .concat();
    write_file(&path, &text)?;
    Ok(path)
}

/// Manifest line with an integral duration written as an integer.
fn manifest_line(e: &ManifestEntry) -> io::Result<String> {
    let mut v = serde_json::to_value(e).map_err(io::Error::other)?;
    if e.duration.fract() == 0.0 {
        v["duration"] = serde_json::json!(e.duration as u64);
    }
    let mut line = serde_json::to_string(&v).map_err(io::Error::other)?;
    line.push('\n');
    Ok(line)
}
