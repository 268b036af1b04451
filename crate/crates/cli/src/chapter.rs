//! Per-video chaptering, optionally in two stages: a speech-only pass picks
//! frame times, the captions nearest those times are spliced into the
//! transcript, and a second pass sees both modalities.

use chapterforge::generate::{chapter_video, Backend, RunReport, WindowingConfig};
use chapterforge::ingest::{load_document, ManifestEntry};
use chapterforge::prompt::PromptOptions;
use chapterforge::select::{select_from_boundaries, select_no_speech_fallback, FramePlan};
use chapterforge::{ChapterSet, Error, Modality, TimedUtterance, Timestamp, VideoDocument};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TwoStageReport {
    pub speech_pass: Option<RunReport>,
    pub frame_strategy: String,
    pub planned_frames: usize,
    pub captions_available: usize,
    pub captions_selected: usize,
    /// The video had no speech, so frames were taken every 10 s.
    pub fallback_used: bool,
    /// False when there were no captions and the speech pass is the answer.
    pub combined_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VideoReport {
    pub video_id: String,
    pub status: &'static str,
    pub error: Option<String>,
    pub dropped_asr: usize,
    pub dropped_captions: usize,
    pub two_stage: Option<TwoStageReport>,
    pub run: Option<RunReport>,
}

impl VideoReport {
    fn new(video_id: &str) -> Self {
        VideoReport {
            video_id: video_id.to_string(),
            status: "ok",
            error: None,
            dropped_asr: 0,
            dropped_captions: 0,
            two_stage: None,
            run: None,
        }
    }
}

pub struct Pipeline<'a> {
    pub backend: &'a dyn Backend,
    pub windowing: &'a WindowingConfig,
    pub prompt: &'a PromptOptions,
    pub two_stage: bool,
}

impl Pipeline<'_> {
    /// Never fails as a whole: errors end up in the report.
    pub fn run(&self, entry: &ManifestEntry) -> (Option<ChapterSet>, VideoReport) {
        let mut report = VideoReport::new(&entry.video_id);
        match self.try_run(entry, &mut report) {
            Ok(cs) => (Some(cs), report),
            Err(e) => {
                report.status = "error";
                report.error = Some(error_chain(&e));
                (None, report)
            }
        }
    }

    fn try_run(
        &self,
        entry: &ManifestEntry,
        report: &mut VideoReport,
    ) -> Result<ChapterSet, Error> {
        let loaded = load_document(entry)?;
        report.dropped_asr = loaded.dropped_asr;
        report.dropped_captions = loaded.dropped_captions;
        let doc = loaded.document;
        if !self.two_stage {
            let (cs, run) = chapter_video(&doc, self.prompt, self.backend, self.windowing)?;
            report.run = Some(run);
            return Ok(cs);
        }

        let speech_opts = PromptOptions {
            include_speech: true,
            include_captions: false,
            ..self.prompt.clone()
        };
        let (speech, plan) = if doc.has_speech() {
            let (cs, run) = chapter_video(&doc, &speech_opts, self.backend, self.windowing)?;
            let plan = select_from_boundaries(&cs);
            (Some((cs, run)), plan)
        } else {
            log::info!(
                "{}: no speech, using the fallback frame plan",
                doc.video_id()
            );
            (None, select_no_speech_fallback(doc.duration(), false)?)
        };
        let captions: Vec<&TimedUtterance> = doc
            .utterances()
            .iter()
            .filter(|u| u.modality() == Modality::Caption)
            .collect();
        let mut stage = TwoStageReport {
            speech_pass: speech.as_ref().map(|(_, run)| run.clone()),
            frame_strategy: format!("{:?}", plan.strategy()),
            planned_frames: plan.len(),
            captions_available: captions.len(),
            captions_selected: 0,
            fallback_used: speech.is_none(),
            combined_pass: false,
        };
        if captions.is_empty() {
            report.two_stage = Some(stage);
            let (cs, _) = speech.ok_or(Error::EmptyTranscript)?;
            return Ok(cs);
        }

        let spliced = splice_captions(&doc, &plan)?;
        stage.captions_selected = spliced
            .utterances()
            .iter()
            .filter(|u| u.modality() == Modality::Caption)
            .count();
        stage.combined_pass = true;
        report.two_stage = Some(stage);
        let both = PromptOptions {
            include_speech: true,
            include_captions: true,
            ..self.prompt.clone()
        };
        let (cs, run) = chapter_video(&spliced, &both, self.backend, self.windowing)?;
        report.run = Some(run);
        Ok(cs)
    }
}

/// Keeps all speech and, for every planned frame time, the caption record
/// closest to it (the earlier one on ties). Captions keep their own times.
pub fn splice_captions(doc: &VideoDocument, plan: &FramePlan) -> Result<VideoDocument, Error> {
    let captions: Vec<&TimedUtterance> = doc
        .utterances()
        .iter()
        .filter(|u| u.modality() == Modality::Caption)
        .collect();
    let mut chosen = vec![false; captions.len()];
    if !captions.is_empty() {
        for &t in plan.timestamps() {
            chosen[nearest(&captions, t)] = true;
        }
    }
    let utterances = doc
        .utterances()
        .iter()
        .filter(|u| u.modality() == Modality::Speech)
        .chain(
            captions
                .iter()
                .zip(&chosen)
                .filter(|(_, &c)| c)
                .map(|(u, _)| *u),
        )
        .cloned()
        .collect();
    VideoDocument::new(doc.video_id(), doc.duration(), utterances)
}

fn nearest(captions: &[&TimedUtterance], t: Timestamp) -> usize {
    let after = captions.partition_point(|u| u.start() < t);
    if after == 0 {
        return 0;
    }
    if after == captions.len() {
        return after - 1;
    }
    let before = after - 1;
    let d_before = t.seconds() - captions[before].start().seconds();
    let d_after = captions[after].start().seconds() - t.seconds();
    if d_before <= d_after {
        before
    } else {
        after
    }
}

pub fn error_chain(e: &dyn std::error::Error) -> String {
    let mut out = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        let text = s.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
        source = s.source();
    }
    out
}
