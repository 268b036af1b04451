mod chapter;
mod config;
mod eval;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chapterforge::generate::{
    chapter_video, partition_windows, write_chapters, BackendRegistry, WindowMode,
};
use chapterforge::ingest::{load_chapters, load_document, read_manifest, ManifestEntry};
use chapterforge::prompt::{
    build_prompt, build_transcript, count_tokens, join_lines, PromptOptions,
};
use chapterforge::select::{
    parse_shot_boundaries, select_no_speech_fallback, FramePlan, SelectionInput, SelectorParams,
    SelectorRegistry,
};
use chapterforge::synth::{generate_corpus, write_corpus, SynthConfig};
use chapterforge::Timestamp;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use chapter::{error_chain, Pipeline, VideoReport};
use config::Config;

#[derive(Parser)]
#[command(
    name = "chapterforge",
    version,
    about = "Chapter videos from timed transcripts"
)]
struct Cli {
    /// TOML file with [backend], [windowing] and [prompt] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Videos processed in parallel (default: logical CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus with a manifest.
    Synth(SynthArgs),
    /// Write the instantiated prompt and token counts for each video.
    Prompt(PromptArgs),
    /// Write a frame plan for each video as JSONL.
    SelectFrames(SelectArgs),
    /// Predict chapters for each video in a manifest.
    Chapter(ChapterArgs),
    /// Score predicted chapters against references.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    videos: usize,
    #[arg(long, default_value_t = 300)]
    min_duration: u32,
    #[arg(long, default_value_t = 1200)]
    max_duration: u32,
    #[arg(long, default_value_t = 1.0)]
    marker_rate: f64,
    #[arg(long, default_value_t = 0)]
    jitter: u32,
    #[arg(long, default_value_t = 257.0)]
    tokens_per_minute: f64,
    #[arg(long)]
    no_captions: bool,
}

#[derive(Args)]
struct ManifestArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PromptArgs {
    #[command(flatten)]
    io: ManifestArgs,
    #[arg(long)]
    window_tokens: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Equidistant,
    EveryK,
    Speech,
    Shots,
}

impl Strategy {
    fn name(self) -> &'static str {
        match self {
            Strategy::Equidistant => "equidistant",
            Strategy::EveryK => "every-k",
            Strategy::Speech => "speech",
            Strategy::Shots => "shots",
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    io: ManifestArgs,
    #[arg(long, value_enum)]
    strategy: Strategy,
    #[arg(long, default_value_t = 100)]
    frames: u32,
    #[arg(long, default_value_t = 10)]
    interval: u32,
    /// Directory of `<id>.chapters.txt` speech-only predictions (speech strategy).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Directory of `<id>.shots.jsonl` boundary files (shots strategy).
    #[arg(long)]
    shots: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Args)]
struct ChapterArgs {
    #[command(flatten)]
    io: ManifestArgs,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long)]
    window_tokens: Option<usize>,
    /// Send only the first window.
    #[arg(long)]
    first_window_only: bool,
    /// Pick captions from a speech-only pass before the combined pass.
    #[arg(long)]
    two_stage: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Manifest, directory of `<id>.chapters.txt`, or a chapter file.
    #[arg(long)]
    pred: PathBuf,
    /// Manifest or a chapter file.
    #[arg(long)]
    gt: PathBuf,
    /// Video duration in seconds when both inputs are single files.
    #[arg(long)]
    duration: Option<f64>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<chapterforge::Error> for Failure {
    fn from(e: chapterforge::Error) -> Self {
        Failure::Run(error_chain(&e))
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            log::error!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            log::error!("{msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be positive".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Failure::Usage(e.to_string()))?;
    let config = Config::load(cli.config.as_deref()).map_err(Failure::Usage)?;
    match cli.command {
        Command::Synth(args) => synth(args),
        Command::Prompt(args) => pool.install(|| prompt(args, config)),
        Command::SelectFrames(args) => pool.install(|| select_frames(args, config)),
        Command::Chapter(args) => pool.install(|| chapter(args, config)),
        Command::Eval(args) => eval(args),
    }
}

fn manifest(path: &Path) -> Result<Vec<ManifestEntry>, Failure> {
    read_manifest(path).map_err(|e| Failure::Usage(error_chain(&e)))
}

fn finish(outcomes: &[Result<(), String>], what: &str) -> ExitCode {
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    log::info!(
        "{what}: {} succeeded, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn synth(args: SynthArgs) -> CmdResult {
    let cfg = SynthConfig {
        seed: args.seed,
        num_videos: args.videos,
        duration_range: (args.min_duration, args.max_duration),
        speech_tokens_per_minute: args.tokens_per_minute,
        marker_rate: args.marker_rate,
        boundary_jitter_seconds: args.jitter,
        include_captions: !args.no_captions,
        ..Default::default()
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let corpus = generate_corpus(&cfg)?;
    let path = write_corpus(&corpus, &args.out)?;
    log::info!(
        "wrote {} videos, manifest {}",
        corpus.videos.len(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PromptSummary {
    video_id: String,
    lines: usize,
    transcript_tokens: usize,
    template_overhead: usize,
    window_tokens: usize,
    windows: usize,
}

fn prompt(args: PromptArgs, mut config: Config) -> CmdResult {
    if let Some(w) = args.window_tokens {
        config.windowing.window_tokens = w;
    }
    config.validate().map_err(Failure::Usage)?;
    let windowing = config.windowing().map_err(Failure::Usage)?;
    let entries = manifest(&args.io.manifest)?;
    let outcomes: Vec<Result<(), String>> = entries
        .par_iter()
        .map(|entry| {
            let doc = load_document(entry).map_err(|e| error_chain(&e))?.document;
            let counter = windowing.counter.as_ref();
            let lines =
                build_transcript(&doc, &config.prompt, counter).map_err(|e| error_chain(&e))?;
            let text = build_prompt(&doc, &join_lines(&lines), &config.prompt);
            let tally = count_tokens(counter, &lines, &doc, &config.prompt);
            let summary = PromptSummary {
                video_id: entry.video_id.clone(),
                lines: lines.len(),
                transcript_tokens: tally.total,
                template_overhead: tally.template_overhead,
                window_tokens: windowing.window_tokens,
                windows: partition_windows(&lines, windowing.window_tokens).len(),
            };
            let out = &args.io.out;
            output::write_atomic(
                &out.join(format!("{}.prompt.txt", entry.video_id)),
                text.as_bytes(),
            )?;
            output::write_json(
                &out.join(format!("{}.tokens.json", entry.video_id)),
                &summary,
            )
        })
        .inspect(|o| {
            if let Err(e) = o {
                log::error!("{e}");
            }
        })
        .collect();
    Ok(finish(&outcomes, "prompt"))
}

fn select_frames(args: SelectArgs, config: Config) -> CmdResult {
    let registry = SelectorRegistry::default();
    let params = SelectorParams {
        frames: args.frames,
        interval_seconds: args.interval,
    };
    let selector = registry
        .build(args.strategy.name(), &params)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if matches!(args.strategy, Strategy::Shots) && args.shots.is_none() {
        return Err(Failure::Usage(
            "--strategy shots needs --shots <dir>".into(),
        ));
    }
    config.validate().map_err(Failure::Usage)?;
    let backend = if matches!(args.strategy, Strategy::Speech) && args.predictions.is_none() {
        Some(
            BackendRegistry::default()
                .build(&config.backend)
                .map_err(|e| Failure::Usage(e.to_string()))?,
        )
    } else {
        None
    };
    let windowing = config.windowing().map_err(Failure::Usage)?;
    let entries = manifest(&args.io.manifest)?;

    let plan_for = |entry: &ManifestEntry| -> Result<FramePlan, String> {
        let doc = load_document(entry).map_err(|e| error_chain(&e))?.document;
        let duration = doc.duration();
        let mut input = SelectionInput::new(duration);
        input.has_speech = doc.has_speech();
        if let (Strategy::Shots, Some(dir)) = (args.strategy, &args.shots) {
            let path = dir.join(format!("{}.shots.jsonl", entry.video_id));
            let text =
                std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            let shots = parse_shot_boundaries(&text, &path).map_err(|e| error_chain(&e))?;
            input.shots = Some(&shots);
            return selector.select(&input).map_err(|e| error_chain(&e));
        }
        if !matches!(args.strategy, Strategy::Speech) {
            return selector.select(&input).map_err(|e| error_chain(&e));
        }
        if !doc.has_speech() {
            return select_no_speech_fallback(duration, false).map_err(|e| error_chain(&e));
        }
        let predicted = match (&args.predictions, &backend) {
            (Some(dir), _) => load_chapters(
                dir.join(format!("{}.chapters.txt", entry.video_id)),
                duration,
            )
            .map_err(|e| error_chain(&e))?,
            (None, Some(backend)) => {
                let opts = PromptOptions {
                    include_captions: false,
                    include_speech: true,
                    ..config.prompt.clone()
                };
                chapter_video(&doc, &opts, backend.as_ref(), &windowing)
                    .map_err(|e| error_chain(&e))?
                    .0
            }
            (None, None) => unreachable!("backend built when predictions are absent"),
        };
        input.predicted = Some(&predicted);
        selector.select(&input).map_err(|e| error_chain(&e))
    };

    let outcomes: Vec<Result<(), String>> = entries
        .par_iter()
        .map(|entry| {
            let plan = plan_for(entry).map_err(|e| format!("{}: {e}", entry.video_id))?;
            let path = args.io.out.join(format!("{}.frames.jsonl", entry.video_id));
            output::write_atomic(&path, plan.to_jsonl().as_bytes())
        })
        .inspect(|o| {
            if let Err(e) = o {
                log::error!("{e}");
            }
        })
        .collect();
    Ok(finish(&outcomes, "select-frames"))
}

#[derive(Serialize)]
struct ChapterSummary {
    succeeded: usize,
    failed: usize,
    videos: Vec<SummaryRow>,
}

#[derive(Serialize)]
struct SummaryRow {
    video_id: String,
    status: &'static str,
    chapters: Option<usize>,
    error: Option<String>,
}

fn chapter(args: ChapterArgs, mut config: Config) -> CmdResult {
    if let Some(kind) = args.backend {
        config.backend.kind = match kind {
            BackendKind::Mock => "mock",
            BackendKind::Http => "http",
        }
        .into();
    }
    if let Some(w) = args.window_tokens {
        config.windowing.window_tokens = w;
    }
    if args.first_window_only {
        config.windowing.mode = WindowMode::FirstOnly;
    }
    config.validate().map_err(Failure::Usage)?;
    log::info!("resolved configuration:\n{}", config.to_toml());
    let backend = BackendRegistry::default()
        .build(&config.backend)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let windowing = config.windowing().map_err(Failure::Usage)?;
    let entries = manifest(&args.io.manifest)?;
    let pipeline = Pipeline {
        backend: backend.as_ref(),
        windowing: &windowing,
        prompt: &config.prompt,
        two_stage: args.two_stage,
    };
    let out = &args.io.out;

    let rows: Vec<(SummaryRow, Result<(), String>)> = entries
        .par_iter()
        .map(|entry| {
            let (cs, report): (_, VideoReport) = pipeline.run(entry);
            let mut written = Ok(());
            if let Some(cs) = &cs {
                let path = out.join(format!("{}.chapters.txt", entry.video_id));
                written = output::write_atomic(&path, write_chapters(cs).as_bytes());
            }
            let report_path = out.join(format!("{}.report.json", entry.video_id));
            let written = written.and(output::write_json(&report_path, &report));
            let outcome = match (&report.error, &written) {
                (Some(e), _) => Err(format!("{}: {e}", entry.video_id)),
                (None, Err(e)) => Err(e.clone()),
                (None, Ok(())) => Ok(()),
            };
            if let Err(e) = &outcome {
                log::error!("{e}");
            }
            let row = SummaryRow {
                video_id: entry.video_id.clone(),
                status: if outcome.is_ok() { "ok" } else { "error" },
                chapters: cs.as_ref().map(|c| c.len()),
                error: outcome.as_ref().err().cloned(),
            };
            (row, outcome)
        })
        .collect();
    let outcomes: Vec<Result<(), String>> = rows.iter().map(|(_, o)| o.clone()).collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    let summary = ChapterSummary {
        succeeded: rows.len() - failed,
        failed,
        videos: rows.into_iter().map(|(r, _)| r).collect(),
    };
    output::write_json(&out.join("summary.json"), &summary).map_err(Failure::Run)?;
    Ok(finish(&outcomes, "chapter"))
}

fn eval(args: EvalArgs) -> CmdResult {
    if let Some(d) = args.duration {
        Timestamp::from_secs_f64(d).map_err(|e| Failure::Usage(format!("--duration: {e}")))?;
    }
    let result = eval::run(&args.pred, &args.gt, args.duration).map_err(Failure::Run)?;
    let mut text =
        serde_json::to_string_pretty(&result).map_err(|e| Failure::Run(e.to_string()))?;
    text.push('\n');
    match &args.out {
        Some(path) => output::write_atomic(path, text.as_bytes()).map_err(Failure::Run)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
