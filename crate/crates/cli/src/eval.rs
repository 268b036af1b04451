use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chapterforge::ingest::{load_chapters, read_manifest};
use chapterforge::metrics::{aggregate, evaluate, CorpusMetrics, MetricsReport};
use chapterforge::Timestamp;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct EvalOutput {
    pub videos: BTreeMap<String, MetricsReport>,
    pub corpus: CorpusMetrics,
}

/// Where chapter files for each video id live.
enum Source {
    Manifest(BTreeMap<String, (Option<PathBuf>, f64)>),
    Dir(PathBuf),
    File(PathBuf),
}

fn classify(path: &Path) -> Result<Source, String> {
    if path.is_dir() {
        return Ok(Source::Dir(path.to_path_buf()));
    }
    if path.extension().is_some_and(|e| e == "jsonl") {
        let entries = read_manifest(path).map_err(|e| e.to_string())?;
        let mut map = BTreeMap::new();
        for e in entries {
            if map
                .insert(e.video_id.clone(), (e.chapters, e.duration))
                .is_some()
            {
                return Err(format!(
                    "{}: duplicate video_id {:?}",
                    path.display(),
                    e.video_id
                ));
            }
        }
        return Ok(Source::Manifest(map));
    }
    Ok(Source::File(path.to_path_buf()))
}

const SINGLE_ID: &str = "video";

/// Scores predictions against references. `gt` is a manifest or, with
/// `duration`, a single chapter file; `pred` is a manifest, a directory of
/// `<id>.chapters.txt` files, or a single chapter file.
pub fn run(pred: &Path, gt: &Path, duration: Option<f64>) -> Result<EvalOutput, String> {
    // (id, reference chapters path, duration)
    let refs: Vec<(String, PathBuf, Timestamp)> = match classify(gt)? {
        Source::Manifest(map) => map
            .into_iter()
            .map(|(id, (chapters, d))| {
                let path = chapters
                    .ok_or_else(|| format!("{id}: reference manifest entry has no chapters"))?;
                let d = Timestamp::from_secs_f64(d).map_err(|e| format!("{id}: {e}"))?;
                Ok((id, path, d))
            })
            .collect::<Result<_, String>>()?,
        Source::File(path) => {
            let d = duration.ok_or("--duration is required with a single reference file")?;
            vec![(
                SINGLE_ID.to_string(),
                path,
                Timestamp::from_secs_f64(d).map_err(|e| e.to_string())?,
            )]
        }
        Source::Dir(_) => return Err("the reference must be a manifest or a chapter file".into()),
    };

    let pred_source = classify(pred)?;
    let pred_path = |id: &str| -> Option<PathBuf> {
        match &pred_source {
            Source::Manifest(map) => map.get(id).and_then(|(p, _)| p.clone()),
            Source::Dir(dir) => {
                Some(dir.join(format!("{id}.chapters.txt"))).filter(|p| p.is_file())
            }
            Source::File(p) => (id == SINGLE_ID).then(|| p.clone()),
        }
    };
    let missing: Vec<&str> = refs
        .iter()
        .filter(|(id, _, _)| pred_path(id).is_none())
        .map(|(id, _, _)| id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(format!("predictions missing for: {}", missing.join(", ")));
    }
    if let Source::Manifest(map) = &pred_source {
        let extra: Vec<&str> = map
            .keys()
            .filter(|id| !refs.iter().any(|(r, _, _)| r == *id))
            .map(String::as_str)
            .collect();
        if !extra.is_empty() {
            return Err(format!("no reference for: {}", extra.join(", ")));
        }
    }

    let mut videos = BTreeMap::new();
    for (id, gt_path, d) in &refs {
        let gt = load_chapters(gt_path, *d).map_err(|e| e.to_string())?;
        let pred =
            load_chapters(pred_path(id).expect("checked above"), *d).map_err(|e| e.to_string())?;
        videos.insert(id.clone(), evaluate(&pred, &gt));
    }
    let reports: Vec<MetricsReport> = videos.values().cloned().collect();
    Ok(EvalOutput {
        corpus: aggregate(&reports),
        videos,
    })
}
