//! Segmentation metrics: greedy IoU matching, tIoU, threshold-averaged F1,
//! boundary and segment precision/recall, and a few auxiliary scores.
//!
//! Predicted and reference chapter sets are first turned into segments.
//! Matching is one-to-one and greedy: the remaining pair with the highest
//! IoU is taken first. Pairs with zero overlap are never matched unless
//! [`ZeroOverlap::Include`] is requested.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::model::{ChapterSet, Segment, Timestamp};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn f1_thresholds() -> impl Iterator<Item = f64> {
    (10..20).map(|k| k as f64 / 20.0)
}

pub const BOUNDARY_DELTAS: [u32; 2] = [3, 5];
pub const IOU_THRESHOLDS: [f64; 2] = [0.5, 0.7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub gt_index: usize,
    pub pred_index: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroOverlap {
    #[default]
    Exclude,
    /// Keep pairing leftover segments even without overlap.
    Include,
}

/// Greedy one-to-one matching by descending IoU.
///
/// Equal IoUs are resolved by the earlier reference segment, then the
/// earlier prediction, comparing segment positions (then list indices), so
/// the result does not depend on input order.
pub fn greedy_match(pred: &[Segment], gt: &[Segment]) -> Vec<MatchedPair> {
    greedy_match_with(pred, gt, ZeroOverlap::Exclude)
}

pub fn greedy_match_with(pred: &[Segment], gt: &[Segment], zero: ZeroOverlap) -> Vec<MatchedPair> {
    let mut candidates: Vec<MatchedPair> = Vec::with_capacity(pred.len() * gt.len());
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let iou = p.iou(g);
            if iou > 0.0 || zero == ZeroOverlap::Include {
                candidates.push(MatchedPair {
                    gt_index: gi,
                    pred_index: pi,
                    iou,
                });
            }
        }
    }
    let key = |m: &MatchedPair| (gt[m.gt_index], m.gt_index, pred[m.pred_index], m.pred_index);
    candidates.sort_by(|a, b| {
        b.iou
            .partial_cmp(&a.iou)
            .unwrap_or(Ordering::Equal)
            .then_with(|| key(a).cmp(&key(b)))
    });
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if pairs.len() == gt.len().min(pred.len()) {
            break;
        }
        if gt_used[c.gt_index] || pred_used[c.pred_index] {
            continue;
        }
        gt_used[c.gt_index] = true;
        pred_used[c.pred_index] = true;
        pairs.push(c);
    }
    pairs
}

/// Mean IoU of matched pairs, times 100. Zero when nothing matches.
pub fn tiou(pred: &ChapterSet, gt: &ChapterSet) -> f64 {
    mean_iou(&greedy_match(&pred.segments(), &gt.segments()))
}

fn mean_iou(pairs: &[MatchedPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    100.0 * pairs.iter().map(|p| p.iou).sum::<f64>() / pairs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

impl PrecisionRecall {
    const ZERO: PrecisionRecall = PrecisionRecall {
        precision: 0.0,
        recall: 0.0,
    };

    fn from_counts(correct: usize, n_pred: usize, n_gt: usize) -> Self {
        let ratio = |n: usize| {
            if n == 0 {
                0.0
            } else {
                correct as f64 / n as f64
            }
        };
        PrecisionRecall {
            precision: ratio(n_pred),
            recall: ratio(n_gt),
        }
    }

    /// Harmonic mean; zero when both are zero.
    pub fn f1(&self) -> f64 {
        let sum = self.precision + self.recall;
        if sum == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / sum
        }
    }
}

fn pr_from_pairs(pairs: &[MatchedPair], tau: f64, n_pred: usize, n_gt: usize) -> PrecisionRecall {
    let correct = pairs.iter().filter(|p| p.iou >= tau).count();
    PrecisionRecall::from_counts(correct, n_pred, n_gt)
}

/// Precision and recall when a matched pair counts only if its IoU is at
/// least `tau`.
pub fn segment_pr_at_iou(pred: &ChapterSet, gt: &ChapterSet, tau: f64) -> PrecisionRecall {
    let (ps, gs) = (pred.segments(), gt.segments());
    pr_from_pairs(&greedy_match(&ps, &gs), tau, ps.len(), gs.len())
}

/// F1 at each of the ten thresholds, as fractions.
pub fn f1_per_threshold(pred: &ChapterSet, gt: &ChapterSet) -> Vec<f64> {
    let (ps, gs) = (pred.segments(), gt.segments());
    f1_thresholds()
        .map(|tau| {
            let pairs = greedy_match(&ps, &gs);
            pr_from_pairs(&pairs, tau, ps.len(), gs.len()).f1()
        })
        .collect()
}

/// Mean F1 over the ten IoU thresholds, times 100.
pub fn f1(pred: &ChapterSet, gt: &ChapterSet) -> f64 {
    let per = f1_per_threshold(pred, gt);
    100.0 * per.iter().sum::<f64>() / per.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPr {
    pub precision: f64,
    pub recall: f64,
    pub empty_prediction: bool,
}

/// Matches chapter starts one-to-one by smallest time distance (earlier
/// reference, then earlier prediction, on ties); a pair counts when the
/// distance is at most `delta_seconds`.
pub fn boundary_pr(pred: &ChapterSet, gt: &ChapterSet, delta_seconds: u32) -> BoundaryPr {
    let p: Vec<Timestamp> = pred.starts().collect();
    let g: Vec<Timestamp> = gt.starts().collect();
    boundary_pr_of(&p, &g, delta_seconds)
}

pub fn boundary_pr_of(pred: &[Timestamp], gt: &[Timestamp], delta_seconds: u32) -> BoundaryPr {
    if pred.is_empty() {
        return BoundaryPr {
            precision: 0.0,
            recall: 0.0,
            empty_prediction: true,
        };
    }
    let mut candidates: Vec<(u32, Timestamp, Timestamp, usize, usize)> = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let d = g.seconds().abs_diff(p.seconds());
            if d <= delta_seconds {
                candidates.push((d, *g, *p, gi, pi));
            }
        }
    }
    candidates.sort_unstable();
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut matched = 0;
    for (_, _, _, gi, pi) in candidates {
        if !gt_used[gi] && !pred_used[pi] {
            gt_used[gi] = true;
            pred_used[pi] = true;
            matched += 1;
        }
    }
    let pr = PrecisionRecall::from_counts(matched, pred.len(), gt.len());
    BoundaryPr {
        precision: pr.precision,
        recall: pr.recall,
        empty_prediction: false,
    }
}

/// Distinct titles over total titles (exact match after trimming).
pub fn repetition_ratio(cs: &ChapterSet) -> f64 {
    if cs.is_empty() {
        return 0.0;
    }
    let unique: HashSet<&str> = cs.chapters().iter().map(|c| c.title().trim()).collect();
    unique.len() as f64 / cs.len() as f64
}

pub fn count_delta(pred: &ChapterSet, gt: &ChapterSet) -> i64 {
    pred.len() as i64 - gt.len() as i64
}

/// Token-level F1 between two titles, lowercased and split on whitespace.
/// Not comparable with captioning metrics.
pub fn title_f1(pred: &str, gt: &str) -> f64 {
    let tokens = |s: &str| -> HashMap<String, usize> {
        let mut bag = HashMap::new();
        for t in s.split_whitespace() {
            *bag.entry(t.to_lowercase()).or_insert(0) += 1;
        }
        bag
    };
    let (p, g) = (tokens(pred), tokens(gt));
    let (np, ng): (usize, usize) = (p.values().sum(), g.values().sum());
    if np == 0 && ng == 0 {
        return 1.0;
    }
    let common: usize = p
        .iter()
        .map(|(t, c)| (*c).min(g.get(t).copied().unwrap_or(0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / np as f64;
    let recall = common as f64 / ng as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Mean [`title_f1`] over matched pairs; zero without pairs.
pub fn title_token_f1(pred: &ChapterSet, gt: &ChapterSet, pairs: &[MatchedPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs
        .iter()
        .map(|m| {
            title_f1(
                pred.chapters()[m.pred_index].title(),
                gt.chapters()[m.gt_index].title(),
            )
        })
        .sum::<f64>()
        / pairs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tiou: f64,
    pub f1: f64,
    /// Keyed by tolerance in seconds.
    pub pr_at_seconds: BTreeMap<String, PrecisionRecall>,
    /// Keyed by IoU threshold.
    pub pr_at_iou: BTreeMap<String, PrecisionRecall>,
    pub repetition_ratio: f64,
    pub count_delta: i64,
    /// Token-overlap title score; not comparable with published captioning metrics.
    pub title_token_f1: f64,
}

pub fn evaluate(pred: &ChapterSet, gt: &ChapterSet) -> MetricsReport {
    let (ps, gs) = (pred.segments(), gt.segments());
    let pairs = greedy_match(&ps, &gs);
    let per: Vec<f64> = f1_thresholds()
        .map(|tau| pr_from_pairs(&pairs, tau, ps.len(), gs.len()).f1())
        .collect();
    let pr_at_seconds = BOUNDARY_DELTAS
        .iter()
        .map(|&d| {
            let b = boundary_pr(pred, gt, d);
            (
                format!("{d}s"),
                PrecisionRecall {
                    precision: b.precision,
                    recall: b.recall,
                },
            )
        })
        .collect();
    let pr_at_iou = IOU_THRESHOLDS
        .iter()
        .map(|&tau| {
            (
                format!("{tau:.1}"),
                pr_from_pairs(&pairs, tau, ps.len(), gs.len()),
            )
        })
        .collect();
    MetricsReport {
        tiou: mean_iou(&pairs),
        f1: 100.0 * per.iter().sum::<f64>() / per.len() as f64,
        pr_at_seconds,
        pr_at_iou,
        repetition_ratio: repetition_ratio(pred),
        count_delta: count_delta(pred, gt),
        title_token_f1: title_token_f1(pred, gt, &pairs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusMetrics {
    pub videos: usize,
    pub tiou_mean: f64,
    pub tiou_median: f64,
    pub f1_mean: f64,
    pub f1_median: f64,
    pub pr_at_seconds: BTreeMap<String, PrecisionRecall>,
    pub pr_at_iou: BTreeMap<String, PrecisionRecall>,
    pub repetition_ratio_mean: f64,
    pub count_delta_mean: f64,
    pub count_delta_median: f64,
    pub title_token_f1_mean: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

fn mean_pr<'a>(
    reports: &'a [MetricsReport],
    field: impl Fn(&'a MetricsReport) -> &'a BTreeMap<String, PrecisionRecall>,
) -> BTreeMap<String, PrecisionRecall> {
    let mut out = BTreeMap::new();
    let Some(first) = reports.first() else {
        return out;
    };
    for key in field(first).keys() {
        let get =
            |r: &'a MetricsReport| field(r).get(key).copied().unwrap_or(PrecisionRecall::ZERO);
        let p: Vec<f64> = reports.iter().map(|r| get(r).precision).collect();
        let rc: Vec<f64> = reports.iter().map(|r| get(r).recall).collect();
        out.insert(
            key.clone(),
            PrecisionRecall {
                precision: mean(&p),
                recall: mean(&rc),
            },
        );
    }
    out
}

/// Per-video means and medians.
pub fn aggregate(reports: &[MetricsReport]) -> CorpusMetrics {
    let col = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let tiou = col(|r| r.tiou);
    let f1 = col(|r| r.f1);
    let delta = col(|r| r.count_delta as f64);
    CorpusMetrics {
        videos: reports.len(),
        tiou_mean: mean(&tiou),
        tiou_median: median(&tiou),
        f1_mean: mean(&f1),
        f1_median: median(&f1),
        pr_at_seconds: mean_pr(reports, |r| &r.pr_at_seconds),
        pr_at_iou: mean_pr(reports, |r| &r.pr_at_iou),
        repetition_ratio_mean: mean(&col(|r| r.repetition_ratio)),
        count_delta_mean: mean(&delta),
        count_delta_median: median(&delta),
        title_token_f1_mean: mean(&col(|r| r.title_token_f1)),
    }
}
