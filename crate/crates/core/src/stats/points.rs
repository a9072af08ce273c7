//! Scores at the comparison anchors and along the watch sequence.
//!
//! Search listings are scored with SERP-MS, recommendations and home pages
//! with NS, always over the top `top_n` items that resolve to a stance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{mean, Modality, StatsError};
use crate::annotation::{LabelLookup, ResolvedLabels};
use crate::domain::{ExposureSnapshot, RunRecord, SnapshotKind, Stance, TopicId, VideoId};
use crate::metrics::{normalized_score, serp_ms, ScoredList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Anchor {
    S1,
    E1,
    E2,
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Anchor::S1 => "S1",
            Anchor::E1 => "E1",
            Anchor::E2 => "E2",
        })
    }
}

/// Where S1 sits for listings that also have a pre-watch baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartAnchor {
    /// Probes taken after the first `window` watches.
    #[default]
    FirstWatches,
    /// The probe taken before any watch.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub top_n: usize,
    /// Watches per anchor.
    pub window: u32,
    pub search_start: StartAnchor,
    pub home_start: StartAnchor,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig { top_n: 10, window: 2, search_start: StartAnchor::default(), home_start: StartAnchor::default() }
    }
}

/// Label resolution outcome over every scored item.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelCoverage {
    pub items: u64,
    pub missing: u64,
    pub discarded: u64,
    /// Snapshots in which no item resolved.
    pub unscored_snapshots: u64,
    pub missing_by_video: BTreeMap<VideoId, u64>,
}

impl LabelCoverage {
    pub fn missing_fraction(&self) -> f64 {
        if self.items == 0 {
            0.0
        } else {
            self.missing as f64 / self.items as f64
        }
    }

    /// Unlabeled videos by number of appearances, most frequent first.
    pub fn worst_missing(&self, n: usize) -> Vec<(VideoId, u64)> {
        let mut v: Vec<(VideoId, u64)> = self.missing_by_video.iter().map(|(k, c)| (k.clone(), *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }

    pub fn merge(&mut self, other: &LabelCoverage) {
        self.items += other.items;
        self.missing += other.missing;
        self.discarded += other.discarded;
        self.unscored_snapshots += other.unscored_snapshots;
        for (k, c) in &other.missing_by_video {
            *self.missing_by_video.entry(k.clone()).or_default() += c;
        }
    }
}

/// Resolved stances of the top `top_n` items, in rank order.
pub fn resolve_items(snapshot: &ExposureSnapshot, labels: &ResolvedLabels, top_n: usize, coverage: &mut LabelCoverage) -> Vec<Stance> {
    let mut stances = Vec::new();
    for item in snapshot.items.iter().take(top_n) {
        coverage.items += 1;
        match labels.lookup(&item.video_id) {
            LabelLookup::Stance(s) => stances.push(s),
            LabelLookup::Discarded => coverage.discarded += 1,
            LabelLookup::Missing => {
                coverage.missing += 1;
                *coverage.missing_by_video.entry(item.video_id.clone()).or_default() += 1;
            }
        }
    }
    stances
}

/// Score of one snapshot, `None` when no item resolves.
pub fn score_snapshot(snapshot: &ExposureSnapshot, labels: &ResolvedLabels, top_n: usize, coverage: &mut LabelCoverage) -> Option<f64> {
    let list = ScoredList::new(resolve_items(snapshot, labels, top_n, coverage));
    let score = match snapshot.kind {
        SnapshotKind::Search => serp_ms(&list),
        _ => normalized_score(&list),
    };
    match score {
        Ok(s) => Some(s),
        Err(_) => {
            coverage.unscored_snapshots += 1;
            None
        }
    }
}

/// Snapshots of a modality that make up an anchor in one run.
pub(crate) fn anchor_snapshots<'a>(
    record: &'a RunRecord,
    modality: Modality,
    anchor: Anchor,
    config: &ScoringConfig,
) -> Vec<&'a ExposureSnapshot> {
    let p = &record.parameters;
    let total = p.total_watches();
    let snaps: Vec<&ExposureSnapshot> = record.snapshots_of(modality.kind()).collect();
    let start = match modality {
        Modality::Search => config.search_start,
        Modality::Home => config.home_start,
        Modality::Recommendations => StartAnchor::FirstWatches,
    };
    if modality == Modality::Search {
        // search probes only happen every few watches: take the nearest phase
        let indices: Vec<u32> = snaps.iter().map(|s| s.watch_index).collect();
        let target = match (anchor, start) {
            (Anchor::S1, StartAnchor::Baseline) => indices.iter().copied().find(|&i| i == 0),
            (Anchor::S1, StartAnchor::FirstWatches) => indices.iter().copied().filter(|&i| i > 0).min(),
            (Anchor::E1, _) => indices.iter().copied().filter(|&i| i > 0 && i <= p.n_prom).max(),
            (Anchor::E2, _) => indices.iter().copied().filter(|&i| i > p.n_prom && i <= total).max(),
        };
        return match target {
            Some(t) => snaps.into_iter().filter(|s| s.watch_index == t).collect(),
            None => Vec::new(),
        };
    }
    let w = config.window;
    let range = match (anchor, start) {
        (Anchor::S1, StartAnchor::Baseline) => 0..=0,
        (Anchor::S1, StartAnchor::FirstWatches) => 1..=w,
        (Anchor::E1, _) => p.n_prom.saturating_sub(w) + 1..=p.n_prom,
        (Anchor::E2, _) => total.saturating_sub(w) + 1..=total,
    };
    snaps.into_iter().filter(|s| range.contains(&s.watch_index)).collect()
}

/// Per-run scores at S1, E1 and E2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPoints {
    pub run_id: String,
    pub topic: TopicId,
    pub s1: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

impl RunPoints {
    pub fn at(&self, anchor: Anchor) -> &[f64] {
        match anchor {
            Anchor::S1 => &self.s1,
            Anchor::E1 => &self.e1,
            Anchor::E2 => &self.e2,
        }
    }
}

pub fn extract_comparison_points(
    records: &[RunRecord],
    modality: Modality,
    labels: &ResolvedLabels,
    config: &ScoringConfig,
    coverage: &mut LabelCoverage,
) -> Result<Vec<RunPoints>, StatsError> {
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        if record.snapshots.is_empty() {
            return Err(StatsError::NoSnapshots(record.run_id.clone()));
        }
        let mut scores = BTreeMap::new();
        for anchor in [Anchor::S1, Anchor::E1, Anchor::E2] {
            let snaps = anchor_snapshots(record, modality, anchor, config);
            if snaps.is_empty() {
                return Err(StatsError::MissingPoint { run_id: record.run_id.clone(), modality, point: anchor });
            }
            let values: Vec<f64> =
                snaps.iter().filter_map(|s| score_snapshot(s, labels, config.top_n, coverage)).collect();
            scores.insert(anchor, values);
        }
        out.push(RunPoints {
            run_id: record.run_id.clone(),
            topic: record.topic_id.clone(),
            s1: scores.remove(&Anchor::S1).unwrap_or_default(),
            e1: scores.remove(&Anchor::E1).unwrap_or_default(),
            e2: scores.remove(&Anchor::E2).unwrap_or_default(),
        })
    }
    Ok(out)
}

/// One run's score per watch index (mean over the run's snapshots at that
/// index) and its resolved stance counts (promoting, neutral, debunking).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub run_id: String,
    pub topic: TopicId,
    pub scores: BTreeMap<u32, f64>,
    pub stance_counts: BTreeMap<u32, [u64; 3]>,
}

pub fn run_series(
    records: &[RunRecord],
    modality: Modality,
    labels: &ResolvedLabels,
    top_n: usize,
    coverage: &mut LabelCoverage,
) -> Vec<RunSeries> {
    records
        .iter()
        .map(|record| {
            let mut per_index: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let mut stance_counts: BTreeMap<u32, [u64; 3]> = BTreeMap::new();
            for snap in record.snapshots_of(modality.kind()) {
                let stances = resolve_items(snap, labels, top_n, coverage);
                let counts = stance_counts.entry(snap.watch_index).or_default();
                for s in &stances {
                    counts[s.index()] += 1;
                }
                let list = ScoredList::new(stances);
                let score = match modality {
                    Modality::Search => serp_ms(&list),
                    _ => normalized_score(&list),
                };
                match score {
                    Ok(v) => per_index.entry(snap.watch_index).or_default().push(v),
                    Err(_) => coverage.unscored_snapshots += 1,
                }
            }
            RunSeries {
                run_id: record.run_id.clone(),
                topic: record.topic_id.clone(),
                scores: per_index.into_iter().map(|(i, v)| (i, mean(&v))).collect(),
                stance_counts,
            }
        })
        .collect()
}

/// Run-averaged score at one watch index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub watch_index: u32,
    pub mean: f64,
    /// Runs contributing a score.
    pub runs: usize,
    /// Shares of promoting, neutral and debunking items pooled over runs.
    pub proportions: [f64; 3],
}

/// Averages run series index by index; every run weighs the same.
pub fn mean_series<'a>(runs: impl IntoIterator<Item = &'a RunSeries>) -> Vec<SeriesPoint> {
    let mut scores: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut counts: BTreeMap<u32, [u64; 3]> = BTreeMap::new();
    for run in runs {
        for (&i, &v) in &run.scores {
            scores.entry(i).or_default().push(v);
        }
        for (&i, c) in &run.stance_counts {
            let e = counts.entry(i).or_default();
            (0..3).for_each(|k| e[k] += c[k]);
        }
    }
    scores
        .into_iter()
        .map(|(i, v)| {
            let c = counts.get(&i).copied().unwrap_or_default();
            let total: u64 = c.iter().sum();
            let proportions = if total == 0 { [0.0; 3] } else { c.map(|x| x as f64 / total as f64) };
            SeriesPoint { watch_index: i, mean: mean(&v), runs: v.len(), proportions }
        })
        .collect()
}
