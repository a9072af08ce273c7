//! Shared vocabulary of an audit: videos, stances, topics, exposure
//! snapshots and run traces.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("annotation code {0} is not admissible (expected -1..=10)")]
    InadmissibleCode(i64),
    #[error("stance value {0} is not admissible (expected -1, 0 or 1)")]
    InadmissibleStance(i64),
    #[error("duration must be positive")]
    NonPositiveDuration,
    #[error("snapshot ranks are not contiguous from 1: found rank {found} at position {position}")]
    NonContiguousRanks { position: usize, found: u32 },
    #[error("{kind} snapshot has {len} items, at most {max} allowed")]
    TooManyItems { kind: SnapshotKind, len: usize, max: usize },
    #[error("search snapshots need a query and other kinds must not carry one")]
    QueryMismatch,
    #[error("invalid process parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("topic `{0}` has no queries")]
    EmptyQueries(String),
}

/// Opaque platform identifier of a video.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VideoId(pub String);

impl VideoId {
    pub fn new(id: impl Into<String>) -> Self {
        VideoId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VideoId {
    fn from(s: &str) -> Self {
        VideoId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub String);

impl TopicId {
    pub fn new(id: impl Into<String>) -> Self {
        TopicId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TopicId {
    fn from(s: &str) -> Self {
        TopicId(s.to_owned())
    }
}

/// Position of a video towards a conspiracy narrative.
///
/// Serialized as the integer stance value (-1, 0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Stance {
    Debunking,
    Neutral,
    Promoting,
}

impl Stance {
    pub const ALL: [Stance; 3] = [Stance::Promoting, Stance::Neutral, Stance::Debunking];

    pub fn value(self) -> i8 {
        match self {
            Stance::Debunking => -1,
            Stance::Neutral => 0,
            Stance::Promoting => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stance::Debunking => "debunking",
            Stance::Neutral => "neutral",
            Stance::Promoting => "promoting",
        }
    }

    /// Index into `[promoting, neutral, debunking]` histograms.
    pub fn index(self) -> usize {
        match self {
            Stance::Promoting => 0,
            Stance::Neutral => 1,
            Stance::Debunking => 2,
        }
    }
}

impl TryFrom<i8> for Stance {
    type Error = DomainError;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Stance::Debunking),
            0 => Ok(Stance::Neutral),
            1 => Ok(Stance::Promoting),
            other => Err(DomainError::InadmissibleStance(other as i64)),
        }
    }
}

impl From<Stance> for i8 {
    fn from(s: Stance) -> i8 {
        s.value()
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Manual annotation code, -1..=10.
///
/// | code        | meaning                                    | stance    |
/// |-------------|--------------------------------------------|-----------|
/// | -1, 0, 1    | debunking / neutral / promoting, on topic  | -1, 0, +1 |
/// | 2, 3, 4     | same, misinformation of another topic      | -1, 0, +1 |
/// | 5           | not about misinformation                   | 0         |
/// | 6, 7, 8     | non-English / undeterminable / removed     | discarded |
/// | 9, 10       | mocking (on topic / other topic)           | -1        |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct AnnotationCode(i8);

impl AnnotationCode {
    pub const ALL: [i8; 12] = [-1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

    pub fn new(code: i64) -> Result<Self, DomainError> {
        if (-1..=10).contains(&code) {
            Ok(AnnotationCode(code as i8))
        } else {
            Err(DomainError::InadmissibleCode(code))
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// Stance used for scoring; `None` for codes excluded from evaluation.
    pub fn stance(self) -> Option<Stance> {
        match self.0 {
            -1 | 2 | 9 | 10 => Some(Stance::Debunking),
            1 | 4 => Some(Stance::Promoting),
            0 | 3 | 5 => Some(Stance::Neutral),
            6..=8 => None,
            _ => unreachable!("code range checked at construction"),
        }
    }

    /// Mocking codes are scored as debunking but kept distinguishable.
    pub fn is_mocking(self) -> bool {
        matches!(self.0, 9 | 10)
    }

    /// Canonical code for a stance (the on-topic code).
    pub fn for_stance(stance: Stance) -> Self {
        AnnotationCode(stance.value())
    }
}

impl TryFrom<i8> for AnnotationCode {
    type Error = DomainError;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        AnnotationCode::new(v as i64)
    }
}

impl From<AnnotationCode> for i8 {
    fn from(c: AnnotationCode) -> i8 {
        c.0
    }
}

impl fmt::Display for AnnotationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Outcome of mapping an annotation code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeMapping {
    Stance(Stance),
    Discarded,
}

/// Maps a raw annotation code onto a stance, or rejects an inadmissible one.
pub fn map_code_to_stance(code: i64) -> Result<CodeMapping, DomainError> {
    let code = AnnotationCode::new(code)?;
    Ok(match code.stance() {
        Some(s) => CodeMapping::Stance(s),
        None => CodeMapping::Discarded,
    })
}

/// Time span in minutes, held as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Minutes(Ratio<u32>);

impl Minutes {
    pub fn whole(minutes: u32) -> Self {
        Minutes(Ratio::from_integer(minutes))
    }

    pub fn from_seconds(seconds: u32) -> Self {
        Minutes(Ratio::new(seconds, 60))
    }

    pub fn ratio(self) -> Ratio<u32> {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn is_positive(self) -> bool {
        *self.0.numer() > 0
    }
}

impl fmt::Display for Minutes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A catalog item. `true_stance` is only known for simulated content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: VideoId,
    pub topic: TopicId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_stance: Option<Stance>,
    pub title: String,
    pub description: String,
    #[serde(default)]
    pub transcript: String,
    pub channel_id: String,
    pub duration: Minutes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: TopicId,
    pub display_name: String,
    pub queries: Vec<String>,
}

impl Topic {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.queries.is_empty() {
            return Err(DomainError::EmptyQueries(self.topic_id.0.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Search,
    Recommendation,
    Home,
}

impl fmt::Display for SnapshotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnapshotKind::Search => "search",
            SnapshotKind::Recommendation => "recommendation",
            SnapshotKind::Home => "home",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Baseline,
    Promoting,
    Debunking,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Baseline => "baseline",
            Phase::Promoting => "promoting",
            Phase::Debunking => "debunking",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedItem {
    pub rank: u32,
    pub video_id: VideoId,
}

/// Maximum length of a recommendation list collected next to a video.
pub const MAX_RECOMMENDATIONS: usize = 20;
/// Minimum number of search/home results collected when available.
pub const MIN_LISTING: usize = 20;

/// Ordered list of videos observed at one probe point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureSnapshot {
    pub run_id: String,
    pub kind: SnapshotKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    /// Number of videos watched before this snapshot was taken.
    pub watch_index: u32,
    pub phase: Phase,
    pub items: Vec<RankedItem>,
}

impl ExposureSnapshot {
    /// Builds a snapshot from an ordered id list, assigning ranks 1..=k.
    pub fn from_ids(
        run_id: impl Into<String>,
        kind: SnapshotKind,
        query: Option<String>,
        watch_index: u32,
        phase: Phase,
        ids: impl IntoIterator<Item = VideoId>,
    ) -> Self {
        let items = ids
            .into_iter()
            .enumerate()
            .map(|(i, video_id)| RankedItem { rank: i as u32 + 1, video_id })
            .collect();
        ExposureSnapshot { run_id: run_id.into(), kind, query, watch_index, phase, items }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for (position, item) in self.items.iter().enumerate() {
            if item.rank != position as u32 + 1 {
                return Err(DomainError::NonContiguousRanks { position, found: item.rank });
            }
        }
        if self.kind == SnapshotKind::Recommendation && self.items.len() > MAX_RECOMMENDATIONS {
            return Err(DomainError::TooManyItems {
                kind: self.kind,
                len: self.items.len(),
                max: MAX_RECOMMENDATIONS,
            });
        }
        if (self.kind == SnapshotKind::Search) != self.query.is_some() {
            return Err(DomainError::QueryMismatch);
        }
        Ok(())
    }

    pub fn video_ids(&self) -> impl Iterator<Item = &VideoId> {
        self.items.iter().map(|i| &i.video_id)
    }

    /// First `min(n, len)` items with their ranks untouched.
    pub fn truncate_top_n(&self, n: usize) -> ExposureSnapshot {
        let n = n.max(1);
        ExposureSnapshot {
            items: self.items.iter().take(n).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Controlled process parameters of one agent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessParameters {
    pub n_prom: u32,
    pub n_deb: u32,
    /// Maximum watching time per video, minutes.
    pub t_watch: u32,
    pub n_q: u32,
    /// Wait after every query, minutes.
    pub t_wait: u32,
    /// Watches between search phases.
    pub f_q: u32,
    pub runs_per_topic: u32,
    pub top_n_metric: u32,
}

impl Default for ProcessParameters {
    fn default() -> Self {
        ProcessParameters {
            n_prom: 40,
            n_deb: 40,
            t_watch: 30,
            n_q: 5,
            t_wait: 20,
            f_q: 2,
            runs_per_topic: 10,
            top_n_metric: 10,
        }
    }
}

impl ProcessParameters {
    pub fn validate(&self) -> Result<(), DomainError> {
        let fields: [(&'static str, u32); 8] = [
            ("n_prom", self.n_prom),
            ("n_deb", self.n_deb),
            ("t_watch", self.t_watch),
            ("n_q", self.n_q),
            ("t_wait", self.t_wait),
            ("f_q", self.f_q),
            ("runs_per_topic", self.runs_per_topic),
            ("top_n_metric", self.top_n_metric),
        ];
        for (field, value) in fields {
            if value == 0 {
                return Err(DomainError::InvalidParameter {
                    field,
                    reason: "must be strictly positive".into(),
                });
            }
        }
        if self.f_q > self.n_prom {
            return Err(DomainError::InvalidParameter {
                field: "f_q",
                reason: format!("f_q ({}) exceeds n_prom ({})", self.f_q, self.n_prom),
            });
        }
        Ok(())
    }

    pub fn total_watches(&self) -> u32 {
        self.n_prom + self.n_deb
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchEvent {
    pub phase: Phase,
    pub video_id: VideoId,
    pub watched: Minutes,
}

/// Position from which an interrupted run could continue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeCursor {
    pub phase: Phase,
    /// Watches completed before the failure.
    pub watches_completed: u32,
    pub snapshots_completed: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { reason: String, cursor: ResumeCursor },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Full trace of one agent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub topic_id: TopicId,
    pub agent_seed: u64,
    pub parameters: ProcessParameters,
    pub watch_sequence: Vec<WatchEvent>,
    pub snapshots: Vec<ExposureSnapshot>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn snapshots_of(&self, kind: SnapshotKind) -> impl Iterator<Item = &ExposureSnapshot> {
        self.snapshots.iter().filter(move |s| s.kind == kind)
    }

    /// Checks phase ordering of watches and snapshot watch indices.
    pub fn check_consistency(&self) -> Result<(), String> {
        if self.status.is_completed() {
            let prom = self.watch_sequence.iter().take_while(|w| w.phase == Phase::Promoting).count();
            let deb = self.watch_sequence[prom..].iter().filter(|w| w.phase == Phase::Debunking).count();
            if prom as u32 != self.parameters.n_prom
                || deb as u32 != self.parameters.n_deb
                || prom + deb != self.watch_sequence.len()
            {
                return Err(format!(
                    "run {}: expected {} promoting then {} debunking watches",
                    self.run_id, self.parameters.n_prom, self.parameters.n_deb
                ));
            }
        }
        let total = self.watch_sequence.len() as u32;
        for s in &self.snapshots {
            if s.watch_index > total {
                return Err(format!(
                    "run {}: snapshot watch_index {} exceeds {} watches",
                    self.run_id, s.watch_index, total
                ));
            }
            s.validate().map_err(|e| format!("run {}: {e}", self.run_id))?;
        }
        Ok(())
    }
}
