//! Label records, inter-rater agreement and label resolution.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AnnotationCode, Stance, VideoId};

/// Decision threshold applied to predicted promoting labels.
pub const DEFAULT_PROMOTING_THRESHOLD: f64 = 0.7;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("no label records for video {0}")]
    MissingLabel(VideoId),
    #[error("manual label for {0} must not carry a confidence")]
    ManualWithConfidence(VideoId),
    #[error("predicted label for {0} needs a confidence in [0, 1]")]
    PredictedWithoutConfidence(VideoId),
    #[error("label table: {0}")]
    Csv(#[from] csv::Error),
    #[error("label table i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KappaError {
    #[error("agreement matrix is empty")]
    Empty,
    #[error("agreement matrix is not square over its categories")]
    NotSquare,
    #[error("kappa undefined: chance agreement is 1")]
    Undefined,
    #[error("annotators rated different item counts ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Manual,
    Predicted,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelSource::Manual => "manual",
            LabelSource::Predicted => "predicted",
        })
    }
}

/// One row of the label table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub video_id: VideoId,
    pub code: AnnotationCode,
    pub annotator_id: String,
    pub source: LabelSource,
    /// Present on predicted records only.
    pub confidence: Option<f64>,
    /// Monotone ordering key; later records supersede earlier ones.
    #[serde(default)]
    pub timestamp: u64,
    /// Second-opinion / consensus record that settles an edge case.
    #[serde(default)]
    pub resolution: bool,
}

impl LabelRecord {
    pub fn manual(video_id: VideoId, code: AnnotationCode, annotator_id: impl Into<String>) -> Self {
        LabelRecord {
            video_id,
            code,
            annotator_id: annotator_id.into(),
            source: LabelSource::Manual,
            confidence: None,
            timestamp: 0,
            resolution: false,
        }
    }

    pub fn predicted(video_id: VideoId, stance: Stance, confidence: f64, model_id: impl Into<String>) -> Self {
        LabelRecord {
            video_id,
            code: AnnotationCode::for_stance(stance),
            annotator_id: model_id.into(),
            source: LabelSource::Predicted,
            confidence: Some(confidence),
            timestamp: 0,
            resolution: false,
        }
    }

    pub fn with_timestamp(mut self, timestamp: u64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn as_resolution(mut self) -> Self {
        self.resolution = true;
        self
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        match (self.source, self.confidence) {
            (LabelSource::Manual, Some(_)) => Err(LabelError::ManualWithConfidence(self.video_id.clone())),
            (LabelSource::Predicted, None) => Err(LabelError::PredictedWithoutConfidence(self.video_id.clone())),
            (LabelSource::Predicted, Some(c)) if !(0.0..=1.0).contains(&c) => {
                Err(LabelError::PredictedWithoutConfidence(self.video_id.clone()))
            }
            _ => Ok(()),
        }
    }
}

/// How predicted labels are admitted when no manual label exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionPolicy {
    pub promoting_threshold: f64,
    pub below_threshold: BelowThreshold,
}

/// Fate of a predicted promoting label whose confidence misses the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BelowThreshold {
    Neutral,
    Discard,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy { promoting_threshold: DEFAULT_PROMOTING_THRESHOLD, below_threshold: BelowThreshold::Neutral }
    }
}

/// Resolved label of a video: a stance, or `None` when discarded.
///
/// Manual records win over predicted ones. Among manual records a
/// resolution record wins, then the latest timestamp.
pub fn resolve_label(
    video_id: &VideoId,
    records: &[LabelRecord],
    policy: &ResolutionPolicy,
) -> Result<Option<Stance>, LabelError> {
    let mine = records.iter().filter(|r| &r.video_id == video_id);
    let best_manual = mine
        .clone()
        .filter(|r| r.source == LabelSource::Manual)
        .max_by_key(|r| (r.resolution, r.timestamp));
    if let Some(r) = best_manual {
        return Ok(r.code.stance());
    }
    let best_predicted = mine
        .filter(|r| r.source == LabelSource::Predicted)
        .max_by_key(|r| (r.resolution, r.timestamp));
    let Some(r) = best_predicted else {
        return Err(LabelError::MissingLabel(video_id.clone()));
    };
    let stance = r.code.stance();
    if stance == Some(Stance::Promoting) && r.confidence.unwrap_or(0.0) < policy.promoting_threshold {
        return Ok(match policy.below_threshold {
            BelowThreshold::Neutral => Some(Stance::Neutral),
            BelowThreshold::Discard => None,
        });
    }
    Ok(stance)
}

/// Result of looking a video up in resolved labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelLookup {
    Stance(Stance),
    Discarded,
    Missing,
}

/// Resolved stance per video, ready for scoring.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolvedLabels {
    map: HashMap<VideoId, Option<Stance>>,
}

impl ResolvedLabels {
    pub fn insert(&mut self, id: VideoId, stance: Option<Stance>) {
        self.map.insert(id, stance);
    }

    pub fn lookup(&self, id: &VideoId) -> LabelLookup {
        match self.map.get(id) {
            Some(Some(s)) => LabelLookup::Stance(*s),
            Some(None) => LabelLookup::Discarded,
            None => LabelLookup::Missing,
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl FromIterator<(VideoId, Option<Stance>)> for ResolvedLabels {
    fn from_iter<I: IntoIterator<Item = (VideoId, Option<Stance>)>>(iter: I) -> Self {
        ResolvedLabels { map: iter.into_iter().collect() }
    }
}

/// In-memory label table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelStore {
    records: Vec<LabelRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    video_id: String,
    code: i8,
    annotator_id: String,
    source: LabelSource,
    confidence: Option<f64>,
    #[serde(default)]
    timestamp: u64,
    #[serde(default)]
    resolution: bool,
}

impl LabelStore {
    pub fn new(records: Vec<LabelRecord>) -> Result<Self, LabelError> {
        for r in &records {
            r.validate()?;
        }
        Ok(LabelStore { records })
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn push(&mut self, record: LabelRecord) -> Result<(), LabelError> {
        record.validate()?;
        self.records.push(record);
        Ok(())
    }

    pub fn next_timestamp(&self) -> u64 {
        self.records.iter().map(|r| r.timestamp + 1).max().unwrap_or(0)
    }

    /// Resolves every labeled video in one sequential pass.
    pub fn resolve_all(&self, policy: &ResolutionPolicy) -> ResolvedLabels {
        let mut grouped: BTreeMap<&VideoId, Vec<LabelRecord>> = BTreeMap::new();
        for r in &self.records {
            grouped.entry(&r.video_id).or_default().push(r.clone());
        }
        grouped
            .into_iter()
            .map(|(id, recs)| {
                let stance = resolve_label(id, &recs, policy).expect("group is non-empty");
                (id.clone(), stance)
            })
            .collect()
    }

    pub fn read_from(reader: impl Read) -> Result<Self, LabelError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for row in rdr.deserialize::<LabelRow>() {
            let row = row?;
            let code = AnnotationCode::new(row.code as i64)
                .map_err(|e| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
            records.push(LabelRecord {
                video_id: VideoId(row.video_id),
                code,
                annotator_id: row.annotator_id,
                source: row.source,
                confidence: row.confidence,
                timestamp: row.timestamp,
                resolution: row.resolution,
            });
        }
        LabelStore::new(records)
    }

    pub fn write_to(&self, writer: impl Write) -> Result<(), LabelError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(LabelRow {
                video_id: r.video_id.0.clone(),
                code: r.code.value(),
                annotator_id: r.annotator_id.clone(),
                source: r.source,
                confidence: r.confidence,
                timestamp: r.timestamp,
                resolution: r.resolution,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LabelError> {
        LabelStore::read_from(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), LabelError> {
        self.write_to(std::fs::File::create(path)?)
    }
}

/// Co-assignment counts of two annotators over shared categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgreementMatrix {
    pub categories: Vec<String>,
    /// `counts[i][j]`: items put in category i by the first annotator and j by the second.
    pub counts: Vec<Vec<u64>>,
}

impl AgreementMatrix {
    pub fn new(categories: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, KappaError> {
        if counts.len() != categories.len() || counts.iter().any(|row| row.len() != categories.len()) {
            return Err(KappaError::NotSquare);
        }
        Ok(AgreementMatrix { categories, counts })
    }

    /// Builds the matrix from two parallel label sequences.
    pub fn from_pairs<T: Ord + ToString>(a: &[T], b: &[T]) -> Result<Self, KappaError> {
        if a.len() != b.len() {
            return Err(KappaError::LengthMismatch(a.len(), b.len()));
        }
        let cats: BTreeSet<&T> = a.iter().chain(b).collect();
        let index: BTreeMap<&T, usize> = cats.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let k = cats.len();
        let mut counts = vec![vec![0u64; k]; k];
        for (x, y) in a.iter().zip(b) {
            counts[index[x]][index[y]] += 1;
        }
        Ok(AgreementMatrix { categories: cats.iter().map(|c| c.to_string()).collect(), counts })
    }

    pub fn transpose(&self) -> Self {
        let k = self.categories.len();
        let counts = (0..k).map(|i| (0..k).map(|j| self.counts[j][i]).collect()).collect();
        AgreementMatrix { categories: self.categories.clone(), counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Cohen's kappa, `(p_o - p_e) / (1 - p_e)`.
///
/// Evaluated as `(N·agree - Σ row_i·col_i) / (N² - Σ row_i·col_i)` in integers
/// so that exact cases come out exact.
pub fn cohens_kappa(m: &AgreementMatrix) -> Result<f64, KappaError> {
    let k = m.categories.len();
    if m.counts.len() != k || m.counts.iter().any(|r| r.len() != k) {
        return Err(KappaError::NotSquare);
    }
    let n = m.total() as i128;
    if n == 0 {
        return Err(KappaError::Empty);
    }
    let agree: i128 = (0..k).map(|i| m.counts[i][i] as i128).sum();
    let chance: i128 = (0..k)
        .map(|i| {
            let row: i128 = m.counts[i].iter().map(|&c| c as i128).sum();
            let col: i128 = m.counts.iter().map(|r| r[i] as i128).sum();
            row * col
        })
        .sum();
    let denom = n * n - chance;
    if denom == 0 {
        return Err(KappaError::Undefined);
    }
    if agree == n {
        return Ok(1.0);
    }
    Ok((n * agree - chance) as f64 / denom as f64)
}

/// Granularity at which two annotators are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaLevel {
    Code,
    Stance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport {
    pub annotator_a: String,
    pub annotator_b: String,
    pub level: KappaLevel,
    pub items: usize,
    pub observed_agreement: f64,
    pub kappa: f64,
    pub matrix: AgreementMatrix,
}

/// Kappa between two annotators over the videos both of them labeled.
///
/// Each annotator's latest manual record per video is used. At stance level
/// discarded codes form their own category.
pub fn kappa_between(
    store: &LabelStore,
    annotator_a: &str,
    annotator_b: &str,
    level: KappaLevel,
) -> Result<KappaReport, KappaError> {
    let latest = |who: &str| {
        let mut m: BTreeMap<&VideoId, &LabelRecord> = BTreeMap::new();
        for r in store.records().iter().filter(|r| r.annotator_id == who && r.source == LabelSource::Manual) {
            let e = m.entry(&r.video_id).or_insert(r);
            if r.timestamp >= e.timestamp {
                *e = r;
            }
        }
        m
    };
    let la = latest(annotator_a);
    let lb = latest(annotator_b);
    let key = |r: &LabelRecord| match level {
        KappaLevel::Code => format!("{:>3}", r.code.value()),
        KappaLevel::Stance => match r.code.stance() {
            Some(s) => s.name().to_string(),
            None => "discarded".to_string(),
        },
    };
    let (a, b): (Vec<String>, Vec<String>) = la
        .iter()
        .filter_map(|(id, ra)| lb.get(id).map(|rb| (key(ra), key(rb))))
        .unzip();
    let matrix = AgreementMatrix::from_pairs(&a, &b)?;
    let kappa = cohens_kappa(&matrix)?;
    let agree = a.iter().zip(&b).filter(|(x, y)| x == y).count();
    Ok(KappaReport {
        annotator_a: annotator_a.to_string(),
        annotator_b: annotator_b.to_string(),
        level,
        items: a.len(),
        observed_agreement: agree as f64 / a.len() as f64,
        kappa,
        matrix,
    })
}
