//! Nonparametric evaluation of audit runs.

pub mod hypotheses;
pub mod mann_whitney;
pub mod points;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::SnapshotKind;
use crate::metrics::MetricError;
pub use hypotheses::{
    compare_studies, evaluate_hypotheses, Change, ComparisonConfig, ComparisonReport, ComparisonRow, Evaluation,
    EvaluationConfig, Hypothesis, HypothesisVerdict, Verdict,
};
pub use mann_whitney::{bonferroni, exact_p, mann_whitney_u, normal_p, MannWhitney, PMethod};
pub use points::{
    extract_comparison_points, mean_series, run_series, Anchor, LabelCoverage, RunPoints, RunSeries, ScoringConfig,
    SeriesPoint, StartAnchor,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample `{0}` is empty")]
    EmptySample(&'static str),
    #[error("sample `{0}` contains a non-finite value")]
    NonFinite(&'static str),
    #[error("Bonferroni correction needs at least one comparison")]
    ZeroComparisons,
    #[error("run {0} has no snapshots")]
    NoSnapshots(String),
    #[error("run {run_id} has no {modality} snapshot at {point}")]
    MissingPoint { run_id: String, modality: Modality, point: Anchor },
    #[error("{comparison}: no labeled scores in {side}")]
    NoScores { comparison: String, side: &'static str },
    #[error("the two datasets share no {0}")]
    EmptySharedSet(&'static str),
    #[error("run {0} uses different process parameters from the other runs")]
    MixedParameters(String),
    #[error("no completed runs to evaluate")]
    NoRuns,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Which listing a score comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Search,
    Recommendations,
    Home,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Search, Modality::Recommendations, Modality::Home];

    pub fn kind(self) -> SnapshotKind {
        match self {
            Modality::Search => SnapshotKind::Search,
            Modality::Recommendations => SnapshotKind::Recommendation,
            Modality::Home => SnapshotKind::Home,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Search => "search",
            Modality::Recommendations => "recommendations",
            Modality::Home => "home",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}
