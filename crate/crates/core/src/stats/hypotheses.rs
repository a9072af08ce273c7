//! Directional verdicts over comparison points.
//!
//! A comparison is "better" when the later sample is significantly lower
//! (less misinformation), "worse" when significantly higher. Each hypothesis
//! expects one direction; a significant move the other way refutes it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mann_whitney::{bonferroni, mann_whitney_u, MannWhitney};
use super::points::{
    anchor_snapshots, extract_comparison_points, mean_series, run_series, score_snapshot, Anchor, LabelCoverage,
    RunPoints, RunSeries, ScoringConfig, SeriesPoint,
};
use super::{mean, std_dev, Modality, StatsError};
use crate::annotation::ResolvedLabels;
use crate::domain::{ProcessParameters, RunRecord, TopicId};
use crate::metrics::{diff_to_linear, ScoreSeries};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    #[serde(rename = "H1.1")]
    H1_1,
    #[serde(rename = "H2.0")]
    H2_0,
    #[serde(rename = "H2.1")]
    H2_1,
    #[serde(rename = "H2.2")]
    H2_2,
    #[serde(rename = "H2.3")]
    H2_3,
}

impl Hypothesis {
    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::H1_1 => "H1.1",
            Hypothesis::H2_0 => "H2.0",
            Hypothesis::H2_1 => "H2.1",
            Hypothesis::H2_2 => "H2.2",
            Hypothesis::H2_3 => "H2.3",
        }
    }

    /// Anchors compared (earlier, later) and the expected change.
    fn comparison(self) -> Option<(Anchor, Anchor, Change)> {
        match self {
            Hypothesis::H2_0 => Some((Anchor::S1, Anchor::E1, Change::Worse)),
            Hypothesis::H2_1 => Some((Anchor::E1, Anchor::E2, Change::Better)),
            Hypothesis::H2_2 => Some((Anchor::S1, Anchor::E2, Change::Better)),
            _ => None,
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supported,
    Refuted,
    NoSignificantDifference,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::Refuted => "refuted",
            Verdict::NoSignificantDifference => "n.s.d.",
        }
    }
}

/// Significant direction of a two-sample comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Change {
    Better,
    Worse,
    Nsd,
}

impl Change {
    pub fn name(self) -> &'static str {
        match self {
            Change::Better => "better",
            Change::Worse => "worse",
            Change::Nsd => "n.s.d.",
        }
    }

    /// Direction of `earlier` → `later` given the test of (earlier, later).
    pub fn of(test: &MannWhitney, alpha: Ratio<u64>) -> Change {
        if test.p_value >= ratio_f64(alpha) {
            return Change::Nsd;
        }
        let center = (test.n_a * test.n_b) as f64 / 2.0;
        // U of the earlier sample above its center: earlier tends higher
        if test.u > center {
            Change::Better
        } else if test.u < center {
            Change::Worse
        } else {
            Change::Nsd
        }
    }

    fn verdict(self, expected: Change) -> Verdict {
        match self {
            Change::Nsd => Verdict::NoSignificantDifference,
            c if c == expected => Verdict::Supported,
            _ => Verdict::Refuted,
        }
    }
}

pub(crate) fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    pub hypothesis: Hypothesis,
    /// `None` pools every topic.
    pub topic: Option<TopicId>,
    pub modality: Modality,
    /// "S1-E1", "phase1", ...
    pub comparison: String,
    /// U for tests, DIFF-TO-LINEAR for H2.3.
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub alpha: Ratio<u64>,
    pub change: Change,
    pub verdict: Verdict,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Percentile bootstrap interval, H2.3 only.
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Family-wise level; per-topic tests divide it by the topic count.
    pub alpha: Ratio<u64>,
    pub scoring: ScoringConfig,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            alpha: Ratio::new(1, 20),
            scoring: ScoringConfig::default(),
            bootstrap_resamples: 1000,
            bootstrap_seed: 0,
        }
    }
}

/// Everything derived from one set of records and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub topics: Vec<TopicId>,
    pub verdicts: Vec<HypothesisVerdict>,
    pub points: BTreeMap<Modality, Vec<RunPoints>>,
    /// Run-averaged score series per (topic, modality).
    pub series: BTreeMap<(TopicId, Modality), Vec<SeriesPoint>>,
    /// Run-averaged score series over every topic.
    pub overall_series: BTreeMap<Modality, Vec<SeriesPoint>>,
    pub coverage: LabelCoverage,
    /// Runs left out because they did not complete.
    pub skipped_runs: Vec<String>,
    /// Process parameters of the evaluated runs.
    pub parameters: ProcessParameters,
}

impl Evaluation {
    pub fn find(&self, h: Hypothesis, topic: Option<&TopicId>, modality: Modality) -> Vec<&HypothesisVerdict> {
        self.verdicts
            .iter()
            .filter(|v| v.hypothesis == h && v.topic.as_ref() == topic && v.modality == modality)
            .collect()
    }
}

fn test_pair(
    hypothesis: Hypothesis,
    topic: Option<TopicId>,
    modality: Modality,
    a: &[f64],
    b: &[f64],
    alpha: Ratio<u64>,
) -> Result<HypothesisVerdict, StatsError> {
    let (from, to, expected) = hypothesis.comparison().expect("pairwise hypothesis");
    let comparison = format!("{from}-{to}");
    let label = format!("{comparison} {} {}", topic.as_ref().map_or("overall", |t| t.as_str()), modality);
    if a.is_empty() {
        return Err(StatsError::NoScores { comparison: label, side: "first sample" });
    }
    if b.is_empty() {
        return Err(StatsError::NoScores { comparison: label, side: "second sample" });
    }
    let test = mann_whitney_u(a, b)?;
    let change = Change::of(&test, alpha);
    Ok(HypothesisVerdict {
        hypothesis,
        topic,
        modality,
        comparison,
        statistic: test.u,
        p_value: Some(test.p_value),
        alpha,
        change,
        verdict: change.verdict(expected),
        n_a: a.len(),
        n_b: b.len(),
        mean_a: mean(a),
        mean_b: mean(b),
        interval: None,
    })
}

fn pooled<'a>(points: impl Iterator<Item = &'a RunPoints>, anchor: Anchor) -> Vec<f64> {
    points.flat_map(|p| p.at(anchor).iter().copied()).collect()
}

fn phase_bounds(params: &ProcessParameters, first: u32) -> [(u32, u32, &'static str); 2] {
    [(first, params.n_prom, "phase1"), (params.n_prom, params.total_watches(), "phase2")]
}

fn dtl_of(runs: &[&RunSeries], start: u32, end: u32) -> Result<f64, StatsError> {
    let series = mean_series(runs.iter().copied());
    let points = ScoreSeries::new(series.iter().map(|p| (p.watch_index, p.mean)).collect())?;
    Ok(diff_to_linear(&points, start, end)?)
}

/// DIFF-TO-LINEAR of the run-averaged series with a percentile bootstrap over runs.
fn linearity(
    runs: &[&RunSeries],
    start: u32,
    end: u32,
    resamples: usize,
    seed: u64,
) -> Result<(f64, Option<(f64, f64)>), StatsError> {
    let point = dtl_of(runs, start, end)?;
    if resamples == 0 || runs.len() < 2 {
        return Ok((point, None));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let sample: Vec<&RunSeries> = (0..runs.len()).map(|_| runs[rng.random_range(0..runs.len())]).collect();
        draws.push(dtl_of(&sample, start, end)?);
    }
    draws.sort_by(f64::total_cmp);
    let at = |q: f64| draws[((q * resamples as f64) as usize).min(resamples - 1)];
    Ok((point, Some((at(0.025), at(0.975)))))
}

/// H2.3 for both phases of one group of runs. A bootstrap interval that
/// excludes zero refutes linearity.
fn linearity_verdicts(
    out: &mut Vec<HypothesisVerdict>,
    topic: Option<&TopicId>,
    modality: Modality,
    runs: &[&RunSeries],
    mean: &[SeriesPoint],
    params: &ProcessParameters,
    config: &EvaluationConfig,
) -> Result<(), StatsError> {
    let first = mean.first().map_or(0, |p| p.watch_index);
    let group = topic.map_or("overall", |t| t.as_str());
    let at = |i: u32| mean.iter().find(|p| p.watch_index == i).map_or(f64::NAN, |p| p.mean);
    for (start, end, phase) in phase_bounds(params, first) {
        let seed = derive_seed(config.bootstrap_seed, &format!("bootstrap/{group}/{modality}/{phase}"));
        let (dtl, interval) = linearity(runs, start, end, config.bootstrap_resamples, seed)?;
        let verdict = match interval {
            Some((lo, hi)) if lo > 0.0 || hi < 0.0 => Verdict::Refuted,
            Some(_) => Verdict::Supported,
            None => Verdict::NoSignificantDifference,
        };
        out.push(HypothesisVerdict {
            hypothesis: Hypothesis::H2_3,
            topic: topic.cloned(),
            modality,
            comparison: phase.into(),
            statistic: dtl,
            p_value: None,
            alpha: config.alpha,
            change: Change::Nsd,
            verdict,
            n_a: runs.len(),
            n_b: runs.len(),
            mean_a: at(start),
            mean_b: at(end),
            interval,
        });
    }
    Ok(())
}

/// H2.0–H2.2 per topic and overall for every modality, and H2.3 for
/// recommendations and home. Only completed runs take part. Pure in its inputs.
pub fn evaluate_hypotheses(
    records: &[RunRecord],
    labels: &ResolvedLabels,
    config: &EvaluationConfig,
) -> Result<Evaluation, StatsError> {
    let skipped_runs: Vec<String> =
        records.iter().filter(|r| !r.status.is_completed()).map(|r| r.run_id.clone()).collect();
    let completed: Vec<RunRecord> = records.iter().filter(|r| r.status.is_completed()).cloned().collect();
    if completed.is_empty() {
        return Err(StatsError::NoRuns);
    }
    if let Some(r) = completed.iter().find(|r| r.parameters != completed[0].parameters) {
        return Err(StatsError::MixedParameters(r.run_id.clone()));
    }
    let topics: Vec<TopicId> = completed.iter().map(|r| r.topic_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let per_topic_alpha = bonferroni(config.alpha, topics.len() as u64)?;
    let mut coverage = LabelCoverage::default();
    let mut verdicts = Vec::new();
    let mut points_by_modality = BTreeMap::new();
    let mut series = BTreeMap::new();
    let mut overall_series = BTreeMap::new();

    for modality in Modality::ALL {
        let points = extract_comparison_points(&completed, modality, labels, &config.scoring, &mut coverage)?;
        for h in [Hypothesis::H2_0, Hypothesis::H2_1, Hypothesis::H2_2] {
            let (from, to, _) = h.comparison().expect("pairwise");
            for topic in &topics {
                let mine = || points.iter().filter(|p| &p.topic == topic);
                let (a, b) = (pooled(mine(), from), pooled(mine(), to));
                verdicts.push(test_pair(h, Some(topic.clone()), modality, &a, &b, per_topic_alpha)?);
            }
            let (a, b) = (pooled(points.iter(), from), pooled(points.iter(), to));
            verdicts.push(test_pair(h, None, modality, &a, &b, config.alpha)?);
        }
        points_by_modality.insert(modality, points);

        let mut series_cov = LabelCoverage::default();
        let runs = run_series(&completed, modality, labels, config.scoring.top_n, &mut series_cov);
        let params = &completed[0].parameters;
        for topic in &topics {
            let mine: Vec<&RunSeries> = runs.iter().filter(|r| &r.topic == topic).collect();
            let mean = mean_series(mine.iter().copied());
            if modality != Modality::Search {
                linearity_verdicts(&mut verdicts, Some(topic), modality, &mine, &mean, params, config)?;
            }
            series.insert((topic.clone(), modality), mean);
        }
        let all: Vec<&RunSeries> = runs.iter().collect();
        let mean = mean_series(all.iter().copied());
        if modality != Modality::Search {
            linearity_verdicts(&mut verdicts, None, modality, &all, &mean, params, config)?;
        }
        overall_series.insert(modality, mean);
    }

    let parameters = completed[0].parameters.clone();
    Ok(Evaluation { topics, verdicts, points: points_by_modality, series, overall_series, coverage, skipped_runs, parameters })
}

/// Which probes two datasets are compared on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    pub modality: Modality,
    pub scoring: ScoringConfig,
    pub alpha: Ratio<u64>,
    /// Restrict to the probes of one anchor; `None` takes every probe.
    pub anchor: Option<Anchor>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            modality: Modality::Search,
            scoring: ScoringConfig::default(),
            alpha: Ratio::new(1, 20),
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub topic: Option<TopicId>,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_b: f64,
    pub std_b: f64,
    pub u: f64,
    pub p_value: f64,
    pub alpha: Ratio<u64>,
    /// Direction from dataset a to dataset b.
    pub change: Change,
    /// H1.1 expects dataset b to be better.
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub modality: Modality,
    pub rows: Vec<ComparisonRow>,
    pub shared_queries: Vec<String>,
}

type Side<'a> = (&'a [RunRecord], &'a ResolvedLabels);

fn scores_by_topic(
    side: Side<'_>,
    config: &ComparisonConfig,
    queries: Option<&BTreeSet<String>>,
) -> BTreeMap<TopicId, Vec<f64>> {
    let (records, labels) = side;
    let mut cov = LabelCoverage::default();
    let mut out: BTreeMap<TopicId, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status.is_completed()) {
        let snaps: Vec<_> = match config.anchor {
            Some(a) => anchor_snapshots(r, config.modality, a, &config.scoring),
            None => r.snapshots_of(config.modality.kind()).collect(),
        };
        for s in snaps {
            if let Some(q) = queries {
                if !s.query.as_ref().is_some_and(|x| q.contains(x)) {
                    continue;
                }
            }
            if let Some(v) = score_snapshot(s, labels, config.scoring.top_n, &mut cov) {
                out.entry(r.topic_id.clone()).or_default().push(v);
            }
        }
    }
    out
}

fn query_set(records: &[RunRecord]) -> BTreeSet<String> {
    records.iter().flat_map(|r| r.snapshots.iter().filter_map(|s| s.query.clone())).collect()
}

/// Per-topic and pooled tests between two datasets over their shared
/// topics (and, for search, shared queries).
pub fn compare_studies(a: Side<'_>, b: Side<'_>, config: &ComparisonConfig) -> Result<ComparisonReport, StatsError> {
    let shared_queries: Option<BTreeSet<String>> = if config.modality == Modality::Search {
        let shared: BTreeSet<String> = query_set(a.0).intersection(&query_set(b.0)).cloned().collect();
        if shared.is_empty() {
            return Err(StatsError::EmptySharedSet("queries"));
        }
        Some(shared)
    } else {
        None
    };
    let sa = scores_by_topic(a, config, shared_queries.as_ref());
    let sb = scores_by_topic(b, config, shared_queries.as_ref());
    let topics: Vec<TopicId> = sa.keys().filter(|t| sb.contains_key(*t)).cloned().collect();
    if topics.is_empty() {
        return Err(StatsError::EmptySharedSet("topics"));
    }
    let per_topic_alpha = bonferroni(config.alpha, topics.len() as u64)?;
    let row = |topic: Option<TopicId>, x: &[f64], y: &[f64], alpha| -> Result<ComparisonRow, StatsError> {
        let test = mann_whitney_u(x, y)?;
        let change = Change::of(&test, alpha);
        Ok(ComparisonRow {
            topic,
            n_a: x.len(),
            n_b: y.len(),
            mean_a: mean(x),
            std_a: std_dev(x),
            mean_b: mean(y),
            std_b: std_dev(y),
            u: test.u,
            p_value: test.p_value,
            alpha,
            change,
            verdict: change.verdict(Change::Better),
        })
    };
    let mut rows = Vec::new();
    for t in &topics {
        rows.push(row(Some(t.clone()), &sa[t], &sb[t], per_topic_alpha)?);
    }
    let all_a: Vec<f64> = topics.iter().flat_map(|t| sa[t].iter().copied()).collect();
    let all_b: Vec<f64> = topics.iter().flat_map(|t| sb[t].iter().copied()).collect();
    rows.push(row(None, &all_a, &all_b, config.alpha)?);
    Ok(ComparisonReport {
        modality: config.modality,
        rows,
        shared_queries: shared_queries.map(|s| s.into_iter().collect()).unwrap_or_default(),
    })
}
